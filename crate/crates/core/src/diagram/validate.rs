use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{layout, InfluenceDiagram, NodeKind};

/// Normalization tolerance for CPT rows.
pub const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(n) => write!(f, "{n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, node: Option<&str>, message: impl Into<String>) {
        self.violations.push(Violation {
            node: node.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Collects every structural and numeric problem with `diagram`.
pub fn validate(diagram: &InfluenceDiagram) -> ValidationReport {
    let mut report = ValidationReport::default();

    if diagram.topological_order().is_none() {
        report.push(None, "directed graph has a cycle");
    }

    for (i, node) in diagram.nodes().iter().enumerate() {
        let id = node.id.as_str();
        match node.kind {
            NodeKind::Value => {
                if !diagram.children(i).is_empty() {
                    report.push(Some(id), "value node has child");
                }
                if !node.frame.is_empty() {
                    report.push(Some(id), "value node must not declare a frame");
                }
            }
            NodeKind::Random | NodeKind::Decision => {
                if node.frame.is_empty() {
                    report.push(Some(id), "frame is empty");
                }
                let distinct: BTreeSet<_> = node.frame.0.iter().collect();
                if distinct.len() != node.frame.len() {
                    report.push(Some(id), "frame has repeated values");
                }
            }
        }

        let cpts = diagram.cpts().iter().filter(|c| c.child == i).count();
        let tables = diagram.value_tables().iter().filter(|v| v.node == i).count();
        match node.kind {
            NodeKind::Random if cpts != 1 => report.push(Some(id), format!("random node has {cpts} cpts, expected 1")),
            NodeKind::Decision | NodeKind::Value if cpts != 0 => report.push(Some(id), "only random nodes carry a cpt"),
            _ => {}
        }
        match node.kind {
            NodeKind::Value if tables != 1 => {
                report.push(Some(id), format!("value node has {tables} value tables, expected 1"))
            }
            NodeKind::Random | NodeKind::Decision if tables != 0 => {
                report.push(Some(id), "only value nodes carry a value table")
            }
            _ => {}
        }
    }

    let parent_has_frame = |ps: &[usize]| ps.iter().all(|&p| diagram.kind(p) != NodeKind::Value);

    for cpt in diagram.cpts() {
        let id = diagram.id(cpt.child);
        check_parent_list(diagram, &mut report, id, cpt.child, &cpt.parents);
        if diagram.kind(cpt.child) != NodeKind::Random || !parent_has_frame(&cpt.parents) {
            continue;
        }
        let card = diagram.card(cpt.child);
        let expected = layout::size(&diagram.cards(&cpt.parents)) * card;
        if cpt.rows.len() != expected || card == 0 {
            report.push(
                Some(id),
                format!("cpt has {} entries, expected {expected}", cpt.rows.len()),
            );
            continue;
        }
        if let Some(bad) = cpt.rows.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            report.push(Some(id), format!("cpt entry {bad} outside [0, 1]"));
        }
        for (r, row) in cpt.rows.chunks(card).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                report.push(Some(id), format!("cpt row {r} sums to {sum} ≠ 1"));
            }
        }
    }

    for table in diagram.value_tables() {
        let id = diagram.id(table.node);
        check_parent_list(diagram, &mut report, id, table.node, &table.parents);
        if !parent_has_frame(&table.parents) {
            continue;
        }
        let expected = layout::size(&diagram.cards(&table.parents));
        if table.rows.len() != expected {
            report.push(
                Some(id),
                format!("value table has {} entries, expected {expected}", table.rows.len()),
            );
        }
        if table.rows.iter().any(|x| !x.is_finite()) {
            report.push(Some(id), "value table has a non-finite entry");
        }
    }

    if let Some(order) = diagram.declared_decision_order() {
        let declared: BTreeSet<_> = order.iter().copied().collect();
        let actual: BTreeSet<_> = diagram.decision_nodes().into_iter().collect();
        if declared.len() != order.len() || declared != actual {
            report.push(None, "decision_order is not a permutation of the decision nodes");
        }
    }

    report
}

fn check_parent_list(
    diagram: &InfluenceDiagram,
    report: &mut ValidationReport,
    id: &str,
    node: usize,
    listed: &[usize],
) {
    let set: BTreeSet<_> = listed.iter().copied().collect();
    if set.len() != listed.len() {
        report.push(Some(id), "table lists a parent twice");
    }
    if set.iter().copied().ne(diagram.parents(node).iter().copied()) {
        report.push(Some(id), "table parents differ from graph parents");
    }
}
