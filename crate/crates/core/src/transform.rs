//! Equivalence-preserving rewrites: arc reversal, smoothing, turning a random
//! node into a root, and vacuous value-parent padding.

use std::collections::BTreeSet;

use crate::diagram::{Cpt, InfluenceDiagram, NodeIdx, NodeKind, ValueTable};
use crate::error::{Error, Result};
use crate::factor::Factor;
use crate::graph::{self, Section};

const MAX_REVERSALS: usize = 10_000;

fn require_random(diagram: &InfluenceDiagram, v: NodeIdx) -> Result<()> {
    if diagram.kind(v) == NodeKind::Random {
        Ok(())
    } else {
        Err(Error::NotRandom(diagram.id(v).to_string()))
    }
}

/// True if some directed path other than the arc itself leads from `a` to `b`.
fn has_indirect_path(diagram: &InfluenceDiagram, a: NodeIdx, b: NodeIdx) -> bool {
    diagram
        .children(a)
        .iter()
        .filter(|&&x| x != b)
        .any(|&x| diagram.descendants(x).contains(&b))
}

/// Reverses the arc `a → b` between two random nodes.
///
/// Afterwards `b` has parents `π_a ∪ π_b \ {a}` and `a` has parents
/// `π_a ∪ π_b ∪ {b} \ {a}`; the joint distribution of the random nodes given
/// the decisions is unchanged. Conditioning configurations of zero
/// probability get a uniform row for `a`.
pub fn reverse_arc(diagram: &InfluenceDiagram, a: NodeIdx, b: NodeIdx) -> Result<InfluenceDiagram> {
    require_random(diagram, a)?;
    require_random(diagram, b)?;
    if !diagram.has_arc(a, b) {
        return Err(Error::Invalid(format!("no arc {} -> {}", diagram.id(a), diagram.id(b))));
    }
    if has_indirect_path(diagram, a, b) {
        return Err(Error::CycleWouldForm {
            from: diagram.id(a).to_string(),
            to: diagram.id(b).to_string(),
        });
    }
    let cpt_a = diagram
        .cpt(a)
        .ok_or_else(|| Error::Invalid(format!("`{}` has no cpt", diagram.id(a))))?;
    let cpt_b = diagram
        .cpt(b)
        .ok_or_else(|| Error::Invalid(format!("`{}` has no cpt", diagram.id(b))))?;

    let union: BTreeSet<NodeIdx> = diagram.parents(a).iter().chain(diagram.parents(b)).copied().collect();
    let new_b_parents: Vec<NodeIdx> = union.iter().copied().filter(|&p| p != a).collect();
    let mut new_a_parents = new_b_parents.clone();
    new_a_parents.push(b);
    new_a_parents.sort_unstable();

    let card = |v: NodeIdx| diagram.card(v);
    let joint = Factor::from_cpt(cpt_a, card)?.multiply(&Factor::from_cpt(cpt_b, card)?)?;
    let marginal_b = joint.marginalize(&BTreeSet::from([a]));

    let mut b_order = new_b_parents.clone();
    b_order.push(b);
    let b_rows = marginal_b.reorder(&b_order)?.into_table();

    let mut a_order = new_a_parents.clone();
    a_order.push(a);
    let joint_sorted = joint.reorder(&a_order)?;
    let card_a = card(a);
    // P(a | π'_a) = joint / P(b | π'_b); rows of the joint in a_order are
    // already grouped by the conditioning configuration
    let denominators = marginal_b.reorder(&a_order[..a_order.len() - 1])?.into_table();
    let mut a_rows = Vec::with_capacity(joint_sorted.table().len());
    for (row, &denom) in joint_sorted.table().chunks(card_a).zip(&denominators) {
        if denom > 0.0 {
            a_rows.extend(row.iter().map(|x| x / denom));
        } else {
            a_rows.extend(std::iter::repeat_n(1.0 / card_a as f64, card_a));
        }
    }

    let mut arcs: Vec<(NodeIdx, NodeIdx)> = diagram
        .arcs()
        .iter()
        .map(|&arc| if arc == (a, b) { (b, a) } else { arc })
        .collect();
    for &p in &new_a_parents {
        if p != b && !diagram.has_arc(p, a) {
            arcs.push((p, a));
        }
    }
    for &p in &new_b_parents {
        if !diagram.has_arc(p, b) {
            arcs.push((p, b));
        }
    }
    let cpts = diagram
        .cpts()
        .iter()
        .map(|c| match c.child {
            x if x == a => Cpt {
                child: a,
                parents: new_a_parents.clone(),
                rows: a_rows.clone(),
            },
            x if x == b => Cpt {
                child: b,
                parents: new_b_parents.clone(),
                rows: b_rows.clone(),
            },
            _ => c.clone(),
        })
        .collect();
    diagram.with_structure(arcs, cpts, diagram.value_tables().to_vec())
}

/// Arc reversals until the diagram is smooth at every decision.
///
/// Decisions are visited in reverse regular order; at a non-smooth decision
/// the offending arc whose tail is latest in the input's topological order is
/// reversed (earliest head on ties, skipping arcs that cannot be reversed),
/// and the scan restarts. A smooth input is returned unchanged.
pub fn smooth(diagram: &InfluenceDiagram) -> Result<InfluenceDiagram> {
    if !graph::is_stepwise_decomposable(diagram)? {
        return Err(Error::NotSdid(
            "cannot smooth a diagram that is not stepwise-decomposable".into(),
        ));
    }
    let topo = diagram
        .topological_order()
        .ok_or_else(|| Error::Invalid("diagram has a cycle".into()))?;
    let mut rank = vec![0; diagram.len()];
    for (i, &v) in topo.iter().enumerate() {
        rank[v] = i;
    }
    let order = crate::diagram::decision_ordering(diagram)?;

    let mut current = diagram.clone();
    for _ in 0..MAX_REVERSALS {
        let Some((d, mut offending)) = order.iter().rev().find_map(|&d| {
            let arcs = graph::offending_arcs(&current, d);
            (!arcs.is_empty()).then_some((d, arcs))
        }) else {
            if !graph::is_stepwise_decomposable(&current)? {
                return Err(Error::NotSdid("smoothing broke stepwise-decomposability".into()));
            }
            return Ok(current);
        };
        offending.sort_by_key(|&(tail, head)| (std::cmp::Reverse(rank[tail]), rank[head]));
        let next = offending
            .iter()
            .find_map(|&(tail, head)| reverse_arc(&current, tail, head).ok());
        current = next.ok_or_else(|| Error::NotSmooth(current.id(d).to_string()))?;
    }
    Err(Error::Invalid("smoothing did not terminate".into()))
}

/// Reverses arcs into `c` until it has no parents. Every ancestor of `c`
/// must be random.
pub fn make_root(diagram: &InfluenceDiagram, c: NodeIdx) -> Result<InfluenceDiagram> {
    require_random(diagram, c)?;
    if let Some(&d) = diagram
        .ancestors(c)
        .iter()
        .find(|&&v| diagram.kind(v) != NodeKind::Random)
    {
        return Err(Error::NotRootable {
            node: diagram.id(c).to_string(),
            reason: format!("it descends from decision `{}`", diagram.id(d)),
        });
    }
    let mut current = diagram.clone();
    while !current.parents(c).is_empty() {
        // the parent latest in topological order has no other path into c
        let topo = current.topological_order().expect("acyclic");
        let parent = *current
            .parents(c)
            .iter()
            .max_by_key(|&&p| topo.iter().position(|&x| x == p))
            .expect("has parents");
        current = reverse_arc(&current, parent, c)?;
    }
    Ok(current)
}

/// Makes `d` a parent of every value node of `section`, with a utility that
/// ignores the new coordinate.
pub fn pad_value_parents(diagram: &InfluenceDiagram, d: NodeIdx, section: &Section) -> Result<InfluenceDiagram> {
    if diagram.kind(d) != NodeKind::Decision {
        return Err(Error::NotDecision(diagram.id(d).to_string()));
    }
    let targets: BTreeSet<NodeIdx> = section
        .value_nodes()
        .into_iter()
        .filter(|&v| !diagram.has_arc(d, v))
        .collect();
    if targets.is_empty() {
        return Ok(diagram.clone());
    }
    let card = diagram.card(d);
    let mut arcs = diagram.arcs().to_vec();
    arcs.extend(targets.iter().map(|&v| (d, v)));
    let values = diagram
        .value_tables()
        .iter()
        .map(|t| {
            if !targets.contains(&t.node) {
                return t.clone();
            }
            let mut parents = t.parents.clone();
            parents.push(d);
            ValueTable {
                node: t.node,
                parents,
                rows: t.rows.iter().flat_map(|&x| std::iter::repeat_n(x, card)).collect(),
            }
        })
        .collect();
    diagram.with_structure(arcs, diagram.cpts().to_vec(), values)
}
