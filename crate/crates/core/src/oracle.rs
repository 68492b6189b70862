//! Brute-force ground truth.
//!
//! Everything here works on the full joint distribution and exhaustive policy
//! enumeration, and depends on nothing but the diagram types, so it cannot
//! share a bug with the section-wise solver it is used to check.

use crate::diagram::layout::{self, Assignments};
use crate::diagram::{decision_ordering, DecisionFunction, InfluenceDiagram, NodeIdx, NodeKind, Policy};
use crate::error::{Error, Result};

/// Default bound on the number of policies [`brute_force_optimal`] will try.
pub const DEFAULT_CAP: u128 = 10_000_000;

/// `P_δ` over all random and decision nodes, in ascending node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub vars: Vec<NodeIdx>,
    pub cards: Vec<usize>,
    pub table: Vec<f64>,
}

impl Joint {
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn total(&self) -> f64 {
        self.table.iter().sum()
    }
}

/// Flat row index of `node`'s table for a full assignment.
fn row_of(parents: &[NodeIdx], cards: &[usize], assignment: &[usize]) -> usize {
    parents
        .iter()
        .zip(cards)
        .fold(0, |acc, (&p, &c)| acc * c + assignment[p])
}

/// Per-node lookups, resolved once per diagram.
struct Tables<'a> {
    diagram: &'a InfluenceDiagram,
    /// random and decision nodes in topological order
    order: Vec<NodeIdx>,
    parent_cards: Vec<Vec<usize>>,
}

impl<'a> Tables<'a> {
    fn new(diagram: &'a InfluenceDiagram) -> Result<Self> {
        let order = diagram
            .topological_order()
            .ok_or_else(|| Error::Invalid("diagram has a cycle".into()))?
            .into_iter()
            .filter(|&v| diagram.kind(v) != NodeKind::Value)
            .collect();
        let parent_cards = (0..diagram.len()).map(|v| diagram.cards(diagram.parents(v))).collect();
        Ok(Tables {
            diagram,
            order,
            parent_cards,
        })
    }

    fn probability(&self, v: NodeIdx, assignment: &[usize]) -> f64 {
        let cpt = self.diagram.cpt(v).expect("random node has a cpt");
        let row = row_of(&cpt.parents, &self.parent_cards[v], assignment);
        cpt.rows[row * self.diagram.card(v) + assignment[v]]
    }

    fn choice(&self, f: &DecisionFunction, assignment: &[usize]) -> usize {
        f.table[row_of(&f.parents, &self.parent_cards[f.decision], assignment)]
    }

    fn utility(&self, assignment: &[usize]) -> f64 {
        self.diagram
            .value_tables()
            .iter()
            .map(|t| t.rows[row_of(&t.parents, &self.parent_cards[t.node], assignment)])
            .sum()
    }

    /// Σ over completions of `assignment` from position `pos` of
    /// `P_δ · Σ_v f_v`, skipping zero-probability branches.
    fn expectation(
        &self,
        functions: &[Option<&DecisionFunction>],
        pos: usize,
        mass: f64,
        assignment: &mut [usize],
    ) -> f64 {
        let Some(&v) = self.order.get(pos) else {
            return mass * self.utility(assignment);
        };
        match functions[v] {
            Some(f) => {
                assignment[v] = self.choice(f, assignment);
                self.expectation(functions, pos + 1, mass, assignment)
            }
            None => {
                let mut total = 0.0;
                for x in 0..self.diagram.card(v) {
                    assignment[v] = x;
                    let p = self.probability(v, assignment);
                    if p != 0.0 {
                        total += self.expectation(functions, pos + 1, mass * p, assignment);
                    }
                }
                total
            }
        }
    }
}

fn function_slots<'p>(diagram: &InfluenceDiagram, policy: &'p Policy) -> Vec<Option<&'p DecisionFunction>> {
    let mut slots = vec![None; diagram.len()];
    for f in &policy.functions {
        slots[f.decision] = Some(f);
    }
    slots
}

/// The joint distribution of Eq. `P_δ(C, D) = Π P(c | π_c) Π δ_d(π_d)`.
pub fn joint_distribution(diagram: &InfluenceDiagram, policy: &Policy) -> Result<Joint> {
    policy.check(diagram)?;
    let tables = Tables::new(diagram)?;
    let slots = function_slots(diagram, policy);
    let vars: Vec<NodeIdx> = (0..diagram.len())
        .filter(|&v| diagram.kind(v) != NodeKind::Value)
        .collect();
    let cards = diagram.cards(&vars);
    let mut assignment = vec![0; diagram.len()];
    let table = Assignments::new(&cards)
        .map(|config| {
            for (&v, &x) in vars.iter().zip(&config) {
                assignment[v] = x;
            }
            vars.iter()
                .map(|&v| match slots[v] {
                    Some(f) => f64::from(u8::from(tables.choice(f, &assignment) == assignment[v])),
                    None => tables.probability(v, &assignment),
                })
                .product()
        })
        .collect();
    Ok(Joint { vars, cards, table })
}

/// `Σ_v E_δ[v]`, the value of the diagram under `policy`.
pub fn expected_value(diagram: &InfluenceDiagram, policy: &Policy) -> Result<f64> {
    policy.check(diagram)?;
    let tables = Tables::new(diagram)?;
    let slots = function_slots(diagram, policy);
    Ok(tables.expectation(&slots, 0, 1.0, &mut vec![0; diagram.len()]))
}

/// Number of policies: `Π_d |Ω_d|^{|Ω_{π_d}|}`, saturating.
pub fn policy_count(diagram: &InfluenceDiagram) -> u128 {
    diagram.decision_nodes().iter().fold(1u128, |acc, &d| {
        let rows = layout::size(&diagram.cards(diagram.parents(d)));
        let per = u32::try_from(rows)
            .ok()
            .and_then(|r| (diagram.card(d) as u128).checked_pow(r))
            .unwrap_or(u128::MAX);
        acc.saturating_mul(per)
    })
}

/// Every policy, in lexicographic order of the concatenated decision tables
/// (decisions in regular order, rows in canonical order).
pub fn enumerate_policies(diagram: &InfluenceDiagram) -> Result<impl Iterator<Item = Policy>> {
    let order = decision_ordering(diagram)?;
    let shapes: Vec<(NodeIdx, Vec<NodeIdx>, usize)> = order
        .iter()
        .map(|&d| {
            let parents = diagram.parents(d).to_vec();
            let rows = layout::size(&diagram.cards(&parents));
            (d, parents, rows)
        })
        .collect();
    let digits: Vec<usize> = shapes
        .iter()
        .flat_map(|(d, _, rows)| std::iter::repeat_n(diagram.card(*d), *rows))
        .collect();
    Ok(Assignments::new(&digits).map(move |flat| {
        let mut rest = flat.as_slice();
        let functions = shapes
            .iter()
            .map(|(d, parents, rows)| {
                let (table, tail) = rest.split_at(*rows);
                rest = tail;
                DecisionFunction {
                    decision: *d,
                    parents: parents.clone(),
                    table: table.to_vec(),
                }
            })
            .collect();
        Policy { functions }
    }))
}

/// Exhaustive maximization of [`expected_value`]. The lexicographically
/// smallest policy wins ties.
pub fn brute_force_optimal(diagram: &InfluenceDiagram, cap: u128) -> Result<(f64, Policy)> {
    let count = policy_count(diagram);
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    let tables = Tables::new(diagram)?;
    let mut assignment = vec![0; diagram.len()];
    let mut best: Option<(f64, Policy)> = None;
    for policy in enumerate_policies(diagram)? {
        let slots = function_slots(diagram, &policy);
        let value = tables.expectation(&slots, 0, 1.0, &mut assignment);
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, policy));
        }
    }
    Ok(best.expect("at least one policy"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramBuilder;
    use crate::fixtures;

    fn constant(diagram: &InfluenceDiagram, choice: usize) -> Policy {
        let d = diagram.lookup("d").unwrap();
        let parents = diagram.parents(d).to_vec();
        let rows = layout::size(&diagram.cards(&parents));
        Policy {
            functions: vec![DecisionFunction {
                decision: d,
                parents,
                table: vec![choice; rows],
            }],
        }
    }

    #[test]
    fn umbrella_joint() {
        let d = fixtures::umbrella();
        let j = joint_distribution(&d, &constant(&d, 0)).unwrap();
        assert_eq!(j.vars, vec![0, 1]);
        assert_eq!(j.table, vec![0.3, 0.0, 0.7, 0.0]);
    }

    #[test]
    fn umbrella_values() {
        let d = fixtures::umbrella();
        assert_eq!(expected_value(&d, &constant(&d, 0)).unwrap(), 0.3);
        assert_eq!(expected_value(&d, &constant(&d, 1)).unwrap(), 0.7);
        let (v, p) = brute_force_optimal(&d, DEFAULT_CAP).unwrap();
        assert_eq!(v, 0.7);
        assert_eq!(p.functions[0].table, vec![1]);
    }

    #[test]
    fn observed_umbrella() {
        let d = fixtures::umbrella_observed();
        let (v, p) = brute_force_optimal(&d, DEFAULT_CAP).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(p.functions[0].table, vec![0, 1]);
    }

    #[test]
    fn independent_roots_factorize() {
        let d = DiagramBuilder::new()
            .random("a", &["0", "1"], &[], &[0.25, 0.75])
            .random("b", &["0", "1", "2"], &[], &[0.5, 0.3, 0.2])
            .build()
            .unwrap();
        let j = joint_distribution(&d, &Policy { functions: vec![] }).unwrap();
        for (i, x) in j.table.iter().enumerate() {
            let e = [0.25, 0.75][i / 3] * [0.5, 0.3, 0.2][i % 3];
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn value_nodes_add_up() {
        let two = DiagramBuilder::new()
            .random("w", &["rain", "sun"], &[], &[0.3, 0.7])
            .decision("d", &["take", "leave"], &[])
            .value("v", &["w", "d"], &[1.0, 0.0, 0.0, 1.0])
            .value("u", &["w"], &[-4.0, 2.0])
            .build()
            .unwrap();
        let p = constant(&two, 1);
        assert!((expected_value(&two, &p).unwrap() - (0.7 + (-1.2 + 1.4))).abs() < 1e-15);
    }

    #[test]
    fn wildcatter_joint_is_normalized_and_consistent() {
        let d = fixtures::wildcatter(4);
        let policies: Vec<_> = enumerate_policies(&d).unwrap().step_by(997).collect();
        assert!(!policies.is_empty());
        for p in &policies {
            let j = joint_distribution(&d, p).unwrap();
            assert!((j.total() - 1.0).abs() < 1e-9);
            // E[Σ v] from the materialized joint
            let mut assignment = vec![0; d.len()];
            let tables = Tables::new(&d).unwrap();
            let mut from_joint = 0.0;
            for (flat, &mass) in j.table.iter().enumerate() {
                let mut config = vec![0; j.vars.len()];
                layout::decode(flat, &j.cards, &mut config);
                for (&v, &x) in j.vars.iter().zip(&config) {
                    assignment[v] = x;
                }
                from_joint += mass * tables.utility(&assignment);
            }
            assert!((from_joint - expected_value(&d, p).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn optimum_dominates_and_cap_is_enforced() {
        let d = fixtures::wildcatter(5);
        let (best, _) = brute_force_optimal(&d, DEFAULT_CAP).unwrap();
        for p in enumerate_policies(&d).unwrap().step_by(101) {
            assert!(expected_value(&d, &p).unwrap() <= best + 1e-12);
        }
        assert!(matches!(brute_force_optimal(&d, 10), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn rejects_partial_policies() {
        let d = fixtures::umbrella();
        let bad = Policy { functions: vec![] };
        assert!(matches!(expected_value(&d, &bad), Err(Error::PolicyArityMismatch(_))));
    }
}
