//! Exact inference inside a section: the conditional of the exit frontier
//! given the entry frontier and decision, the prior of the first frontier,
//! and conditional expectations of value nodes.
//!
//! Entry-frontier nodes and the section's decision carry no table, so the
//! product of the remaining CPTs is already a conditional given them.

use crate::diagram::layout::{self, Assignments};
use crate::diagram::NodeIdx;
use crate::error::Result;
use crate::factor::{eliminate, Factor};
use crate::graph::Section;

/// `P(targets | conditioners)`, one row per conditioner configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    pub targets: Vec<NodeIdx>,
    pub target_cards: Vec<usize>,
    pub conditioners: Vec<NodeIdx>,
    pub conditioner_cards: Vec<usize>,
    pub table: Vec<f64>,
    /// Rows with zero mass, replaced by the uniform distribution.
    pub uniform_rows: Vec<usize>,
}

impl ConditionalTable {
    pub fn row_len(&self) -> usize {
        layout::size(&self.target_cards)
    }

    pub fn rows(&self) -> usize {
        layout::size(&self.conditioner_cards)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.row_len();
        &self.table[r * n..(r + 1) * n]
    }

    /// Replaces zero-mass rows by uniform rows and records them.
    pub(crate) fn patch_zero_rows(&mut self) {
        let n = self.row_len();
        for r in 0..self.rows() {
            let row = &mut self.table[r * n..(r + 1) * n];
            if row.iter().sum::<f64>() <= 0.0 {
                row.fill(1.0 / n as f64);
                self.uniform_rows.push(r);
            }
        }
    }
}

fn section_factors(section: &Section) -> Result<Vec<Factor>> {
    section
        .cpts
        .iter()
        .map(|c| Factor::from_cpt(c, |v| section.card(v)))
        .collect()
}

fn with_cards(section: &Section, vars: &[NodeIdx]) -> Vec<(NodeIdx, usize)> {
    vars.iter().map(|&v| (v, section.card(v))).collect()
}

/// `P(exit | entry, decision)` for a section with an exit frontier. Exit
/// nodes that are also conditioners are copied through deterministically.
pub fn section_conditional(section: &Section) -> Result<ConditionalTable> {
    let conditioners = section.conditioners();
    let targets = section.exit.clone().unwrap_or_default();
    let free: Vec<NodeIdx> = targets.iter().copied().filter(|t| !conditioners.contains(t)).collect();
    let mut keep = conditioners.clone();
    keep.extend(&free);
    let joint = eliminate(section_factors(section)?, &with_cards(section, &keep))?;

    let conditioner_cards = section.cards_of(&conditioners);
    let target_cards = section.cards_of(&targets);
    let free_cards = section.cards_of(&free);
    // for each target: Ok(position among conditioners) or Err(position among free)
    let source: Vec<std::result::Result<usize, usize>> = targets
        .iter()
        .map(|t| match conditioners.iter().position(|c| c == t) {
            Some(i) => Ok(i),
            None => Err(free.iter().position(|f| f == t).expect("free target")),
        })
        .collect();

    let mut table = Vec::with_capacity(layout::size(&conditioner_cards) * layout::size(&target_cards));
    let mut free_assignment = vec![0; free.len()];
    for cond in Assignments::new(&conditioner_cards) {
        let base = layout::index(&cond, &conditioner_cards) * layout::size(&free_cards);
        for target in Assignments::new(&target_cards) {
            let mut consistent = true;
            for (value, src) in target.iter().zip(&source) {
                match *src {
                    Ok(ci) => consistent &= cond[ci] == *value,
                    Err(fi) => free_assignment[fi] = *value,
                }
            }
            table.push(if consistent {
                joint.table()[base + layout::index(&free_assignment, &free_cards)]
            } else {
                0.0
            });
        }
    }
    let mut out = ConditionalTable {
        targets,
        target_cards,
        conditioners,
        conditioner_cards,
        table,
        uniform_rows: Vec::new(),
    };
    out.patch_zero_rows();
    Ok(out)
}

/// `P(π_{d_1})` in the initial section; the unit factor when the first
/// decision has no parents or there are no decisions.
pub fn section_prior(initial: &Section) -> Result<Factor> {
    let targets = initial.exit.clone().unwrap_or_default();
    if targets.is_empty() {
        return Ok(Factor::unit());
    }
    eliminate(section_factors(initial)?, &with_cards(initial, &targets))
}

/// Conditional expectation of value node `v` given the section's entry
/// frontier and decision, laid out over `entry ++ [decision]`.
pub fn value_projection(section: &Section, v: NodeIdx) -> Result<Vec<f64>> {
    let table =
        section.values.iter().find(|t| t.node == v).ok_or_else(|| {
            crate::error::Error::Invalid(format!("value node {v} is not in section {}", section.index))
        })?;
    let conditioners = section.conditioners();
    let free: Vec<NodeIdx> = table
        .parents
        .iter()
        .copied()
        .filter(|p| !conditioners.contains(p))
        .collect();
    let conditioner_cards = section.cards_of(&conditioners);
    let parent_cards = section.cards_of(&table.parents);
    let mut out = vec![0.0; layout::size(&conditioner_cards)];

    if free.is_empty() {
        // utility depends only on conditioning coordinates: re-index
        let pos: Vec<usize> = table
            .parents
            .iter()
            .map(|p| conditioners.iter().position(|c| c == p).expect("conditioner"))
            .collect();
        let mut parent_assignment = vec![0; pos.len()];
        for (slot, cond) in out.iter_mut().zip(Assignments::new(&conditioner_cards)) {
            for (a, &i) in parent_assignment.iter_mut().zip(&pos) {
                *a = cond[i];
            }
            *slot = table.rows[layout::index(&parent_assignment, &parent_cards)];
        }
        return Ok(out);
    }

    let mut keep = conditioners.clone();
    keep.extend(&free);
    let joint = eliminate(section_factors(section)?, &with_cards(section, &keep))?;
    let n_cond = conditioners.len();
    let pos: Vec<usize> = table
        .parents
        .iter()
        .map(|p| keep.iter().position(|k| k == p).expect("kept"))
        .collect();
    let keep_cards = joint.cards().to_vec();
    let free_size = layout::size(&keep_cards[n_cond..]);
    let mut parent_assignment = vec![0; pos.len()];
    for (flat, a) in Assignments::new(&keep_cards).enumerate() {
        for (slot, &i) in parent_assignment.iter_mut().zip(&pos) {
            *slot = a[i];
        }
        out[flat / free_size] += joint.table()[flat] * table.rows[layout::index(&parent_assignment, &parent_cards)];
    }
    Ok(out)
}

/// Elimination runs needed for the section's kernel (or prior).
pub fn kernel_eliminations(section: &Section) -> usize {
    match &section.exit {
        Some(exit) if section.is_initial() => usize::from(!exit.is_empty()),
        Some(_) => 1,
        None => 0,
    }
}

/// Elimination runs needed for the section's local value function.
pub fn reward_eliminations(section: &Section) -> usize {
    let conditioners = section.conditioners();
    section
        .values
        .iter()
        .filter(|t| t.parents.iter().any(|p| !conditioners.contains(p)))
        .count()
}

/// Sum of the section's value projections; all zeros without value nodes.
pub fn local_value(section: &Section) -> Result<Vec<f64>> {
    let mut total = vec![0.0; layout::size(&section.cards_of(&section.conditioners()))];
    for v in section.value_nodes() {
        for (t, x) in total.iter_mut().zip(value_projection(section, v)?) {
            *t += x;
        }
    }
    Ok(total)
}
