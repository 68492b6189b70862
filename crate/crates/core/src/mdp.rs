//! Finite-horizon backward induction over a condensation.

use serde::{Deserialize, Serialize};

use crate::condense::{Condensation, Stage};
use crate::diagram::{layout, DecisionFunction, InfluenceDiagram, Policy};
use crate::error::{Error, Result};

/// `V_i` over `Ω_{x_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageValue {
    pub stage: usize,
    pub values: Vec<f64>,
}

/// The decision taken in each state of one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePolicy {
    pub stage: usize,
    pub decision: String,
    /// Frame index per state configuration, canonical order.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CondensedPolicy {
    pub stages: Vec<StagePolicy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub value: f64,
    pub policy: CondensedPolicy,
    pub values: Vec<StageValue>,
}

fn expectation(row: &[f64], next: &[f64]) -> f64 {
    row.iter().zip(next).map(|(p, v)| p * v).sum()
}

fn transition(stage: &Stage, x: usize, d: usize) -> Result<Option<&[f64]>> {
    let Some(k) = &stage.kernel else { return Ok(None) };
    let r = x * stage.actions() + d;
    if (r + 1) * k.row_len() > k.table.len() {
        return Err(Error::MalformedCondensation(format!(
            "stage {} kernel is too short",
            stage.index
        )));
    }
    Ok(Some(k.row(r)))
}

/// Optimal value, policy and value functions. Ties go to the smallest
/// decision index.
pub fn backward_induction(c: &Condensation) -> Result<Solution> {
    c.check()?;
    let mut next: Vec<f64> = vec![0.0];
    let mut values = Vec::with_capacity(c.stages.len());
    let mut policies = Vec::with_capacity(c.stages.len());
    for stage in c.stages.iter().rev() {
        let mut v = Vec::with_capacity(stage.state_size());
        let mut choice = Vec::with_capacity(stage.state_size());
        for x in 0..stage.state_size() {
            let mut best = (f64::NEG_INFINITY, 0);
            for d in 0..stage.actions() {
                let future = match transition(stage, x, d)? {
                    Some(row) => expectation(row, &next),
                    None => 0.0,
                };
                let q = stage.reward(x, d) + future;
                if q > best.0 {
                    best = (q, d);
                }
            }
            v.push(best.0);
            choice.push(best.1);
        }
        policies.push(StagePolicy {
            stage: stage.index,
            decision: stage.decision.id.clone(),
            rows: choice,
        });
        values.push(StageValue {
            stage: stage.index,
            values: v.clone(),
        });
        next = v;
    }
    policies.reverse();
    values.reverse();
    let value = c.f0 + expectation(c.initial.row(0), &next);
    Ok(Solution {
        value,
        policy: CondensedPolicy { stages: policies },
        values,
    })
}

fn check_policy(c: &Condensation, p: &CondensedPolicy) -> Result<()> {
    let fits = p.stages.len() == c.stages.len()
        && p.stages.iter().zip(&c.stages).all(|(sp, s)| {
            sp.stage == s.index
                && sp.decision == s.decision.id
                && sp.rows.len() == s.state_size()
                && sp.rows.iter().all(|&d| d < s.actions())
        });
    if fits {
        Ok(())
    } else {
        Err(Error::MalformedCondensation(
            "policy does not fit the condensation".into(),
        ))
    }
}

/// Expected total reward of `p`, by pushing the state distribution forward.
pub fn evaluate_policy(c: &Condensation, p: &CondensedPolicy) -> Result<f64> {
    c.check()?;
    check_policy(c, p)?;
    let mut mass = c.initial.row(0).to_vec();
    let mut total = c.f0;
    for (stage, sp) in c.stages.iter().zip(&p.stages) {
        let mut next = vec![0.0; stage.kernel.as_ref().map_or(0, |k| k.row_len())];
        for (x, &m) in mass.iter().enumerate() {
            let d = sp.rows[x];
            total += m * stage.reward(x, d);
            if let Some(row) = transition(stage, x, d)? {
                for (n, p) in next.iter_mut().zip(row) {
                    *n += m * p;
                }
            }
        }
        mass = next;
    }
    Ok(total)
}

/// Reads the condensed policy as decision functions of `diagram`, through
/// the correspondence `x_i ↔ π_{d_i}`.
pub fn to_policy(c: &Condensation, p: &CondensedPolicy, diagram: &InfluenceDiagram) -> Result<Policy> {
    check_policy(c, p)?;
    let functions = c
        .stages
        .iter()
        .zip(&p.stages)
        .map(|(stage, sp)| {
            let decision = diagram.lookup(&stage.decision.id)?;
            let parents = stage
                .state
                .iter()
                .map(|x| diagram.lookup(&x.id))
                .collect::<Result<Vec<_>>>()?;
            Ok(DecisionFunction {
                decision,
                parents,
                table: sp.rows.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let policy = Policy { functions };
    policy.check(diagram)?;
    Ok(policy)
}

/// Policy rows with frame labels, for output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelledStagePolicy {
    pub stage: usize,
    pub decision: String,
    pub rows: Vec<String>,
}

pub fn labelled(c: &Condensation, p: &CondensedPolicy) -> Vec<LabelledStagePolicy> {
    c.stages
        .iter()
        .zip(&p.stages)
        .map(|(stage, sp)| LabelledStagePolicy {
            stage: sp.stage,
            decision: sp.decision.clone(),
            rows: sp
                .rows
                .iter()
                .map(|&d| stage.decision.frame.label(d).to_string())
                .collect(),
        })
        .collect()
}

/// The same labelled form for a diagram policy, stages in regular order.
pub fn labelled_policy(diagram: &InfluenceDiagram, policy: &Policy) -> Vec<LabelledStagePolicy> {
    policy
        .functions
        .iter()
        .enumerate()
        .map(|(i, f)| LabelledStagePolicy {
            stage: i + 1,
            decision: diagram.id(f.decision).to_string(),
            rows: f
                .table
                .iter()
                .map(|&d| diagram.frame(f.decision).label(d).to_string())
                .collect(),
        })
        .collect()
}

/// Every condensed policy, for exhaustive checks on small chains.
pub fn enumerate(c: &Condensation) -> impl Iterator<Item = CondensedPolicy> + '_ {
    let digits: Vec<usize> = c
        .stages
        .iter()
        .flat_map(|s| std::iter::repeat_n(s.actions(), s.state_size()))
        .collect();
    layout::Assignments::new(&digits).map(move |flat| {
        let mut rest = flat.as_slice();
        CondensedPolicy {
            stages: c
                .stages
                .iter()
                .map(|s| {
                    let (rows, tail) = rest.split_at(s.state_size());
                    rest = tail;
                    StagePolicy {
                        stage: s.index,
                        decision: s.decision.id.clone(),
                        rows: rows.to_vec(),
                    }
                })
                .collect(),
        }
    })
}
