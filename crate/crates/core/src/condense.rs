//! The condensed chain MDP of a smooth regular SDID.
//!
//! Stage `i` has the compound state `x_i` over `π_{d_i}` (lexicographic over
//! the frontier in ascending node order; a frontier-less stage has the single
//! state `◇`), the action `d_i`, the kernel `P(x_{i+1} | x_i, d_i)` and the
//! reward `f_i(x_i, d_i)`. Stage 0 is the constant `f_0` together with the
//! prior of `x_1`.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagram::{format, layout, Frame, InfluenceDiagram, NodeIdx};
use crate::error::{Error, Result};
use crate::graph::{extract_sections, Section};
use crate::inference::{local_value, section_conditional, section_prior, ConditionalTable};

const ROW_TOLERANCE: f64 = 1e-9;

/// One coordinate of a compound state, or a decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coord {
    pub id: String,
    pub node: NodeIdx,
    pub frame: Frame,
}

impl Coord {
    pub fn of(diagram: &InfluenceDiagram, node: NodeIdx) -> Self {
        Coord {
            id: diagram.id(node).to_string(),
            node,
            frame: diagram.frame(node).clone(),
        }
    }

    pub fn card(&self) -> usize {
        self.frame.len()
    }
}

fn cards(coords: &[Coord]) -> Vec<usize> {
    coords.iter().map(Coord::card).collect()
}

/// Number of configurations of a compound variable; 1 for `◇`.
pub fn state_size(coords: &[Coord]) -> usize {
    layout::size(&cards(coords))
}

/// A transition kernel into the compound state `targets`, one row per
/// conditioning configuration of the owning stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub targets: Vec<Coord>,
    pub table: Vec<f64>,
    /// Rows of zero mass replaced by the uniform distribution.
    pub uniform_rows: Vec<usize>,
}

impl Kernel {
    pub fn row_len(&self) -> usize {
        state_size(&self.targets)
    }

    pub fn rows(&self) -> usize {
        self.table.len() / self.row_len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.row_len();
        &self.table[r * n..(r + 1) * n]
    }

    pub(crate) fn from_conditional(diagram: &InfluenceDiagram, table: ConditionalTable) -> Self {
        Kernel {
            targets: table.targets.iter().map(|&v| Coord::of(diagram, v)).collect(),
            table: table.table,
            uniform_rows: table.uniform_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    /// `i`, from 1 to the number of decisions.
    pub index: usize,
    /// Index of the section this stage was computed from.
    pub section: usize,
    pub state: Vec<Coord>,
    pub decision: Coord,
    /// `P(x_{i+1} | x_i, d_i)`; absent at the last stage.
    pub kernel: Option<Kernel>,
    /// `f_i` over `Ω_{x_i} × Ω_{d_i}`.
    pub reward: Vec<f64>,
}

impl Stage {
    pub fn state_size(&self) -> usize {
        state_size(&self.state)
    }

    pub fn actions(&self) -> usize {
        self.decision.card()
    }

    pub fn reward(&self, x: usize, d: usize) -> f64 {
        self.reward[x * self.actions() + d]
    }

    pub fn transition(&self, x: usize, d: usize) -> Option<&[f64]> {
        self.kernel.as_ref().map(|k| k.row(x * self.actions() + d))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condensation {
    /// Content digest of the diagram this was condensed from.
    pub digest: String,
    /// `f_0`, the expected utility of the initial section.
    pub f0: f64,
    /// `P(x_1 | x_0 = ◇)`: a single row.
    pub initial: Kernel,
    pub stages: Vec<Stage>,
}

/// SHA-256 of the canonical serialization, in hex.
pub fn digest(diagram: &InfluenceDiagram) -> String {
    hex::encode(Sha256::digest(format::serialize(diagram).as_bytes()))
}

/// The stage-0 record of the condensation of `sections`.
pub(crate) fn initial_stage(diagram: &InfluenceDiagram, initial: &Section) -> Result<(f64, Kernel)> {
    let f0 = local_value(initial)?[0];
    let prior = section_prior(initial)?;
    let kernel = Kernel {
        targets: prior.vars().iter().map(|&v| Coord::of(diagram, v)).collect(),
        table: prior.into_table(),
        uniform_rows: Vec::new(),
    };
    Ok((f0, kernel))
}

/// Stage `section.index` of the condensation.
pub(crate) fn stage_of(diagram: &InfluenceDiagram, section: &Section) -> Result<Stage> {
    let decision = section
        .decision
        .ok_or_else(|| Error::Invalid("the initial section has no stage".into()))?;
    let kernel = match section.exit {
        Some(_) => Some(Kernel::from_conditional(diagram, section_conditional(section)?)),
        None => None,
    };
    Ok(Stage {
        index: section.index,
        section: section.index,
        state: section.entry.iter().map(|&v| Coord::of(diagram, v)).collect(),
        decision: Coord::of(diagram, decision),
        kernel,
        reward: local_value(section)?,
    })
}

/// Condenses a smooth regular stepwise-decomposable diagram.
pub fn condense(diagram: &InfluenceDiagram) -> Result<Condensation> {
    let sections = extract_sections(diagram)?;
    let (f0, initial) = initial_stage(diagram, &sections[0])?;
    let stages = sections[1..]
        .iter()
        .map(|s| stage_of(diagram, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(Condensation {
        digest: digest(diagram),
        f0,
        initial,
        stages,
    })
}

impl Condensation {
    /// Checks shapes, chaining and stochasticity.
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MalformedCondensation(msg));
        let first_state: &[Coord] = self.stages.first().map_or(&[], |s| &s.state);
        if self.initial.targets != first_state {
            return bad("initial kernel does not lead to the first stage's state".into());
        }
        check_kernel(&self.initial, 1, "initial")?;
        if !self.f0.is_finite() {
            return bad("f0 is not finite".into());
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.index != i + 1 {
                return bad(format!("stage {} is listed at position {}", stage.index, i + 1));
            }
            let rows = stage.state_size() * stage.actions();
            if stage.reward.len() != rows {
                return bad(format!(
                    "stage {} reward has {} entries, expected {rows}",
                    stage.index,
                    stage.reward.len()
                ));
            }
            if stage.reward.iter().any(|x| !x.is_finite()) {
                return bad(format!("stage {} reward is not finite", stage.index));
            }
            match (&stage.kernel, self.stages.get(i + 1)) {
                (None, None) => {}
                (Some(k), Some(next)) => {
                    if k.targets != next.state {
                        return bad(format!(
                            "stage {} kernel does not lead to stage {}",
                            stage.index, next.index
                        ));
                    }
                    check_kernel(k, rows, &format!("stage {}", stage.index))?;
                }
                (Some(_), None) => return bad("last stage has a kernel".into()),
                (None, Some(_)) => return bad(format!("stage {} has no kernel", stage.index)),
            }
        }
        Ok(())
    }
}

fn kernel_difference(a: &Kernel, b: &Kernel) -> Option<f64> {
    if a.targets != b.targets || a.table.len() != b.table.len() {
        return None;
    }
    Some(
        a.table
            .iter()
            .zip(&b.table)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
    )
}

/// Largest absolute difference between corresponding entries of two
/// condensations over the same coordinates; `None` when their shapes differ.
/// Digests are not compared.
pub fn max_difference(a: &Condensation, b: &Condensation) -> Option<f64> {
    if a.stages.len() != b.stages.len() {
        return None;
    }
    let mut worst = (a.f0 - b.f0).abs().max(kernel_difference(&a.initial, &b.initial)?);
    for (x, y) in a.stages.iter().zip(&b.stages) {
        if x.state != y.state || x.decision != y.decision || x.reward.len() != y.reward.len() {
            return None;
        }
        let kernel = match (&x.kernel, &y.kernel) {
            (None, None) => 0.0,
            (Some(p), Some(q)) => kernel_difference(p, q)?,
            _ => return None,
        };
        let reward = x
            .reward
            .iter()
            .zip(&y.reward)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max);
        worst = worst.max(kernel).max(reward);
    }
    Some(worst)
}

fn check_kernel(kernel: &Kernel, rows: usize, what: &str) -> Result<()> {
    let n = kernel.row_len();
    if kernel.table.len() != rows * n {
        return Err(Error::MalformedCondensation(format!(
            "{what} kernel has {} entries, expected {}",
            kernel.table.len(),
            rows * n
        )));
    }
    for r in 0..rows {
        let sum: f64 = kernel.row(r).iter().sum();
        if (sum - 1.0).abs() > ROW_TOLERANCE
            || kernel
                .row(r)
                .iter()
                .any(|p| !(-ROW_TOLERANCE..=1.0 + ROW_TOLERANCE).contains(p))
        {
            return Err(Error::MalformedCondensation(format!(
                "{what} kernel row {r} is not a distribution"
            )));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    targets: Vec<Coord>,
    rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    uniform_rows: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageFile {
    index: usize,
    section: usize,
    state_vars: Vec<Coord>,
    decision: Coord,
    kernel: Option<KernelFile>,
    /// one row per state configuration, one entry per decision value
    reward: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CondensationFile {
    digest: String,
    f0: f64,
    initial: KernelFile,
    stages: Vec<StageFile>,
}

impl From<&Kernel> for KernelFile {
    fn from(k: &Kernel) -> Self {
        KernelFile {
            targets: k.targets.clone(),
            rows: k.table.chunks(k.row_len()).map(<[f64]>::to_vec).collect(),
            uniform_rows: k.uniform_rows.clone(),
        }
    }
}

impl From<KernelFile> for Kernel {
    fn from(k: KernelFile) -> Self {
        Kernel {
            targets: k.targets,
            table: k.rows.concat(),
            uniform_rows: k.uniform_rows,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json(c: &Condensation) -> String {
    let file = CondensationFile {
        digest: c.digest.clone(),
        f0: c.f0,
        initial: (&c.initial).into(),
        stages: c
            .stages
            .iter()
            .map(|s| StageFile {
                index: s.index,
                section: s.section,
                state_vars: s.state.clone(),
                decision: s.decision.clone(),
                kernel: s.kernel.as_ref().map(Into::into),
                reward: s.reward.chunks(s.actions()).map(<[f64]>::to_vec).collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("serializable");
    out.push('\n');
    out
}

/// Parses and checks a condensation file.
pub fn from_json(text: &str) -> Result<Condensation> {
    let file: CondensationFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let c = Condensation {
        digest: file.digest,
        f0: file.f0,
        initial: file.initial.into(),
        stages: file
            .stages
            .into_iter()
            .map(|s| Stage {
                index: s.index,
                section: s.section,
                state: s.state_vars,
                decision: s.decision,
                kernel: s.kernel.map(Into::into),
                reward: s.reward.concat(),
            })
            .collect(),
    };
    c.check()?;
    Ok(c)
}
