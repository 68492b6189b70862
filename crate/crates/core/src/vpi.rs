//! Value of perfect information, with incremental condensation of the
//! modified diagram.
//!
//! A query `(c, d_s)` asks what observing the random node `c` before `d_s`
//! (and every later decision) is worth. The modified diagram differs from the
//! original only by arcs out of `c`, so most of its condensation can be taken
//! from the original's:
//!
//! * stages whose section is unaffected are copied;
//! * the stage whose exit frontier gains `c` multiplies its kernel by `P(c)`;
//! * stages that carry `c` through both frontiers re-index their tables;
//! * the stage where `c` stops being carried renormalizes its kernel when
//!   `c` was already in its exit frontier, and keeps its reward when every
//!   value node there depends only on the conditioning coordinates.
//!
//! Everything else is recomputed by inference on the modified section.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::condense::{self, initial_stage, Condensation, Coord, Kernel, Stage};
use crate::diagram::layout::{self, Assignments};
use crate::diagram::{decision_ordering, InfluenceDiagram, NodeIdx, NodeKind};
use crate::error::{Error, Result};
use crate::graph::{self, Section};
use crate::inference::{self, local_value, section_conditional};
use crate::mdp::backward_induction;
use crate::transform;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpiQuery {
    pub c: String,
    pub d_s: String,
}

impl VpiQuery {
    pub fn new(c: &str, d_s: &str) -> Self {
        VpiQuery {
            c: c.to_string(),
            d_s: d_s.to_string(),
        }
    }
}

/// How a stage of the modified condensation was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageTag {
    /// Copied bit for bit.
    Unchanged,
    /// Kernel multiplied by `P(c)`; reward copied.
    Entry,
    /// Kernel and reward re-indexed with `c` carried through.
    Middle,
    /// `c` joins the conditioning only; kernel and reward derived without
    /// inference.
    ExitReused,
    /// As above, but the kernel or reward needed inference.
    ExitRecomputed,
    /// The section changed in a way none of the cases covers.
    Recomputed,
}

impl StageTag {
    pub fn is_reused(self) -> bool {
        matches!(
            self,
            StageTag::Unchanged | StageTag::Entry | StageTag::Middle | StageTag::ExitReused
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub eliminations_performed: usize,
    pub eliminations_saved: usize,
    pub entries_copied: usize,
    pub entries_computed: usize,
}

impl std::ops::AddAssign for Counters {
    fn add_assign(&mut self, o: Counters) {
        self.eliminations_performed += o.eliminations_performed;
        self.eliminations_saved += o.eliminations_saved;
        self.entries_copied += o.entries_copied;
        self.entries_computed += o.entries_computed;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    /// Stage (equivalently section) index; 0 is the initial stage.
    pub stage: usize,
    pub tag: StageTag,
    #[serde(flatten)]
    pub counters: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `c` is upstream of `π_{d_s}`: nothing to gain, nothing condensed.
    Shortcut,
    Incremental,
    /// `c` could not be made a root; the modified diagram was condensed
    /// from scratch.
    Scratch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpiReport {
    pub c: String,
    pub d_s: String,
    pub vpi: f64,
    pub original: f64,
    pub modified: f64,
    pub s: usize,
    pub t: usize,
    pub mode: Mode,
    /// Whether the base condensation came from the cache.
    pub cached: bool,
    pub stages: Vec<StageReport>,
    pub counters: Counters,
}

impl VpiReport {
    pub fn reused_stages(&self) -> usize {
        self.stages.iter().filter(|s| s.tag.is_reused()).count()
    }

    pub fn recomputed_stages(&self) -> usize {
        self.stages.len() - self.reused_stages()
    }
}

/// Condensations keyed by the digest of the diagram they came from.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    entries: BTreeMap<String, Condensation>,
}

impl Cache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, c: Condensation) {
        self.entries.insert(c.digest.clone(), c);
    }

    pub fn get(&self, digest: &str) -> Option<&Condensation> {
        self.entries.get(digest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn condensations(&self) -> impl Iterator<Item = &Condensation> {
        self.entries.values()
    }

    /// The condensation of `diagram` and whether it was already cached.
    pub fn condense(&mut self, diagram: &InfluenceDiagram) -> Result<(Condensation, bool)> {
        let digest = condense::digest(diagram);
        if let Some(c) = self.entries.get(&digest) {
            return Ok((c.clone(), true));
        }
        let c = condense::condense(diagram)?;
        self.insert(c.clone());
        Ok((c, false))
    }
}

struct Resolved {
    c: NodeIdx,
    s: usize,
    order: Vec<NodeIdx>,
}

fn resolve(diagram: &InfluenceDiagram, q: &VpiQuery) -> Result<Resolved> {
    let c = diagram.lookup(&q.c)?;
    let d_s = diagram.lookup(&q.d_s)?;
    if diagram.kind(c) != NodeKind::Random {
        return Err(Error::NotRandom(q.c.clone()));
    }
    if diagram.kind(d_s) != NodeKind::Decision {
        return Err(Error::NotDecision(q.d_s.clone()));
    }
    if diagram.has_arc(c, d_s) {
        return Err(Error::InvalidQuery(format!(
            "`{}` is already observed at `{}`",
            q.c, q.d_s
        )));
    }
    let order = decision_ordering(diagram)?;
    let s = order.iter().position(|&d| d == d_s).expect("decision is ordered") + 1;
    for &d in &order[s - 1..] {
        if diagram.descendants(d).contains(&c) {
            return Err(Error::CycleWouldForm {
                from: q.c.clone(),
                to: diagram.id(d).to_string(),
            });
        }
    }
    Ok(Resolved { c, s, order })
}

fn t_of(sections: &[Section], c: NodeIdx) -> usize {
    let k = sections.len() - 1;
    let member: Vec<usize> = sections
        .iter()
        .filter(|s| s.members().contains(&c))
        .map(|s| s.index)
        .collect();
    match member.iter().copied().filter(|&i| i < k).max() {
        None => k + 1,
        Some(0) if member.len() == 1 => 0,
        Some(i) => i + 1,
    }
}

/// Index of the last decision `d_t` with `c` in the section `I(d_{t-1}, d_t)`;
/// `k + 1` when `c` lies only in the terminal section and `0` when it lies
/// only in the initial one.
pub fn find_t(diagram: &InfluenceDiagram, c: NodeIdx) -> Result<usize> {
    Ok(t_of(&graph::extract_sections(diagram)?, c))
}

fn add_observation_arcs(diagram: &InfluenceDiagram, c: NodeIdx, decisions: &[NodeIdx]) -> Result<InfluenceDiagram> {
    let mut arcs = diagram.arcs().to_vec();
    for &d in decisions {
        if diagram.has_arc(c, d) {
            continue;
        }
        if diagram.descendants(d).contains(&c) {
            return Err(Error::CycleWouldForm {
                from: diagram.id(c).to_string(),
                to: diagram.id(d).to_string(),
            });
        }
        arcs.push((c, d));
    }
    diagram.with_structure(arcs, diagram.cpts().to_vec(), diagram.value_tables().to_vec())
}

/// The diagram with `c` observed at `d_s, …, d_t`. Arcs from `c` to later
/// decisions are left out: `c` is upstream of their parent frontiers, so
/// they cannot change the optimal value.
pub fn build_modified(diagram: &InfluenceDiagram, q: &VpiQuery) -> Result<InfluenceDiagram> {
    let r = resolve(diagram, q)?;
    let t = find_t(diagram, r.c)?;
    let end = t.min(r.order.len()).max(r.s - 1);
    add_observation_arcs(diagram, r.c, &r.order[r.s - 1..end])
}

/// The diagram with `c` observed at `d_s` and every later decision, as the
/// query is defined; no arcs are pruned.
pub fn full_modified(diagram: &InfluenceDiagram, q: &VpiQuery) -> Result<InfluenceDiagram> {
    let r = resolve(diagram, q)?;
    add_observation_arcs(diagram, r.c, &r.order[r.s - 1..])
}

/// A smooth diagram rewritten so the case analysis applies: `c` is a root
/// and `d_{t-1}` is a parent of every value node in `I(d_{t-1}, d_t)`.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub diagram: InfluenceDiagram,
    pub c: NodeIdx,
    pub s: usize,
    pub t: usize,
}

fn check_decomposable(diagram: &InfluenceDiagram) -> Result<()> {
    if !graph::is_stepwise_decomposable(diagram)? {
        return Err(Error::NotSdid("rewriting broke stepwise-decomposability".into()));
    }
    if let Some(d) = graph::first_non_smooth(diagram)? {
        return Err(Error::NotSmooth(diagram.id(d).to_string()));
    }
    Ok(())
}

/// Makes `c` a root, then pads value parents at `I(d_{t-1}, d_t)`.
pub fn prepare(smooth: &InfluenceDiagram, q: &VpiQuery) -> Result<Prepared> {
    let r = resolve(smooth, q)?;
    let rooted = transform::make_root(smooth, r.c)?;
    check_decomposable(&rooted)?;
    let sections = graph::extract_sections(&rooted)?;
    let t = t_of(&sections, r.c);
    let diagram = if t >= 2 {
        let padded = transform::pad_value_parents(&rooted, r.order[t - 2], &sections[t - 1])?;
        check_decomposable(&padded)?;
        if find_t(&padded, r.c)? != t {
            return Err(Error::Invalid("padding moved the queried node".into()));
        }
        padded
    } else {
        rooted
    };
    Ok(Prepared {
        diagram,
        c: r.c,
        s: r.s,
        t,
    })
}

/// For each configuration of `new`, the flat index of its restriction to
/// `old` (whose nodes must all occur in `new`) and the value of `c`.
fn restrict(new: &[Coord], old: &[Coord], c: NodeIdx) -> Vec<(usize, usize)> {
    let new_cards: Vec<usize> = new.iter().map(Coord::card).collect();
    let old_cards: Vec<usize> = old.iter().map(Coord::card).collect();
    let pos: Vec<usize> = old
        .iter()
        .map(|o| {
            new.iter()
                .position(|n| n.node == o.node)
                .expect("restriction to a sub-coordinate set")
        })
        .collect();
    let c_pos = new.iter().position(|n| n.node == c);
    let mut old_assignment = vec![0; old.len()];
    Assignments::new(&new_cards)
        .map(|a| {
            for (slot, &p) in old_assignment.iter_mut().zip(&pos) {
                *slot = a[p];
            }
            (layout::index(&old_assignment, &old_cards), c_pos.map_or(0, |p| a[p]))
        })
        .collect()
}

fn coords(diagram: &InfluenceDiagram, nodes: &[NodeIdx]) -> Vec<Coord> {
    nodes.iter().map(|&v| Coord::of(diagram, v)).collect()
}

/// Owned random nodes, owned value nodes, entry and exit of a section.
struct Shape {
    random: BTreeSet<NodeIdx>,
    values: BTreeSet<NodeIdx>,
    entry: BTreeSet<NodeIdx>,
    exit: Option<BTreeSet<NodeIdx>>,
    members: BTreeSet<NodeIdx>,
}

impl Shape {
    fn of(s: &Section) -> Self {
        Shape {
            random: s.cpts.iter().map(|c| c.child).collect(),
            values: s.value_nodes().into_iter().collect(),
            entry: s.entry.iter().copied().collect(),
            exit: s.exit.as_ref().map(|x| x.iter().copied().collect()),
            members: s.members(),
        }
    }
}

fn plus(set: &BTreeSet<NodeIdx>, c: NodeIdx) -> BTreeSet<NodeIdx> {
    let mut out = set.clone();
    out.insert(c);
    out
}

/// The kernel (if any) and reward of stage `i` of a condensation.
fn tables_of(c: &Condensation, i: usize) -> (Option<&Kernel>, Vec<f64>) {
    if i == 0 {
        (Some(&c.initial), vec![c.f0])
    } else {
        let s = &c.stages[i - 1];
        (s.kernel.as_ref(), s.reward.clone())
    }
}

struct StageOut {
    kernel: Option<Kernel>,
    reward: Vec<f64>,
    tag: StageTag,
    counters: Counters,
}

fn scratch_kernel(modified: &InfluenceDiagram, s: &Section) -> Result<Option<Kernel>> {
    if s.is_initial() {
        let (_, k) = initial_stage(modified, s)?;
        return Ok(Some(k));
    }
    Ok(match s.exit {
        Some(_) => Some(Kernel::from_conditional(modified, section_conditional(s)?)),
        None => None,
    })
}

fn scratch_reward(s: &Section) -> Result<Vec<f64>> {
    local_value(s)
}

fn table_len(k: &Option<Kernel>) -> usize {
    k.as_ref().map_or(0, |k| k.table.len())
}

fn incremental_stage(
    orig: &Condensation,
    base: &InfluenceDiagram,
    modified: &InfluenceDiagram,
    old: &Section,
    new: &Section,
    c: NodeIdx,
    t: usize,
) -> Result<StageOut> {
    let i = new.index;
    let (old_kernel, old_reward) = tables_of(orig, i);
    let a = Shape::of(old);
    let b = Shape::of(new);
    let kernel_work = inference::kernel_eliminations(new);
    let reward_work = inference::reward_eliminations(new);
    let exit_gains_c =
        a.exit.as_ref().is_some_and(|x| !x.contains(&c)) && b.exit == a.exit.as_ref().map(|x| plus(x, c));
    let entry_gains_c = !a.entry.contains(&c) && b.entry == plus(&a.entry, c);
    let old_cond = coords(base, &old.conditioners());
    let new_cond = coords(modified, &new.conditioners());

    let reused = |kernel: Option<Kernel>, reward: Vec<f64>, tag| {
        let entries = table_len(&kernel) + reward.len();
        StageOut {
            kernel,
            reward,
            tag,
            counters: Counters {
                eliminations_saved: kernel_work + reward_work,
                entries_copied: entries,
                ..Counters::default()
            },
        }
    };

    if a.entry == b.entry
        && a.exit == b.exit
        && a.random == b.random
        && a.values == b.values
        && old.decision == new.decision
    {
        return Ok(reused(old_kernel.cloned(), old_reward, StageTag::Unchanged));
    }

    let c_isolated = base.parents(c).is_empty()
        && new.cpts.iter().all(|t| !t.parents.contains(&c))
        && new.values.iter().all(|t| !t.parents.contains(&c));
    if a.entry == b.entry
        && exit_gains_c
        && !a.members.contains(&c)
        && b.random == plus(&a.random, c)
        && a.values == b.values
        && c_isolated
    {
        // P'(x, c | cond) = P(x | cond) P(c)
        let k = old_kernel.expect("stage with an exit frontier has a kernel");
        let prior = &base.cpt(c).expect("random node has a cpt").rows;
        let targets = coords(modified, new.exit.as_ref().expect("exit"));
        let map = restrict(&targets, &k.targets, c);
        let mut table = Vec::with_capacity(k.rows() * map.len());
        for r in 0..k.rows() {
            let row = k.row(r);
            table.extend(map.iter().map(|&(col, cv)| row[col] * prior[cv]));
        }
        let kernel = Kernel {
            targets,
            table,
            uniform_rows: k.uniform_rows.clone(),
        };
        return Ok(reused(Some(kernel), old_reward, StageTag::Entry));
    }

    if entry_gains_c && exit_gains_c && !a.members.contains(&c) && a.random == b.random && a.values == b.values {
        // P'(x, c' | cond, c) = P(x | cond) [c' = c]; f'(cond, c) = f(cond)
        let k = old_kernel.expect("stage with an exit frontier has a kernel");
        let targets = coords(modified, new.exit.as_ref().expect("exit"));
        let rows = restrict(&new_cond, &old_cond, c);
        let cols = restrict(&targets, &k.targets, c);
        let mut table = Vec::with_capacity(rows.len() * cols.len());
        let mut uniform_rows = Vec::new();
        for (r, &(old_row, cr)) in rows.iter().enumerate() {
            let row = k.row(old_row);
            table.extend(cols.iter().map(|&(col, cc)| if cc == cr { row[col] } else { 0.0 }));
            if k.uniform_rows.contains(&old_row) {
                uniform_rows.push(r);
            }
        }
        let kernel = Kernel {
            targets,
            table,
            uniform_rows,
        };
        let reward = rows.iter().map(|&(old_row, _)| old_reward[old_row]).collect();
        return Ok(reused(Some(kernel), reward, StageTag::Middle));
    }

    if entry_gains_c && a.exit == b.exit && old.decision == new.decision {
        let rows = restrict(&new_cond, &old_cond, c);
        let mut counters = Counters::default();
        let kernel = match (old_kernel, &a.exit) {
            (_, None) => None,
            (Some(k), Some(exit))
                if exit.contains(&c) && plus(&b.random, c) == a.random && base.parents(c).is_empty() =>
            {
                // P'(x | cond, c) = P(x | cond) [x_c = c] / P(c | cond)
                let cols = restrict(&k.targets, &k.targets, c);
                let mut table = Vec::with_capacity(rows.len() * cols.len());
                let mut uniform_rows = Vec::new();
                for (r, &(old_row, cr)) in rows.iter().enumerate() {
                    let row = k.row(old_row);
                    let denom: f64 = cols.iter().filter(|&&(_, cc)| cc == cr).map(|&(col, _)| row[col]).sum();
                    if denom > 0.0 {
                        table.extend(
                            cols.iter()
                                .map(|&(col, cc)| if cc == cr { row[col] / denom } else { 0.0 }),
                        );
                    } else {
                        table.extend(std::iter::repeat_n(1.0 / cols.len() as f64, cols.len()));
                        uniform_rows.push(r);
                    }
                }
                counters.eliminations_saved += kernel_work;
                counters.entries_copied += table.len();
                Some(Kernel {
                    targets: k.targets.clone(),
                    table,
                    uniform_rows,
                })
            }
            _ => {
                let k = scratch_kernel(modified, new)?;
                counters.eliminations_performed += kernel_work;
                counters.entries_computed += table_len(&k);
                k
            }
        };
        let conditioning: BTreeSet<NodeIdx> = old.conditioners().into_iter().collect();
        let reward_reusable = a.values == b.values
            && new
                .values
                .iter()
                .all(|t| t.parents.iter().all(|p| conditioning.contains(p)));
        let reward = if reward_reusable {
            counters.eliminations_saved += reward_work;
            counters.entries_copied += rows.len();
            rows.iter().map(|&(old_row, _)| old_reward[old_row]).collect()
        } else {
            counters.eliminations_performed += reward_work;
            counters.entries_computed += rows.len();
            scratch_reward(new)?
        };
        let tag = if counters.eliminations_performed == 0 && (reward_reusable || reward_work == 0) {
            StageTag::ExitReused
        } else {
            StageTag::ExitRecomputed
        };
        // a kernel or reward that needed no elimination still counts as
        // computed when it was rebuilt from the section
        let tag = if tag == StageTag::ExitReused && counters.entries_computed > 0 {
            StageTag::ExitRecomputed
        } else {
            tag
        };
        return Ok(StageOut {
            kernel,
            reward,
            tag,
            counters,
        });
    }

    let kernel = scratch_kernel(modified, new)?;
    let reward = scratch_reward(new)?;
    // the stage before `d_t` is the one the exit case is about, even when
    // its exit frontier gained `c` as well
    let tag = if new.index + 1 == t {
        StageTag::ExitRecomputed
    } else {
        StageTag::Recomputed
    };
    Ok(StageOut {
        counters: Counters {
            eliminations_performed: kernel_work + reward_work,
            entries_computed: table_len(&kernel) + reward.len(),
            ..Counters::default()
        },
        kernel,
        reward,
        tag,
    })
}

/// The condensation of `modified`, assembled stage by stage from `orig`
/// (the condensation of `base`) wherever the sections allow it. `t` is the
/// query's [`find_t`] on `base`.
pub fn incremental_condense(
    orig: &Condensation,
    base: &InfluenceDiagram,
    modified: &InfluenceDiagram,
    c: NodeIdx,
    t: usize,
) -> Result<(Condensation, Vec<StageReport>)> {
    if orig.digest != condense::digest(base) {
        return Err(Error::ProvenanceMismatch(
            "condensation was not built from the query's base diagram".into(),
        ));
    }
    let old = graph::extract_sections(base)?;
    let new = graph::extract_sections(modified)?;
    if old.len() != new.len() || orig.stages.len() + 1 != old.len() {
        return Err(Error::ProvenanceMismatch("stage counts differ".into()));
    }
    let mut reports = Vec::with_capacity(new.len());
    let mut f0 = 0.0;
    let mut initial = None;
    let mut stages = Vec::with_capacity(orig.stages.len());
    for (o, n) in old.iter().zip(&new) {
        let out = incremental_stage(orig, base, modified, o, n, c, t)?;
        reports.push(StageReport {
            stage: n.index,
            tag: out.tag,
            counters: out.counters,
        });
        if n.index == 0 {
            f0 = out.reward[0];
            initial = out.kernel;
        } else {
            stages.push(Stage {
                index: n.index,
                section: n.index,
                state: coords(modified, &n.entry),
                decision: Coord::of(modified, n.decision.expect("non-initial section has a decision")),
                kernel: out.kernel,
                reward: out.reward,
            });
        }
    }
    let condensation = Condensation {
        digest: condense::digest(modified),
        f0,
        initial: initial.expect("initial stage has a prior"),
        stages,
    };
    condensation.check()?;
    Ok((condensation, reports))
}

fn total(stages: &[StageReport]) -> Counters {
    let mut out = Counters::default();
    for s in stages {
        out += s.counters;
    }
    out
}

/// VPI of `q`, reusing condensations from `cache` and adding new ones.
pub fn vpi_cached(diagram: &InfluenceDiagram, q: &VpiQuery, cache: &mut Cache) -> Result<VpiReport> {
    let base = transform::smooth(diagram)?;
    let r = resolve(&base, q)?;
    let (orig, cached) = cache.condense(&base)?;
    let original = backward_induction(&orig)?.value;
    let report = |modified: f64, t, mode, cached, stages: Vec<StageReport>| VpiReport {
        c: q.c.clone(),
        d_s: q.d_s.clone(),
        vpi: modified - original,
        original,
        modified,
        s: r.s,
        t,
        mode,
        cached,
        counters: total(&stages),
        stages,
    };
    let unchanged = |n: usize| {
        (0..n)
            .map(|stage| StageReport {
                stage,
                tag: StageTag::Unchanged,
                counters: Counters::default(),
            })
            .collect::<Vec<_>>()
    };

    let t = find_t(&base, r.c)?;
    if t <= r.s {
        return Ok(report(
            original,
            t,
            Mode::Shortcut,
            cached,
            unchanged(orig.stages.len() + 1),
        ));
    }

    let prepared = match prepare(&base, q) {
        Ok(p) => p,
        Err(Error::NotRootable { .. } | Error::NotSmooth(_) | Error::NotSdid(_) | Error::Invalid(_)) => {
            let full = transform::smooth(&full_modified(&base, q)?)?;
            let (c2, _) = cache.condense(&full)?;
            let modified = backward_induction(&c2)?.value;
            let stages: Vec<StageReport> = graph::extract_sections(&full)?
                .iter()
                .map(|s| StageReport {
                    stage: s.index,
                    tag: StageTag::Recomputed,
                    counters: Counters {
                        eliminations_performed: inference::kernel_eliminations(s) + inference::reward_eliminations(s),
                        ..Counters::default()
                    },
                })
                .collect();
            return Ok(report(modified, t, Mode::Scratch, cached, stages));
        }
        Err(e) => return Err(e),
    };
    if prepared.t <= r.s {
        return Ok(report(
            original,
            prepared.t,
            Mode::Shortcut,
            cached,
            unchanged(orig.stages.len() + 1),
        ));
    }
    let (orig, cached) = if condense::digest(&prepared.diagram) == orig.digest {
        (orig, cached)
    } else {
        cache.condense(&prepared.diagram)?
    };
    let modified_diagram = build_modified(&prepared.diagram, q)?;
    let (condensed, stages) =
        incremental_condense(&orig, &prepared.diagram, &modified_diagram, prepared.c, prepared.t)?;
    let modified = backward_induction(&condensed)?.value;
    let mut out = report(modified, prepared.t, Mode::Incremental, cached, stages);
    // the normalized diagram's optimum, so that vpi = modified - original exactly
    out.original = backward_induction(&orig)?.value;
    out.vpi = out.modified - out.original;
    Ok(out)
}

/// VPI of `q`. A supplied condensation is used when it matches the
/// (normalized) diagram.
pub fn vpi(diagram: &InfluenceDiagram, q: &VpiQuery, cache: Option<&Condensation>) -> Result<VpiReport> {
    let mut store = Cache::new();
    if let Some(c) = cache {
        store.insert(c.clone());
    }
    vpi_cached(diagram, q, &mut store)
}

/// Many queries against one diagram, sharing condensations.
pub fn vpi_batch(diagram: &InfluenceDiagram, queries: &[VpiQuery], cache: &mut Cache) -> Vec<Result<VpiReport>> {
    queries.iter().map(|q| vpi_cached(diagram, q, cache)).collect()
}

/// `f64` with 12 significant digits, shortest form.
pub fn format_tsv_number(x: f64) -> String {
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub const TSV_HEADER: &str = "query\tvpi\treused_stages\trecomputed_stages";

pub fn tsv_row(r: &VpiReport) -> String {
    format!(
        "{}@{}\t{}\t{}\t{}",
        r.c,
        r.d_s,
        format_tsv_number(r.vpi),
        r.reused_stages(),
        r.recomputed_stages()
    )
}
