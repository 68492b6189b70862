//! Structural analysis on the moral graph: m-separation, the downstream and
//! upstream of a decision's parent frontier, stepwise-decomposability,
//! smoothness and the section chain of a smooth regular diagram.

use std::collections::{BTreeMap, BTreeSet};

use crate::diagram::{decision_ordering, Cpt, InfluenceDiagram, NodeIdx, NodeKind, ValueTable};
use crate::error::{Error, Result};

pub type NodeSet = BTreeSet<NodeIdx>;

/// Undirected graph: arcs with directions dropped plus an edge between every
/// pair of co-parents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoralGraph {
    adjacency: Vec<NodeSet>,
}

impl MoralGraph {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: NodeIdx) -> &NodeSet {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, a: NodeIdx, b: NodeIdx) -> bool {
        self.adjacency[a].contains(&b)
    }

    /// Edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> Vec<(NodeIdx, NodeIdx)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.range(a + 1..).map(move |&b| (a, b)))
            .collect()
    }

    /// Nodes reachable from `from` without entering `blocked`. `from` is
    /// included unless blocked.
    pub fn reachable_avoiding(&self, from: NodeIdx, blocked: &NodeSet) -> NodeSet {
        let mut seen = NodeSet::new();
        if blocked.contains(&from) {
            return seen;
        }
        let mut stack = vec![from];
        seen.insert(from);
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !blocked.contains(&w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Every path between `x` and `y` meets `separator`.
    pub fn separated(&self, x: NodeIdx, y: NodeIdx, separator: &NodeSet) -> bool {
        if separator.contains(&x) || separator.contains(&y) {
            return true;
        }
        !self.reachable_avoiding(x, separator).contains(&y)
    }
}

pub fn moral_graph(diagram: &InfluenceDiagram) -> MoralGraph {
    let mut adjacency = vec![NodeSet::new(); diagram.len()];
    for v in 0..diagram.len() {
        let ps = diagram.parents(v);
        for (i, &p) in ps.iter().enumerate() {
            adjacency[p].insert(v);
            adjacency[v].insert(p);
            for &q in &ps[i + 1..] {
                adjacency[p].insert(q);
                adjacency[q].insert(p);
            }
        }
    }
    MoralGraph { adjacency }
}

pub fn m_separated(diagram: &InfluenceDiagram, x: NodeIdx, y: NodeIdx, separator: &NodeSet) -> bool {
    moral_graph(diagram).separated(x, y, separator)
}

fn frontier(diagram: &InfluenceDiagram, d: NodeIdx) -> NodeSet {
    diagram.parents(d).iter().copied().collect()
}

fn downstream_in(moral: &MoralGraph, diagram: &InfluenceDiagram, d: NodeIdx) -> NodeSet {
    moral.reachable_avoiding(d, &frontier(diagram, d))
}

/// Nodes not m-separated from `d` by its parents; contains `d`.
pub fn downstream(diagram: &InfluenceDiagram, d: NodeIdx) -> NodeSet {
    downstream_in(&moral_graph(diagram), diagram, d)
}

/// Nodes outside `d`'s parents that are m-separated from `d` by them.
pub fn upstream(diagram: &InfluenceDiagram, d: NodeIdx) -> NodeSet {
    let down = downstream(diagram, d);
    let parents = frontier(diagram, d);
    (0..diagram.len())
        .filter(|v| !down.contains(v) && !parents.contains(v))
        .collect()
}

/// No decision preceding `d` in the regular order lies downstream of `d`'s
/// parents, for every decision `d`.
pub fn is_stepwise_decomposable(diagram: &InfluenceDiagram) -> Result<bool> {
    let order = decision_ordering(diagram)?;
    let moral = moral_graph(diagram);
    Ok(order.iter().enumerate().all(|(j, &d)| {
        let down = downstream_in(&moral, diagram, d);
        order[..j].iter().all(|earlier| !down.contains(earlier))
    }))
}

fn smooth_at_in(moral: &MoralGraph, diagram: &InfluenceDiagram, d: NodeIdx) -> bool {
    offending_arcs_in(moral, diagram, d).is_empty()
}

/// Arcs from the downstream of `d`'s parents into those parents.
pub fn offending_arcs(diagram: &InfluenceDiagram, d: NodeIdx) -> Vec<(NodeIdx, NodeIdx)> {
    offending_arcs_in(&moral_graph(diagram), diagram, d)
}

fn offending_arcs_in(moral: &MoralGraph, diagram: &InfluenceDiagram, d: NodeIdx) -> Vec<(NodeIdx, NodeIdx)> {
    let down = downstream_in(moral, diagram, d);
    let mut out = Vec::new();
    for &p in diagram.parents(d) {
        for &q in diagram.parents(p) {
            if down.contains(&q) {
                out.push((q, p));
            }
        }
    }
    out
}

pub fn is_smooth_at(diagram: &InfluenceDiagram, d: NodeIdx) -> bool {
    smooth_at_in(&moral_graph(diagram), diagram, d)
}

/// First decision (in regular order) at which the diagram is not smooth.
pub fn first_non_smooth(diagram: &InfluenceDiagram) -> Result<Option<NodeIdx>> {
    let order = decision_ordering(diagram)?;
    let moral = moral_graph(diagram);
    Ok(order.into_iter().find(|&d| !smooth_at_in(&moral, diagram, d)))
}

pub fn is_smooth(diagram: &InfluenceDiagram) -> Result<bool> {
    Ok(first_non_smooth(diagram)?.is_none())
}

/// One-line structural verdict, e.g. `SDID: yes, smooth: no (drill)`.
pub fn verdict(diagram: &InfluenceDiagram) -> Result<String> {
    if !is_stepwise_decomposable(diagram)? {
        return Ok("SDID: no".to_string());
    }
    Ok(match first_non_smooth(diagram)? {
        Some(d) => format!("SDID: yes, smooth: no ({})", diagram.id(d)),
        None => "SDID: yes, smooth: yes".to_string(),
    })
}

/// A sub-network between two consecutive decision frontiers.
///
/// Section `i` of a diagram with decisions `d_1 … d_k` runs from the parents
/// of `d_i` to the parents of `d_{i+1}`; section 0 is the initial section
/// (no entry frontier, no decision) and section `k` the terminal one (no exit
/// frontier). Frontier lists are in ascending declaration order. The section
/// carries copies of the tables it needs, so inference over it does not look
/// back at the diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub index: usize,
    pub entry: Vec<NodeIdx>,
    pub decision: Option<NodeIdx>,
    pub exit: Option<Vec<NodeIdx>>,
    pub interior: Vec<NodeIdx>,
    pub arcs: Vec<(NodeIdx, NodeIdx)>,
    pub cpts: Vec<Cpt>,
    pub values: Vec<ValueTable>,
    pub cards: BTreeMap<NodeIdx, usize>,
}

impl Section {
    /// Entry frontier plus the section's decision: the conditioning
    /// coordinates of every table computed in this section.
    pub fn conditioners(&self) -> Vec<NodeIdx> {
        let mut out = self.entry.clone();
        out.extend(self.decision);
        out
    }

    pub fn members(&self) -> NodeSet {
        let mut out: NodeSet = self.entry.iter().chain(&self.interior).copied().collect();
        out.extend(self.decision);
        if let Some(exit) = &self.exit {
            out.extend(exit.iter().copied());
        }
        out
    }

    pub fn value_nodes(&self) -> Vec<NodeIdx> {
        self.values.iter().map(|v| v.node).collect()
    }

    pub fn card(&self, v: NodeIdx) -> usize {
        self.cards[&v]
    }

    pub fn cards_of(&self, vars: &[NodeIdx]) -> Vec<usize> {
        vars.iter().map(|&v| self.card(v)).collect()
    }

    pub fn is_initial(&self) -> bool {
        self.decision.is_none()
    }

    pub fn is_terminal(&self) -> bool {
        self.exit.is_none()
    }
}

/// Splits a smooth regular stepwise-decomposable diagram into its chain of
/// sections `I(-, d_1), I(d_1, d_2), …, I(d_k, -)`.
pub fn extract_sections(diagram: &InfluenceDiagram) -> Result<Vec<Section>> {
    let order = decision_ordering(diagram)?;
    if !is_stepwise_decomposable(diagram)? {
        return Err(Error::NotSdid(
            "an earlier decision lies downstream of a later decision's parents".into(),
        ));
    }
    if let Some(d) = first_non_smooth(diagram)? {
        return Err(Error::NotSmooth(diagram.id(d).to_string()));
    }
    let moral = moral_graph(diagram);
    let all: NodeSet = (0..diagram.len()).collect();
    let down: Vec<NodeSet> = order.iter().map(|&d| downstream_in(&moral, diagram, d)).collect();
    let fronts: Vec<NodeSet> = order.iter().map(|&d| frontier(diagram, d)).collect();
    let up: Vec<NodeSet> = (0..order.len())
        .map(|i| {
            all.iter()
                .filter(|v| !down[i].contains(v) && !fronts[i].contains(v))
                .copied()
                .collect()
        })
        .collect();

    let k = order.len();
    let mut sections = Vec::with_capacity(k + 1);
    for i in 0..=k {
        // region strictly between the two frontiers
        let between: NodeSet = match (i, k) {
            (_, 0) => all.clone(),
            (0, _) => up[0].clone(),
            (i, k) if i == k => down[k - 1].clone(),
            (i, _) => down[i - 1].intersection(&up[i]).copied().collect(),
        };
        let entry: Vec<NodeIdx> = if i == 0 {
            Vec::new()
        } else {
            fronts[i - 1].iter().copied().collect()
        };
        let decision = (i > 0).then(|| order[i - 1]);
        let exit: Option<Vec<NodeIdx>> = (i < k).then(|| fronts[i].iter().copied().collect());
        let interior: Vec<NodeIdx> = between
            .iter()
            .copied()
            .filter(|v| Some(*v) != decision && !entry.contains(v) && !exit.as_ref().is_some_and(|x| x.contains(v)))
            .collect();
        sections.push(build_section(diagram, i, entry, decision, exit, interior));
    }
    check_partition(diagram, &sections)?;
    Ok(sections)
}

pub(crate) fn build_section(
    diagram: &InfluenceDiagram,
    index: usize,
    entry: Vec<NodeIdx>,
    decision: Option<NodeIdx>,
    exit: Option<Vec<NodeIdx>>,
    interior: Vec<NodeIdx>,
) -> Section {
    let mut members: NodeSet = entry.iter().chain(&interior).copied().collect();
    members.extend(decision);
    if let Some(x) = &exit {
        members.extend(x.iter().copied());
    }
    let mut conditioning: NodeSet = entry.iter().copied().collect();
    conditioning.extend(decision);

    let arcs = diagram
        .arcs()
        .iter()
        .copied()
        .filter(|(a, b)| members.contains(a) && members.contains(b))
        .filter(|(a, b)| !(conditioning.contains(a) && conditioning.contains(b)))
        .collect();
    let cpts = members
        .iter()
        .filter(|v| !conditioning.contains(v) && diagram.kind(**v) == NodeKind::Random)
        .filter_map(|&v| diagram.cpt(v).cloned())
        .collect();
    let values = interior
        .iter()
        .filter(|&&v| diagram.kind(v) == NodeKind::Value)
        .filter_map(|&v| diagram.value_table(v).cloned())
        .collect();
    let cards = members
        .iter()
        .filter(|&&v| diagram.kind(v) != NodeKind::Value)
        .map(|&v| (v, diagram.card(v)))
        .collect();
    Section {
        index,
        entry,
        decision,
        exit,
        interior,
        arcs,
        cpts,
        values,
        cards,
    }
}

/// Sections must tile the diagram: each non-frontier node in exactly one
/// interior, no stray decisions, and every table's parents inside its section.
fn check_partition(diagram: &InfluenceDiagram, sections: &[Section]) -> Result<()> {
    let mut owner = vec![None; diagram.len()];
    for s in sections {
        for &v in &s.interior {
            if diagram.kind(v) == NodeKind::Decision {
                return Err(Error::NotRegular(format!(
                    "decision `{}` falls inside section {}; consecutive decisions must be connected",
                    diagram.id(v),
                    s.index
                )));
            }
            if owner[v].replace(s.index).is_some() {
                return Err(Error::Invalid(format!("node `{}` lies in two sections", diagram.id(v))));
            }
        }
    }
    for (v, owned) in owner.iter().enumerate() {
        if owned.is_none() && !sections.iter().any(|s| s.members().contains(&v)) {
            return Err(Error::Invalid(format!("node `{}` is in no section", diagram.id(v))));
        }
    }
    for s in sections {
        let members = s.members();
        let parents_inside = |ps: &[NodeIdx]| ps.iter().all(|p| members.contains(p));
        if !s.cpts.iter().all(|c| parents_inside(&c.parents)) || !s.values.iter().all(|t| parents_inside(&t.parents)) {
            return Err(Error::Invalid(format!(
                "section {} has a table whose parents leave the section",
                s.index
            )));
        }
    }
    Ok(())
}
