//! Influence diagram data model.
//!
//! Nodes are addressed by their position in declaration order ([`NodeIdx`]);
//! the string id is kept for I/O and diagnostics. Every table uses the layout
//! in [`layout`]: parents in the listed order, child value innermost.

pub mod format;
pub mod layout;
mod validate;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use validate::{validate, ValidationReport, Violation};

/// Position of a node in its diagram's declaration order.
pub type NodeIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Random,
    Decision,
    Value,
}

/// Ordered list of categorical values. Empty for value nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frame(pub Vec<String>);

impl Frame {
    pub fn new<S: AsRef<str>>(values: &[S]) -> Self {
        Frame(values.iter().map(|s| s.as_ref().to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn position(&self, value: &str) -> Option<usize> {
        self.0.iter().position(|v| v == value)
    }

    pub fn label(&self, i: usize) -> &str {
        &self.0[i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    pub frame: Frame,
}

/// `P(child | parents)`, one row per parent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub child: NodeIdx,
    pub parents: Vec<NodeIdx>,
    pub rows: Vec<f64>,
}

/// Utility of a value node, one entry per parent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub node: NodeIdx,
    pub parents: Vec<NodeIdx>,
    pub rows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceDiagram {
    nodes: Vec<Node>,
    arcs: Vec<(NodeIdx, NodeIdx)>,
    cpts: Vec<Cpt>,
    values: Vec<ValueTable>,
    decision_order: Option<Vec<NodeIdx>>,
    parents: Vec<Vec<NodeIdx>>,
    children: Vec<Vec<NodeIdx>>,
    index: HashMap<String, NodeIdx>,
}

impl InfluenceDiagram {
    /// Assembles a diagram, rejecting structural errors that make the node
    /// graph itself ill-defined. Semantic problems (cycles, bad tables) are
    /// left for [`validate`].
    pub fn new(
        nodes: Vec<Node>,
        arcs: Vec<(NodeIdx, NodeIdx)>,
        cpts: Vec<Cpt>,
        values: Vec<ValueTable>,
        decision_order: Option<Vec<NodeIdx>>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::schema(&n.id, "duplicate node id"));
            }
        }
        let n = nodes.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for &(from, to) in &arcs {
            if from >= n || to >= n {
                return Err(Error::Invalid(format!("arc ({from}, {to}) out of range")));
            }
            if from == to {
                return Err(Error::schema(&nodes[from].id, "self loop"));
            }
            if !seen.insert((from, to)) {
                return Err(Error::schema(
                    &nodes[to].id,
                    format!("duplicate arc from `{}`", nodes[from].id),
                ));
            }
            parents[to].push(from);
            children[from].push(to);
        }
        for p in parents.iter_mut().chain(children.iter_mut()) {
            p.sort_unstable();
        }
        let check = |idx: NodeIdx, what: &str| -> Result<()> {
            if idx >= n {
                Err(Error::Invalid(format!("{what} refers to node {idx} out of range")))
            } else {
                Ok(())
            }
        };
        for c in &cpts {
            check(c.child, "cpt")?;
            c.parents.iter().try_for_each(|&p| check(p, "cpt parent"))?;
        }
        for v in &values {
            check(v.node, "value table")?;
            v.parents.iter().try_for_each(|&p| check(p, "value parent"))?;
        }
        if let Some(order) = &decision_order {
            order.iter().try_for_each(|&d| check(d, "decision order"))?;
        }
        Ok(InfluenceDiagram {
            nodes,
            arcs,
            cpts,
            values,
            decision_order,
            parents,
            children,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: NodeIdx) -> &Node {
        &self.nodes[i]
    }

    pub fn id(&self, i: NodeIdx) -> &str {
        &self.nodes[i].id
    }

    pub fn kind(&self, i: NodeIdx) -> NodeKind {
        self.nodes[i].kind
    }

    pub fn frame(&self, i: NodeIdx) -> &Frame {
        &self.nodes[i].frame
    }

    pub fn card(&self, i: NodeIdx) -> usize {
        self.nodes[i].frame.len()
    }

    pub fn cards(&self, vars: &[NodeIdx]) -> Vec<usize> {
        vars.iter().map(|&v| self.card(v)).collect()
    }

    pub fn lookup(&self, id: &str) -> Result<NodeIdx> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn arcs(&self) -> &[(NodeIdx, NodeIdx)] {
        &self.arcs
    }

    pub fn has_arc(&self, from: NodeIdx, to: NodeIdx) -> bool {
        self.children[from].binary_search(&to).is_ok()
    }

    /// Graph parents in ascending declaration order.
    pub fn parents(&self, i: NodeIdx) -> &[NodeIdx] {
        &self.parents[i]
    }

    pub fn children(&self, i: NodeIdx) -> &[NodeIdx] {
        &self.children[i]
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn cpt(&self, child: NodeIdx) -> Option<&Cpt> {
        self.cpts.iter().find(|c| c.child == child)
    }

    pub fn value_tables(&self) -> &[ValueTable] {
        &self.values
    }

    pub fn value_table(&self, node: NodeIdx) -> Option<&ValueTable> {
        self.values.iter().find(|v| v.node == node)
    }

    pub fn declared_decision_order(&self) -> Option<&[NodeIdx]> {
        self.decision_order.as_deref()
    }

    pub fn of_kind(&self, kind: NodeKind) -> Vec<NodeIdx> {
        (0..self.len()).filter(|&i| self.kind(i) == kind).collect()
    }

    pub fn random_nodes(&self) -> Vec<NodeIdx> {
        self.of_kind(NodeKind::Random)
    }

    pub fn decision_nodes(&self) -> Vec<NodeIdx> {
        self.of_kind(NodeKind::Decision)
    }

    pub fn value_nodes(&self) -> Vec<NodeIdx> {
        self.of_kind(NodeKind::Value)
    }

    /// Kahn's algorithm, smallest index first. `None` if the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<NodeIdx>> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<NodeIdx> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            out.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (out.len() == n).then_some(out)
    }

    /// Every node reachable from `from` by a directed path of length ≥ 1.
    pub fn descendants(&self, from: NodeIdx) -> BTreeSet<NodeIdx> {
        let mut seen = BTreeSet::new();
        let mut stack = self.children[from].clone();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend_from_slice(&self.children[v]);
            }
        }
        seen
    }

    pub fn ancestors(&self, of: NodeIdx) -> BTreeSet<NodeIdx> {
        let mut seen = BTreeSet::new();
        let mut stack = self.parents[of].clone();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend_from_slice(&self.parents[v]);
            }
        }
        seen
    }

    /// Copy of this diagram with a different arc set and tables; node list
    /// and declared order are kept.
    pub fn with_structure(
        &self,
        arcs: Vec<(NodeIdx, NodeIdx)>,
        cpts: Vec<Cpt>,
        values: Vec<ValueTable>,
    ) -> Result<Self> {
        InfluenceDiagram::new(self.nodes.clone(), arcs, cpts, values, self.decision_order.clone())
    }
}

/// Id, kind, frame, parent ids and table of a node not yet built.
type PendingNode = (String, NodeKind, Frame, Vec<String>, Vec<f64>);

/// Name-based construction. Arcs are derived from the parent lists, so a
/// built diagram always has tables that agree with its graph.
#[derive(Debug, Default)]
pub struct DiagramBuilder {
    nodes: Vec<PendingNode>,
    decision_order: Option<Vec<String>>,
}

impl DiagramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn random<S: AsRef<str>>(mut self, id: &str, frame: &[S], parents: &[&str], rows: &[f64]) -> Self {
        self.nodes.push((
            id.into(),
            NodeKind::Random,
            Frame::new(frame),
            parents.iter().map(|s| s.to_string()).collect(),
            rows.to_vec(),
        ));
        self
    }

    pub fn decision<S: AsRef<str>>(mut self, id: &str, frame: &[S], parents: &[&str]) -> Self {
        self.nodes.push((
            id.into(),
            NodeKind::Decision,
            Frame::new(frame),
            parents.iter().map(|s| s.to_string()).collect(),
            Vec::new(),
        ));
        self
    }

    pub fn value(mut self, id: &str, parents: &[&str], rows: &[f64]) -> Self {
        self.nodes.push((
            id.into(),
            NodeKind::Value,
            Frame::default(),
            parents.iter().map(|s| s.to_string()).collect(),
            rows.to_vec(),
        ));
        self
    }

    pub fn decision_order(mut self, order: &[&str]) -> Self {
        self.decision_order = Some(order.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn build(self) -> Result<InfluenceDiagram> {
        let mut index = HashMap::new();
        for (i, (id, ..)) in self.nodes.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::schema(id, "duplicate node id"));
            }
        }
        let resolve = |id: &str, at: &str| -> Result<NodeIdx> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::schema(at, format!("undeclared parent `{id}`")))
        };
        let mut nodes = Vec::new();
        let mut arcs = Vec::new();
        let mut cpts = Vec::new();
        let mut values = Vec::new();
        for (i, (id, kind, frame, parent_ids, rows)) in self.nodes.iter().enumerate() {
            let parents = parent_ids.iter().map(|p| resolve(p, id)).collect::<Result<Vec<_>>>()?;
            arcs.extend(parents.iter().map(|&p| (p, i)));
            match kind {
                NodeKind::Random => cpts.push(Cpt {
                    child: i,
                    parents,
                    rows: rows.clone(),
                }),
                NodeKind::Value => values.push(ValueTable {
                    node: i,
                    parents,
                    rows: rows.clone(),
                }),
                NodeKind::Decision => {}
            }
            nodes.push(Node {
                id: id.clone(),
                kind: *kind,
                frame: frame.clone(),
            });
        }
        let order = self
            .decision_order
            .map(|o| o.iter().map(|d| resolve(d, d)).collect::<Result<Vec<_>>>())
            .transpose()?;
        InfluenceDiagram::new(nodes, arcs, cpts, values, order)
    }
}

/// `δ: Ω_parents → Ω_decision`, stored as one frame index per parent
/// configuration. Parents are in ascending declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DecisionFunction {
    pub decision: NodeIdx,
    pub parents: Vec<NodeIdx>,
    pub table: Vec<usize>,
}

impl DecisionFunction {
    /// The degenerate kernel `P(d = δ(π) | π) = 1`.
    pub fn to_kernel(&self, decision_card: usize) -> Cpt {
        let mut rows = vec![0.0; self.table.len() * decision_card];
        for (row, &choice) in self.table.iter().enumerate() {
            rows[row * decision_card + choice] = 1.0;
        }
        Cpt {
            child: self.decision,
            parents: self.parents.clone(),
            rows,
        }
    }
}

/// One decision function per decision node, in the regular decision order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Policy {
    pub functions: Vec<DecisionFunction>,
}

impl Policy {
    pub fn function(&self, decision: NodeIdx) -> Option<&DecisionFunction> {
        self.functions.iter().find(|f| f.decision == decision)
    }

    /// Checks the policy covers each decision once with total tables.
    pub fn check(&self, diagram: &InfluenceDiagram) -> Result<()> {
        let decisions = diagram.decision_nodes();
        if self.functions.len() != decisions.len() {
            return Err(Error::PolicyArityMismatch(format!(
                "{} decision functions for {} decisions",
                self.functions.len(),
                decisions.len()
            )));
        }
        for &d in &decisions {
            let f = self
                .function(d)
                .ok_or_else(|| Error::PolicyArityMismatch(format!("no decision function for `{}`", diagram.id(d))))?;
            if f.parents != diagram.parents(d) {
                return Err(Error::PolicyArityMismatch(format!(
                    "decision function for `{}` has the wrong parents",
                    diagram.id(d)
                )));
            }
            let rows = layout::size(&diagram.cards(&f.parents));
            if f.table.len() != rows || f.table.iter().any(|&c| c >= diagram.card(d)) {
                return Err(Error::PolicyArityMismatch(format!(
                    "decision function for `{}` is not total over its frame",
                    diagram.id(d)
                )));
            }
        }
        Ok(())
    }
}

/// The regular total order over decision nodes.
///
/// With a declared order, it must list every decision once and never put
/// `d_j` before `d_i` when `d_i` reaches `d_j`. Without one, the order is
/// derived from reachability and every consecutive pair must be connected by
/// a directed path.
pub fn decision_ordering(diagram: &InfluenceDiagram) -> Result<Vec<NodeIdx>> {
    let decisions = diagram.decision_nodes();
    let reach: HashMap<NodeIdx, BTreeSet<NodeIdx>> = decisions.iter().map(|&d| (d, diagram.descendants(d))).collect();

    if let Some(order) = diagram.declared_decision_order() {
        let declared: BTreeSet<_> = order.iter().copied().collect();
        if declared.len() != order.len() || declared != decisions.iter().copied().collect::<BTreeSet<_>>() {
            return Err(Error::NotRegular(
                "declared decision order is not a permutation of the decision nodes".into(),
            ));
        }
        for (i, &earlier) in order.iter().enumerate() {
            for &later in &order[i + 1..] {
                if reach[&later].contains(&earlier) {
                    return Err(Error::NotRegular(format!(
                        "`{}` is declared before `{}` but is reachable from it",
                        diagram.id(earlier),
                        diagram.id(later)
                    )));
                }
            }
        }
        return Ok(order.to_vec());
    }

    let topo = diagram
        .topological_order()
        .ok_or_else(|| Error::NotRegular("diagram has a directed cycle".into()))?;
    let ordered: Vec<NodeIdx> = topo
        .into_iter()
        .filter(|&i| diagram.kind(i) == NodeKind::Decision)
        .collect();
    for pair in ordered.windows(2) {
        if !reach[&pair[0]].contains(&pair[1]) {
            return Err(Error::NotRegular(format!(
                "no order between `{}` and `{}`",
                diagram.id(pair[0]),
                diagram.id(pair[1])
            )));
        }
    }
    Ok(ordered)
}
