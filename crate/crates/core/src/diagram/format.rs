//! JSON diagram files.
//!
//! ```json
//! { "nodes": [{"id": "w", "kind": "random", "frame": ["rain", "sun"]}, …],
//!   "arcs": [["w", "v"], …],
//!   "cpts": [{"child": "w", "parents": [], "rows": [0.3, 0.7]}, …],
//!   "values": [{"node": "v", "parents": ["w", "d"], "rows": […]}, …],
//!   "decision_order": ["d"] }
//! ```
//!
//! Keys are written in this order, reals in shortest round-trip form.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Cpt, Frame, InfluenceDiagram, Node, NodeIdx, NodeKind, ValueTable};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagramFile {
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    arcs: Vec<(String, String)>,
    #[serde(default)]
    cpts: Vec<CptEntry>,
    #[serde(default)]
    values: Vec<ValueEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decision_order: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: String,
    kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame: Option<Frame>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptEntry {
    child: String,
    parents: Vec<String>,
    rows: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueEntry {
    node: String,
    parents: Vec<String>,
    rows: Vec<f64>,
}

pub fn parse(text: &str) -> Result<InfluenceDiagram> {
    let file: DiagramFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut index: HashMap<&str, NodeIdx> = HashMap::new();
    let mut nodes = Vec::with_capacity(file.nodes.len());
    for (i, entry) in file.nodes.iter().enumerate() {
        if index.insert(entry.id.as_str(), i).is_some() {
            return Err(Error::schema(&entry.id, "duplicate node id"));
        }
        let frame = match (entry.kind, &entry.frame) {
            (NodeKind::Value, Some(_)) => return Err(Error::schema(&entry.id, "value nodes have no frame")),
            (NodeKind::Value, None) => Frame::default(),
            (_, Some(f)) => f.clone(),
            (_, None) => return Err(Error::schema(&entry.id, "missing frame")),
        };
        nodes.push(Node {
            id: entry.id.clone(),
            kind: entry.kind,
            frame,
        });
    }
    let resolve = |id: &str, at: &str| -> Result<NodeIdx> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::schema(at, format!("reference to undeclared node `{id}`")))
    };
    let resolve_all =
        |ids: &[String], at: &str| -> Result<Vec<NodeIdx>> { ids.iter().map(|p| resolve(p, at)).collect() };

    let arcs = file
        .arcs
        .iter()
        .map(|(from, to)| Ok((resolve(from, to)?, resolve(to, from)?)))
        .collect::<Result<Vec<_>>>()?;
    let cpts = file
        .cpts
        .iter()
        .map(|c| {
            Ok(Cpt {
                child: resolve(&c.child, &c.child)?,
                parents: resolve_all(&c.parents, &c.child)?,
                rows: c.rows.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let values = file
        .values
        .iter()
        .map(|v| {
            Ok(ValueTable {
                node: resolve(&v.node, &v.node)?,
                parents: resolve_all(&v.parents, &v.node)?,
                rows: v.rows.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let order = file
        .decision_order
        .as_ref()
        .map(|o| o.iter().map(|d| resolve(d, d)).collect::<Result<Vec<_>>>())
        .transpose()?;
    InfluenceDiagram::new(nodes, arcs, cpts, values, order)
}

pub fn serialize(diagram: &InfluenceDiagram) -> String {
    let name = |i: NodeIdx| diagram.id(i).to_string();
    let names = |is: &[NodeIdx]| is.iter().map(|&i| name(i)).collect::<Vec<_>>();
    let file = DiagramFile {
        nodes: diagram
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                id: n.id.clone(),
                kind: n.kind,
                frame: (n.kind != NodeKind::Value).then(|| n.frame.clone()),
            })
            .collect(),
        arcs: diagram.arcs().iter().map(|&(a, b)| (name(a), name(b))).collect(),
        cpts: diagram
            .cpts()
            .iter()
            .map(|c| CptEntry {
                child: name(c.child),
                parents: names(&c.parents),
                rows: c.rows.clone(),
            })
            .collect(),
        values: diagram
            .value_tables()
            .iter()
            .map(|v| ValueEntry {
                node: name(v.node),
                parents: names(&v.parents),
                rows: v.rows.clone(),
            })
            .collect(),
        decision_order: diagram.declared_decision_order().map(names),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("diagram serializes");
    out.push('\n');
    out
}
