//! Exact evaluation of stepwise-decomposable influence diagrams by
//! condensation into a chain MDP, with incremental value-of-perfect-information
//! queries.

pub mod condense;
pub mod diagram;
pub mod error;
pub mod factor;
pub mod fixtures;
pub mod generate;
pub mod graph;
pub mod inference;
pub mod mdp;
pub mod oracle;
pub mod transform;
pub mod vpi;

pub use diagram::{DiagramBuilder, InfluenceDiagram, NodeIdx, NodeKind, Policy};
pub use error::{Error, Result};
