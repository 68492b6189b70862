use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema error at node `{node}`: {message}")]
    Schema { node: String, message: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("diagram is not regular: {0}")]
    NotRegular(String),

    #[error("diagram is not stepwise-decomposable: {0}")]
    NotSdid(String),

    #[error("diagram is not smooth at decision `{0}`")]
    NotSmooth(String),

    #[error("reversing {from} -> {to} would create a directed cycle")]
    CycleWouldForm { from: String, to: String },

    #[error("node `{0}` is not a random node")]
    NotRandom(String),

    #[error("node `{0}` is not a decision node")]
    NotDecision(String),

    #[error("node `{node}` cannot be made a root: {reason}")]
    NotRootable { node: String, reason: String },

    #[error("frame mismatch on variable {0}")]
    FrameMismatch(usize),

    #[error("policy does not match the diagram: {0}")]
    PolicyArityMismatch(String),

    #[error("policy space has {count} policies, cap is {cap}")]
    TooLarge { count: u128, cap: u128 },

    #[error("malformed condensation: {0}")]
    MalformedCondensation(String),

    #[error("cached condensation does not belong to this diagram: {0}")]
    ProvenanceMismatch(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid diagram: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn schema(node: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            node: node.into(),
            message: message.into(),
        }
    }
}
