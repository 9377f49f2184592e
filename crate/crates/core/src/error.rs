use thiserror::Error;

pub type Result<T, E = QadError> = std::result::Result<T, E>;

/// Every failure the simulator, the oracles and the front end can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QadError {
    #[error("value {value} outside representable range [{min}, {max}]")]
    Overflow { value: f64, min: f64, max: f64 },

    #[error("{primitive} is undefined at {value}")]
    Domain { primitive: String, value: f64 },

    #[error("register r{register} must hold all zeros before a transfer")]
    ResetRequired { register: usize },

    #[error("destination width {dst} is narrower than source width {src}")]
    Width { src: usize, dst: usize },

    #[error("ancilla pool exhausted: needed {needed}, available {available}")]
    AncillaExhausted { needed: usize, available: usize },

    #[error("parse error at position {position}: expected one of {}", expected.join(", "))]
    Parse {
        position: usize,
        expected: Vec<String>,
    },

    #[error("invalid fixed-point format: {0}")]
    InvalidFormat(String),

    #[error("invalid register: {0}")]
    Register(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("node s_{} ({op}): {source}", node + 1)]
    AtNode {
        node: usize,
        op: String,
        source: Box<QadError>,
    },
}

/// Coarse classification used for exit codes and for comparing failures
/// between independent evaluation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorKind {
    Parse,
    Domain,
    Overflow,
    Resource,
    Usage,
}

impl QadError {
    pub fn at_node(self, node: usize, op: impl Into<String>) -> Self {
        match self {
            e @ QadError::AtNode { .. } => e,
            e => QadError::AtNode {
                node,
                op: op.into(),
                source: Box::new(e),
            },
        }
    }

    /// The innermost error, with any node annotation peeled off.
    pub fn root(&self) -> &QadError {
        match self {
            QadError::AtNode { source, .. } => source.root(),
            e => e,
        }
    }

    /// Node index attached by the engine or oracle, if any.
    pub fn node(&self) -> Option<usize> {
        match self {
            QadError::AtNode { node, .. } => Some(*node),
            _ => None,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self.root() {
            QadError::Parse { .. } => ErrorKind::Parse,
            QadError::Domain { .. } => ErrorKind::Domain,
            QadError::Overflow { .. } => ErrorKind::Overflow,
            QadError::ResetRequired { .. }
            | QadError::Width { .. }
            | QadError::AncillaExhausted { .. } => ErrorKind::Resource,
            QadError::InvalidFormat(_) | QadError::Register(_) | QadError::Config(_) => {
                ErrorKind::Usage
            }
            QadError::AtNode { .. } => unreachable!("root() strips node annotations"),
        }
    }
}
