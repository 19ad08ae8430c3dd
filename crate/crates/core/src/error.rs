use thiserror::Error;

/// Errors raised by circuit construction, inference and the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("circuit has no nodes")]
    Empty,
    #[error("cycle detected through node {0}")]
    Cycle(usize),
    #[error("node {node} refers to dangling child id {child}")]
    DanglingChild { node: usize, child: usize },
    #[error("node {0} is not reachable from the root")]
    Unreachable(usize),
    #[error("root id {0} does not name a node")]
    BadRoot(usize),
    #[error("node {node}: variable index {var} out of range 1..={num_vars}")]
    VarOutOfRange { node: usize, var: i64, num_vars: usize },
    #[error("node {node}: weight sum {sum} != 1")]
    WeightSum { node: usize, sum: f64 },
    #[error("node {node}: weight {weight} outside (0, 1]")]
    WeightRange { node: usize, weight: f64 },
    #[error("zero-weight edge from node {parent} to node {child}")]
    ZeroWeight { parent: usize, child: usize },
    #[error("node {0} has no children")]
    NoChildren(usize),
    #[error("circuit is not decomposable (product node {0})")]
    NotDecomposable(usize),
    #[error("circuit is not deterministic (sum node {node})")]
    NotDeterministic { node: usize },
    #[error("determinism unverified: {num_vars} variables exceed the enumeration limit {limit}")]
    DeterminismUnverified { num_vars: usize, limit: usize },
    #[error("variable x{0} in scope is unassigned")]
    Unassigned(usize),
    #[error("evidence has zero probability")]
    ZeroEvidence,
    #[error("{what} needs {needed} variables, budget is {limit}")]
    Budget { what: &'static str, needed: usize, limit: usize },
    #[error("dimension mismatch: {0} vs {1} variables")]
    DimensionMismatch(usize, usize),
    #[error("{name}: ratio {ratio} at assignment {assignment} is outside the divergence domain")]
    Domain { name: String, assignment: String, ratio: f64 },
    #[error("pruning removed every edge (empty support)")]
    EmptySupport,
    #[error("premise violated: {0}")]
    Premise(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
