use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("a graph needs at least one vertex")]
    EmptyGraph,
    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("{what}: {n} vertices exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },
    #[error("vertex set must be nonempty")]
    EmptyVertexSet,
    #[error("cannot merge a vertex with itself ({0})")]
    SelfMerge(usize),
    #[error("map is not total: domain has {dom} vertices, assignment has {len}")]
    BadAssignment { dom: usize, len: usize },
    #[error("composition mismatch: inner codomain differs from outer domain")]
    CompositionMismatch,
    #[error("expected a quotient map: {0}")]
    NotQuotient(&'static str),
    #[error("codomain mismatch between the legs of a cospan")]
    CodomainMismatch,
    #[error("comma object does not live over this base: {0}")]
    BaseMismatch(&'static str),
    #[error("not a comma arrow: {0}")]
    NotCommaArrow(&'static str),
    #[error("level {level} out of range (sequence has {len} levels)")]
    LevelOutOfRange { level: usize, len: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("pullback is empty")]
    EmptyPullback,
    #[error("prefix too shallow: no witness in the first {searched} levels")]
    PrefixTooShallow { searched: usize },
    #[error("json: {0}")]
    Json(String),
}

impl Error {
    /// Depth exhaustion is a distinguished outcome: existence holds in the limit, the prefix was
    /// just not deep enough.
    pub fn is_depth_exhausted(&self) -> bool {
        matches!(self, Error::PrefixTooShallow { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
