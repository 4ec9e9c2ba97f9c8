use thiserror::Error;

/// Errors produced by graph construction, action-set handling, control
/// evaluation and simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph needs at least {min} agents, got {found}")]
    TooFewAgents { min: usize, found: usize },

    #[error("edge ({i}, {j}) references an agent outside 1..={n}")]
    EndpointOutOfRange { i: usize, j: usize, n: usize },

    #[error("self-loop at agent {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("action-set scale must be positive, got {0}")]
    InvalidScale(f64),

    #[error("invalid action set: {0}")]
    InvalidActionSet(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Voronoi cell of the zero action is unbounded")]
    UnboundedCell,

    #[error("expected one action set per agent ({expected}), found {found}")]
    AgentSetMismatch { expected: usize, found: usize },

    #[error("formation bound degenerates (c2 = 0): delta = {delta}, c1 = {c1}")]
    DegenerateBound { delta: f64, c1: f64 },

    #[error("non-finite state at step {step}")]
    NumericalDivergence { step: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no initial condition inside the formation basin after {attempts} draws")]
    BasinNotReached { attempts: usize },

    #[error("sample {index} (seed {seed:#018x}) failed: {source}")]
    SampleFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalDivergence { .. } => true,
            Error::SampleFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
