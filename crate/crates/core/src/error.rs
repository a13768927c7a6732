use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed incidence matrix: {reason}")]
    MalformedIncidence { reason: String },

    #[error("formation graph is disconnected")]
    DisconnectedGraph,

    #[error("unrealizable displacements: cycle residual {residual:e} exceeds {tolerance:e}")]
    UnrealizableDisplacements { residual: f64, tolerance: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{name} must be strictly positive, got {value}")]
    NonpositiveInput { name: &'static str, value: f64 },

    #[error("agent {agent} has no message for edge {edge}")]
    MissingNeighborMessage { agent: usize, edge: usize },

    #[error("steady-state system is not positive definite")]
    SingularSystem,

    #[error("shrinkage bound violated: |r_inf - q| = {target_distance:e} > {bound:e}")]
    ShrinkBoundViolated { target_distance: f64, bound: f64 },

    #[error("non-finite state at t = {time} (component {component})")]
    UnstableStep { time: f64, component: usize },

    #[error("step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid `{field}`: {source}")]
    Validation {
        field: String,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot read {path}: {source}")]
    ReadScenario {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, source: Error) -> Self {
        Error::Validation {
            field: field.into(),
            source: Box::new(source),
        }
    }
}
