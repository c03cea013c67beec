use thiserror::Error;

/// Errors produced by the simulation, optimization, and scenario layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Epidemic parameters violate an invariant (positivity, stability guard).
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A compartment state is out of bounds or not normalized.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A policy schedule or intensity set violates its invariants.
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    /// Cost weights violate kappa >= 0, eta >= 0, kappa + eta <= 1, or a
    /// top-layer region was given weights with kappa + eta != 1.
    #[error("invalid cost weights: {0}")]
    InvalidWeights(String),

    /// Vector/matrix sizes do not line up (regions vs. excitation matrix rows).
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Herd immunity is undefined for r0 <= 1 (infections decline on their own).
    #[error("no epidemic: herd threshold undefined for r0 = {r0} <= 1")]
    NoEpidemic { r0: f64 },

    /// The region tree is malformed (unknown parent, cycle, leaf without state).
    #[error("invalid region tree: {0}")]
    InvalidTree(String),

    /// The search space exceeds the configured guard limit.
    #[error("search space of {size} schedules exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    /// No schedule satisfied the herd constraint.
    #[error("no feasible schedule among the {explored} explored; widen epsilon or the intensity set")]
    InfeasibleOptimization { explored: u64 },

    /// A scenario file could not be read or parsed.
    #[error("cannot parse scenario {path}: {message}")]
    ScenarioParse { path: String, message: String },

    /// A scenario parsed but violates a documented invariant.
    #[error("invalid scenario field `{field}`: {message}")]
    ScenarioValidation { field: String, message: String },

    /// Two run reports cannot be compared (different region sets).
    #[error("reports are not comparable: {0}")]
    MismatchedReports(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code the CLI maps this error to.
    ///
    /// 2 = parse/validation error, 3 = infeasible optimization,
    /// 4 = runtime guard tripped. Infeasibility is reported through
    /// [`crate::optimizer::OptimizerResult::feasible`] rather than an error,
    /// so only the CLI produces exit code 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleOptimization { .. } => 3,
            Error::SearchSpaceTooLarge { .. } => 4,
            _ => 2,
        }
    }
}
