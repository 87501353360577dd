use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent dimensions or out-of-range step index.
    #[error("model error: {0}")]
    Model(String),

    /// A covariance is not symmetric PSD, or a required factorization failed.
    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("conditioning error: {what} has condition number {condition:.3e} (limit {limit:.1e})")]
    Conditioning {
        what: String,
        condition: f64,
        limit: f64,
    },

    /// Constraint matrix is rank deficient.
    #[error("constraint error: {0}")]
    Constraint(String),

    #[error("degrees-of-freedom error at step {step}: {columns} constraint columns against {available} measurements")]
    DegreesOfFreedom {
        step: usize,
        columns: usize,
        available: usize,
    },

    #[error("no nontrivial solution: constraint rank {rank} leaves no freedom with {rows} measurements")]
    NoNontrivialSolution { rank: usize, rows: usize },

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    /// Model does not satisfy the assumptions of the requested estimator.
    #[error("regime error: {0}")]
    Regime(String),

    #[error("trial {trial}, step {step}: {source}")]
    Trial {
        trial: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario error at `{path}`: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }
}
