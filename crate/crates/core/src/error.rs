use thiserror::Error;

use crate::conic::SolveStatus;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The current reflection coefficients already spend the whole RIS power
    /// budget on amplified thermal noise, so no beamformer is feasible.
    #[error("reflection coefficients exhaust the RIS power budget (remaining {remaining:.3e} W)")]
    InfeasibleReflection { remaining: f64 },

    #[error("conic solver stopped with status {status:?} while {context}")]
    Solver { status: SolveStatus, context: String },

    #[error("rank-one recovery failed: gap {gap:.3e} with penalty weight {penalty:.3e}")]
    RecoveryFailed { gap: f64, penalty: f64 },

    #[error("config line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("invalid value for `{field}`: {message}")]
    ConfigValue { field: String, message: String },

    #[error("grid of {points:.3e} points exceeds the budget of {budget:.0e}; reduce the resolution to at most {max_resolution}")]
    OracleBudget {
        points: f64,
        budget: f64,
        max_resolution: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
