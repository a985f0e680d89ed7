//! Experiment configuration, Monte-Carlo sweeps and the grid-search reference.

pub mod config;
pub mod oracle;
pub mod sweep;

pub use config::{load_config, parse_config, ExperimentConfig, Method, SweepPoint, SweepVariable, SystemSettings};
pub use oracle::{oracle_search, OracleGrid, OracleInstance, OracleResult};
pub use sweep::{run_sweep, write_outputs, Diagnostics, ResultRow, SummaryRow, SweepOutcome, TraceRow};
