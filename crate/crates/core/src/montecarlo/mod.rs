//! Simulation designs, the replication engine and Table-1 style summaries.

mod dgp;
mod experiment;
mod render;

pub use dgp::{generate, serial_regressors, DgpKind, DgpSpec, Sample};
pub use experiment::{
    run_experiment, run_replicates, summarize, Estimator, EstimatorSummary, ExperimentOutcome,
    ReplicateOutcome, SimulationConfig, SimulationSummary,
};
pub use render::{
    merge_report, parse_csv, render_csv, render_markdown, render_summary, Format, Panel,
};
