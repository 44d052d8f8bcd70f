//! Experiment driver, metrics and report writers.

pub mod experiment;
pub mod metrics;
pub mod report;

pub use experiment::{
    run_experiment, run_with_inputs, ExperimentConfig, ExperimentError, ExperimentInputs, ExperimentReport,
    ExperimentRun, QueryRow,
};
pub use metrics::{median, precision, recall, MetricError};
pub use report::emit_report;
