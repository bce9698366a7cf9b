//! Metrics, the experiment-matrix runner and result reports.

pub mod experiment;
pub mod metrics;
pub mod report;

pub use experiment::{
    best_per_validation, run_experiment, run_experiment_matrix, select_best, DatasetRegistry,
    ExperimentResult, ExperimentSpec, SelectBy,
};
pub use metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
pub use report::{
    parse_report_csv, render_report, render_rows, report_rows, ReportFormat, ReportRow,
};
