//! Experiment configuration, execution, metrics persistence and paired
//! comparisons.

mod compare;
mod config;
mod metrics;
mod run;
mod train;

pub use compare::{compare, sign_test, ComparisonSummary, Metric};
pub use config::{load_config, EnvKindName, ExperimentConfig, Framework, MetricsFormat, Sensing};
pub use metrics::{
    read_report, write_report, Aggregate, EpisodeRow, MetricsReport, MetricsWriter, ReportHeader, Summary,
    CSV_COLUMNS,
};
pub use run::{run_experiment, run_experiment_observed, scene_model, selection_row, sweep, trajectory_row};
pub use train::{train_scene_model, TrainingSetup};
