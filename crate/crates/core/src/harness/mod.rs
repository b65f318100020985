//! Declarative experiments: configs, seeded replications, the centralized
//! baseline and plot-data emission.

mod config;
mod plot;
mod runner;

pub use config::{
    ExperimentConfig, MitigationSpec, PartitionSpec, PartyCounts, RowSpec, TrainSection,
};
pub use plot::{emit_plot_data, Layout};
pub use runner::{
    build_parties, centralized_training_set, global_split, run_baseline, run_baseline_on,
    run_experiment, run_experiment_on, ExperimentResult, MetricSummary, PartyResult,
    ReplicationResult, RunKind, Trace, GLOBAL_METRICS,
};
