//! Experiment harness: configuration, orchestration, trace persistence,
//! and plot emission.

mod config;
mod plot;
mod runner;

pub use config::{parse_config, Algo, DatasetSpec, PartitionSpec, RunConfig, StepSizeSpec};
pub use plot::{emit_plots, plot_metric_list, PlotMetric, PlotSpec};
pub use runner::{resolve_dataset, run_experiment, ExperimentOutput};

pub use crate::trace::{
    parse_csv, records_to_csv, rounds_to_target, RunStatus, TraceRecord, ValMetric,
    TRACE_CSV_HEADER, TRACE_SCHEMA_VERSION,
};
