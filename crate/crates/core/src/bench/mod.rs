//! Experiment harness behind the `evofis` command line tool.

pub mod config;
pub mod run;
pub mod synth;
pub mod tables;

pub use config::{AlgorithmSpec, DataSource, ExperimentConfig};
pub use run::{
    prepare, run_algorithm, run_config_file, run_experiment, ExperimentReport, PredictionRecord,
    PreparedData, RunManifest, RunOptions, RunOutcome,
};
pub use synth::{SynthKind, SynthSeries, SynthSpec};
pub use tables::{analyze, write_stats, OutputFormat, ScoreMatrix, StatsReport};
