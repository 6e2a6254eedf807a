//! Experiment configuration, single runs, replicated studies and the CSV/SVG
//! artifacts they produce.

pub mod config;
pub mod plot;
pub mod replicate;
pub mod run;
mod svg;

pub use config::{preset, Algorithm, ExperimentConfig, PRESET_NAMES};
pub use replicate::{replicate, Aggregate, ReplicateOptions};
pub use run::{run_experiment, simulate, BanditRun, Problem, RunArtifacts, RunOutput, RunSummary};
