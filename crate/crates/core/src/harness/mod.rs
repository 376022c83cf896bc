//! Experiment configs, the CSV schema, grid sweeps and plot data.

pub mod config;
pub mod experiment;
pub mod plot;
pub mod record;

pub use config::{Algorithm, ExperimentConfig, ExperimentKind};
pub use experiment::{bounds_table, run_experiment, run_to_writer, BoundsInputs, BoundsRow, ExperimentOutput, PointSummary};
pub use record::{read_records, write_records, ExperimentRecord, TrialTag};
