//! Configuration, persistence and command orchestration.

mod commands;
mod config;
mod csv;
mod manifest;
mod snapshot;

pub use commands::{
    comparison_norm, run_command, weight_check_half_width, Command, CommandOutcome, RunOptions, MASS_DRIFT_TOLERANCE,
    MIN_ORDER, REPULSION_SAMPLES, VIRIAL_TOLERANCE,
};
pub use config::{
    ExperimentConfig, GridConfig, InitialConfig, IntegratorConfig, MorawetzConfig, OutputConfig, PotentialConfig,
    PotentialKind,
};
pub use csv::{fmt_f64, table, timeseries, TIMESERIES_HEADER};
pub use manifest::{sha256_hex, ArtifactWriter, Conventions, FileEntry, RunManifest, RunStatus, Versions, MANIFEST_FILE};
pub use snapshot::{decode, encode, read_snapshot, write_snapshot, FORMAT_VERSION, MAGIC};
