//! Reproduction harness for the partition and stability experiments:
//! network builders with fixed seeds, MNIST ingestion, and CSV output.
//!
//! Every `run_*` function is deterministic for a fixed configuration and
//! returns the same numbers it writes, so callers never recompute anything.

pub mod config;
pub mod experiments;
pub mod idx;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{
    run_fusion_stack, run_lenet_partition, run_regions_2d, run_stability_gain, DataSource, FusionStackRun, GainRun,
    LenetRun, PartitionRow, RegionsRow, RegionsRun, StabilityRun,
};
pub use idx::{load_idx, IdxDataset, IdxError};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] unrectify::Error),
    #[error(transparent)]
    Idx(#[from] IdxError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
