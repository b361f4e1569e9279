//! Experiment harness behind the `mfmc` command line.
//!
//! Every command reads a scenario (or sweep) file, runs one of the model
//! computations and writes CSV. Exit codes are part of the interface:
//! 0 success, 2 invalid input, 3 I/O failure, 4 numerical failure.

mod commands;
mod csv;
pub mod scenario;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ConfigError;
use crate::kvfile::KvError;

pub use commands::{
    cmd_cir, cmd_dump, cmd_equilibrium, cmd_pbs, cmd_run, cmd_spectral, cmd_sweep, simulate,
    Equilibrium, PbsOptions, SummaryRow, DEFAULT_TOL,
};
pub use csv::{write_cir_csv, write_pbs_csv, write_trajectory_csv};
pub use scenario::{Mode, Scenario, SweepAxis, SweepSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sweep point {index} (value {value}): {source}")]
    SweepPoint {
        index: usize,
        value: f64,
        source: ConfigError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
    #[error("{0}")]
    Numerical(String),
}

impl From<KvError> for HarnessError {
    fn from(e: KvError) -> Self {
        HarnessError::Config(ConfigError::Parse(e))
    }
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::SweepPoint { .. } | HarnessError::Invalid(_) => 2,
            HarnessError::Io { .. } => 3,
            HarnessError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}
