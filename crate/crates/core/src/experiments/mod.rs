//! Experiment runners, result emission and the command-line interface.

pub mod cli;
pub mod config;
pub mod fig1;
pub mod linalg;
pub mod results;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{config_hash, linspace, parse_key_values, Command, ExperimentConfig};
pub use fig1::{dp_noise_level, mip_noise_level, run_fig1, Fig1Level, Fig1Report};
pub use linalg::{check_spd, covariance_gradient, fit_covariance_gd, principal_sqrt, psd_sqrt, random_rotation, relative_error};
pub use results::{emit_results, summarize, to_csv, EmittedFiles, ResultRow, SummaryRow};
pub use synth::{ground_truth_covariance, run_synth, sample_gaussian, CovarianceFit, SynthReport, SynthSettings};

/// Provenance written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the configuration text, or of the serialized defaults when
    /// no file was given.
    pub config_hash: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: Command, seed: u64, config_hash: String) -> Self {
        Self {
            command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash,
            outputs: Vec::new(),
        }
    }

    /// Writes `manifest.json` into `dir` and records it as an output.
    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("manifest.json");
        self.outputs.push(path.clone());
        std::fs::write(&path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
