use std::path::{Path, PathBuf};

use mfvi::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// JSON run configuration. Every key is optional and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub f0_target: f64,
    pub f1_target: f64,
    pub n_epochs: u32,
    pub n_pairs: usize,
    pub alpha_max: f64,
    pub alpha_init: f64,
    pub tau_max: f64,
    pub p_nz_zero: f64,
    pub p_nz_one: f64,
    pub seed: u64,
    /// Hidden units of the MNIST network.
    pub hidden: usize,
    /// Use only the first this many training cases.
    pub max_train_cases: Option<usize>,
    pub max_val_cases: Option<usize>,
    pub dist: String,
    pub method: String,
    pub basis: String,
    pub d: usize,
    pub trials: usize,
    pub max_evals: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            f0_target: t.f0_target,
            f1_target: t.f1_target,
            n_epochs: t.n_epochs,
            n_pairs: t.n_pairs,
            alpha_max: t.alpha_max,
            alpha_init: t.alpha_init,
            tau_max: t.tau_max,
            p_nz_zero: t.p_nz_zero,
            p_nz_one: t.p_nz_one,
            seed: t.seed,
            hidden: 32,
            max_train_cases: None,
            max_val_cases: None,
            dist: "gauss".into(),
            method: "cross-polytope".into(),
            basis: "phi2:0".into(),
            d: 8,
            trials: 2000,
            max_evals: 256,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            f0_target: self.f0_target,
            f1_target: self.f1_target,
            n_epochs: self.n_epochs,
            n_pairs: self.n_pairs,
            alpha_max: self.alpha_max,
            alpha_init: self.alpha_init,
            tau_max: self.tau_max,
            p_nz_zero: self.p_nz_zero,
            p_nz_one: self.p_nz_one,
            seed: self.seed,
        }
    }
}
