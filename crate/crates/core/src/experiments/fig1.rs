//! Noise level versus privacy level on the pathological dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{pathological_sensitivity, pathological_variance, VarianceMethod};
use crate::noise::{scale_formula, NoiseConstant};

use super::config::ExperimentConfig;
use super::results::ResultRow;

/// Largest `n` for which variance and sensitivity are enumerated exactly.
pub const EXACT_LIMIT: usize = 20;
pub const DEFAULT_HYBRID_SAMPLES: usize = 200_000;

pub const MIP_METHOD: &str = "mip_M2";
pub const DP_METHOD: &str = "dp_laplace";

/// Spread and sensitivity of the pathological dataset at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Level {
    pub n: usize,
    /// Standard deviation used for the MIP curve; from the 4-SE variance
    /// bound when not exact.
    pub sigma: f64,
    pub variance: f64,
    pub variance_exact: bool,
    pub sensitivity: f64,
    pub sensitivity_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Report {
    pub rows: Vec<ResultRow>,
    pub levels: Vec<Fig1Level>,
}

/// `(6.16/eta)^2 sigma`.
pub fn mip_noise_level(eta: f64, sigma: f64) -> f64 {
    scale_formula(eta, 2.0, NoiseConstant::NonIsotropic.value()) * sigma
}

/// `sensitivity / ln((1 + 2 eta)/(1 - 2 eta))`; zero at `eta = 1/2`.
pub fn dp_noise_level(eta: f64, sensitivity: f64) -> f64 {
    let epsilon = ((1.0 + 2.0 * eta) / (1.0 - 2.0 * eta)).ln();
    sensitivity / epsilon
}

pub fn fig1_level(n: usize, hybrid_samples: usize, seed: u64) -> Result<Fig1Level> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::validation(format!("n must be even and at least 4, got {n}")));
    }
    let method = if n <= EXACT_LIMIT {
        VarianceMethod::Exact
    } else {
        VarianceMethod::Hybrid {
            samples_per_stratum: hybrid_samples,
            seed,
        }
    };
    let var = pathological_variance(n, method)?;
    let (sensitivity, sensitivity_exact) = pathological_sensitivity(n, EXACT_LIMIT)?;
    Ok(Fig1Level {
        n,
        sigma: var.variance_upper.sqrt(),
        variance: var.variance,
        variance_exact: var.exact,
        sensitivity,
        sensitivity_exact,
    })
}

/// Both curves for every `n` over the eta grid. Extras: `hybrid_samples`.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Fig1Report> {
    cfg.validate()?;
    if let Some(n) = cfg.n_values.iter().find(|n| **n < 4 || **n % 2 != 0) {
        return Err(Error::validation(format!("n must be even and at least 4, got {n}")));
    }
    let samples = cfg.extra("hybrid_samples", DEFAULT_HYBRID_SAMPLES)?;
    let levels = cfg
        .n_values
        .par_iter()
        .map(|&n| fig1_level(n, samples, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for level in &levels {
        for &eta in &cfg.eta_grid {
            rows.push(ResultRow::new(MIP_METHOD, eta, level.n, 0, mip_noise_level(eta, level.sigma)));
            rows.push(ResultRow::new(DP_METHOD, eta, level.n, 0, dp_noise_level(eta, level.sensitivity)));
        }
    }
    Ok(Fig1Report { rows, levels })
}

impl Fig1Report {
    /// Whether the DP curve lies above the MIP curve at every eta `>= eta_min`.
    pub fn mip_below_dp(&self, n: usize, eta_min: f64) -> Option<bool> {
        let level = self.levels.iter().find(|l| l.n == n)?;
        let etas: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.n == n && r.method == MIP_METHOD && r.eta >= eta_min)
            .map(|r| r.eta)
            .collect();
        Some(
            etas.iter()
                .all(|&e| mip_noise_level(e, level.sigma) < dp_noise_level(e, level.sensitivity)),
        )
    }

    /// Smallest `n` at which MIP is below DP for every eta `>= eta_min`.
    pub fn crossover(&self, eta_min: f64) -> Option<usize> {
        let mut ns: Vec<usize> = self.levels.iter().map(|l| l.n).collect();
        ns.sort_unstable();
        ns.into_iter().find(|&n| self.mip_below_dp(n, eta_min) == Some(true))
    }
}
