//! Covariance fitting on Gaussian samples: raw, MIP and DP-SGD releases.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{second_moment, BaseAlgorithm};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::mechanisms::{dpsgd_train, median_clip_norm, noise_multiplier_for_eta, privatize_mip, Clip, DpSgdConfig, MipParams};
use crate::moments::{estimate_moments, MomentEstimator, ResampleSize};
use crate::noise::{MomentProfile, NoiseVariant};
use crate::rng::SeedStream;
use crate::subset::SubsetMask;

use super::config::ExperimentConfig;
use super::linalg::{check_spd, fit_covariance_gd, principal_sqrt, random_rotation, relative_error};
use super::results::ResultRow;

pub const RAW_METHOD: &str = "raw";
pub const DPSGD_METHOD: &str = "dpsgd";

pub fn mip_method(order: u32) -> String {
    format!("mip_M{order}")
}

/// Gradient-descent fit of `||A - (1/k) sum x x^T||_F^2` from `A = 0`.
#[derive(Debug, Clone, Copy)]
pub struct CovarianceFit {
    pub lr: f64,
    pub steps: usize,
}

impl Default for CovarianceFit {
    fn default() -> Self {
        Self { lr: 0.4, steps: 500 }
    }
}

impl BaseAlgorithm for CovarianceFit {
    fn name(&self) -> &str {
        "covariance-fit"
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        let s = second_moment(data, subset);
        // A diverging fit reports non-finite entries, which callers reject.
        fit_covariance_gd(&s, self.lr, self.steps).unwrap_or_else(|_| vec![f64::NAN; s.len()])
    }
}

/// Settings of [`run_synth`] beyond the shared config fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSettings {
    /// Eigenvalues of the ground-truth covariance, one per dimension.
    pub eigenvalues: Vec<f64>,
    pub resamples: usize,
    pub lr: f64,
    pub steps: usize,
    /// Noise sampler of the MIP releases.
    pub variant: NoiseVariant,
}

impl SynthSettings {
    /// Extras `eigenvalues`, `B`, `lr`, `steps`, `variant`. Default
    /// eigenvalues are `1, 2, 5` for `d = 3` and `1, ..., d` otherwise; the
    /// default variant is the Laplace-radius sampler.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let eigenvalues = match cfg.extra_str("eigenvalues") {
            Some(list) => list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::validation(format!("cannot parse eigenvalue `{v}`")))
                })
                .collect::<Result<Vec<_>>>()?,
            None if cfg.d == 3 => vec![1.0, 2.0, 5.0],
            None => (1..=cfg.d).map(|i| i as f64).collect(),
        };
        if eigenvalues.len() != cfg.d {
            return Err(Error::validation(format!(
                "{} eigenvalues given for d = {}",
                eigenvalues.len(),
                cfg.d
            )));
        }
        Ok(Self {
            eigenvalues,
            resamples: cfg.extra("B", 128)?,
            lr: cfg.extra("lr", 0.4)?,
            steps: cfg.extra("steps", 500)?,
            variant: cfg.extra("variant", NoiseVariant::PaperLiteral)?,
        })
    }
}

/// Per-run quantities that every eta of the run shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthRun {
    pub run: usize,
    pub clip_norm: f64,
    pub profiles: Vec<MomentProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthReport {
    pub rows: Vec<ResultRow>,
    /// Ground-truth covariance, row-major.
    pub covariance: Vec<f64>,
    pub settings: SynthSettings,
    pub runs: Vec<SynthRun>,
    /// DP-SGD noise multiplier per eta of the grid.
    pub noise_multipliers: Vec<f64>,
}

/// `Q diag(eigenvalues) Q^T` with `Q` a seeded random rotation.
pub fn ground_truth_covariance(eigenvalues: &[f64], stream: &SeedStream) -> Result<DMatrix<f64>> {
    let d = eigenvalues.len();
    let q = random_rotation(d, &mut stream.named("rotation").rng());
    let sigma = &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigenvalues)) * q.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    check_spd(&sigma)?;
    Ok(sigma)
}

/// `n` draws from `N(0, covariance)`.
pub fn sample_gaussian(covariance: &DMatrix<f64>, n: usize, stream: &SeedStream) -> Result<DatasetTable> {
    check_spd(covariance)?;
    let d = covariance.nrows();
    let root = principal_sqrt(covariance);
    const BLOCK: usize = 4096;
    let rows: Vec<Vec<f64>> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = stream.child(b as u64).rng();
            let len = BLOCK.min(n - b * BLOCK);
            let root = &root;
            (0..len)
                .map(|_| {
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    (root * z).iter().copied().collect::<Vec<f64>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    DatasetTable::from_rows(&rows)
}

/// Relative Frobenius errors of the raw fit, of MIP releases for each order
/// in `M_set`, and of DP-SGD at the matching eta.
///
/// Moment profiles are estimated once per run and order over half-splits of
/// the full sample; the clipping norm once per run from a non-private pilot.
pub fn run_synth(cfg: &ExperimentConfig) -> Result<SynthReport> {
    cfg.validate()?;
    if cfg.n_samples < 1000 {
        return Err(Error::validation(format!("n_samples must be at least 1000, got {}", cfg.n_samples)));
    }
    if let Some(e) = cfg.eta_grid.iter().find(|e| **e >= 0.5) {
        return Err(Error::validation(format!("DP-SGD needs eta < 1/2, got {e}")));
    }
    let settings = SynthSettings::from_config(cfg)?;
    let root = SeedStream::new(cfg.seed);
    let covariance = ground_truth_covariance(&settings.eigenvalues, &root.named("covariance"))?;
    let truth: Vec<f64> = covariance.transpose().iter().copied().collect();
    let n = cfg.n_samples;
    let noise_multipliers = cfg
        .eta_grid
        .iter()
        .map(|&eta| noise_multiplier_for_eta(eta, settings.steps, n))
        .collect::<Result<Vec<_>>>()?;
    let fit = CovarianceFit {
        lr: settings.lr,
        steps: settings.steps,
    };

    let per_run = (0..cfg.runs)
        .into_par_iter()
        .map(|run| -> Result<(SynthRun, Vec<ResultRow>)> {
            let stream = root.child(run as u64);
            let data = sample_gaussian(&covariance, n, &stream.named("data"))?;
            let raw = fit.evaluate(&data, &data.full_mask());
            let mut rows = vec![ResultRow::new(RAW_METHOD, 0.0, n, run, relative_error(&raw, &truth))];
            let profiles = cfg
                .m_set
                .iter()
                .map(|&order| {
                    let est = MomentEstimator {
                        size: ResampleSize::HalfOfData,
                        ..MomentEstimator::new(settings.resamples, order)
                    };
                    let s = stream.named(&format!("moments_M{order}"));
                    Ok(estimate_moments(&data, &data.full_mask(), &fit, &est, &s)?.profile)
                })
                .collect::<Result<Vec<_>>>()?;
            let (clip_norm, _) = median_clip_norm(&data, settings.steps, settings.lr)?;
            let cells = cfg
                .eta_grid
                .par_iter()
                .enumerate()
                .map(|(i, &eta)| -> Result<Vec<ResultRow>> {
                    let cell = stream.child(i as u64);
                    let mut out = Vec::new();
                    for (order, profile) in cfg.m_set.iter().zip(&profiles) {
                        let method = mip_method(*order);
                        let params = MipParams {
                            profile: Some(profile.clone()),
                            variant: settings.variant,
                            ..MipParams::new(eta, *order)
                        };
                        let rel = privatize_mip(&data, &fit, &params, cell.named(&method).key())?;
                        out.push(ResultRow::new(method, eta, n, run, relative_error(&rel.theta_hat, &truth)));
                    }
                    let dp = DpSgdConfig {
                        steps: settings.steps,
                        lr: settings.lr,
                        clip: Clip::Fixed(clip_norm),
                        noise_multiplier: noise_multipliers[i],
                        ..DpSgdConfig::default()
                    };
                    let dp = dpsgd_train(&data, &dp, cell.named(DPSGD_METHOD).key())?;
                    out.push(ResultRow::new(
                        DPSGD_METHOD,
                        eta,
                        n,
                        run,
                        relative_error(&dp.output.theta_hat, &truth),
                    ));
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            rows.extend(cells.into_iter().flatten());
            Ok((SynthRun { run, clip_norm, profiles }, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (r, rs) in per_run {
        runs.push(r);
        rows.extend(rs);
    }
    Ok(SynthReport {
        rows,
        covariance: truth,
        settings,
        runs,
        noise_multipliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Command;
    use crate::moments::mean_se;

    #[test]
    fn ground_truth_has_requested_spectrum() {
        let s = ground_truth_covariance(&[1.0, 2.0, 5.0], &SeedStream::new(0)).unwrap();
        let mut eig: Vec<f64> = s.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip([1.0, 2.0, 5.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((s[(0, 1)]).abs() > 1e-3, "covariance should not be diagonal");
        assert!(ground_truth_covariance(&[1.0, -1.0], &SeedStream::new(0)).is_err());
    }

    #[test]
    fn samples_match_covariance() {
        let s = ground_truth_covariance(&[1.0, 2.0, 5.0], &SeedStream::new(1)).unwrap();
        let data = sample_gaussian(&s, 200_000, &SeedStream::new(2)).unwrap();
        let m = second_moment(&data, &data.full_mask());
        let truth: Vec<f64> = s.iter().copied().collect();
        assert!(relative_error(&m, &truth) < 0.02);
    }

    #[test]
    fn gd_fit_reaches_second_moment() {
        let data = DatasetTable::from_rows(&[[1.0, 2.0], [0.0, 1.0], [3.0, -1.0]]).unwrap();
        let fit = CovarianceFit::default().evaluate(&data, &data.full_mask());
        let s = second_moment(&data, &data.full_mask());
        assert!(relative_error(&fit, &s) < 1e-12);
    }

    #[test]
    fn small_run_is_reproducible_and_ordered() {
        let mut cfg = ExperimentConfig::defaults(Command::Synth);
        cfg.n_samples = 4000;
        cfg.runs = 2;
        cfg.eta_grid = vec![0.1, 0.4];
        cfg.m_set = vec![2, 6];
        cfg.extras.insert("B".into(), "32".into());
        cfg.extras.insert("steps".into(), "60".into());
        let a = run_synth(&cfg).unwrap();
        let b = run_synth(&cfg).unwrap();
        assert_eq!(a, b);
        // raw + (2 MIP + DP) per eta, per run
        assert_eq!(a.rows.len(), 2 * (1 + 2 * 3));
        let raw: Vec<f64> = a.rows.iter().filter(|r| r.method == RAW_METHOD).map(|r| r.value).collect();
        let dp: Vec<f64> = a.rows.iter().filter(|r| r.method == DPSGD_METHOD).map(|r| r.value).collect();
        assert!(mean_se(&raw).0 < 0.2);
        assert!(mean_se(&raw).0 < mean_se(&dp).0);
    }

    #[test]
    fn rejects_small_or_boundary_configs() {
        let mut cfg = ExperimentConfig::defaults(Command::Synth);
        cfg.n_samples = 10;
        assert!(run_synth(&cfg).is_err());
        let mut cfg = ExperimentConfig::defaults(Command::Synth);
        cfg.eta_grid = vec![0.5];
        assert!(run_synth(&cfg).is_err());
        let mut cfg = ExperimentConfig::defaults(Command::Synth);
        cfg.extras.insert("eigenvalues".into(), "1, 2".into());
        assert!(run_synth(&cfg).is_err());
    }
}
