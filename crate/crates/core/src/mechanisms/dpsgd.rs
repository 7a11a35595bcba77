//! Full-batch DP-SGD for the covariance-fit objective
//! `min_A ||A - (1/n) sum x x^T||_F^2`.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{dp_epsilon_from_eta, mip_eta_from_dp};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::rng::{SeedStream, StreamRng};

use super::MechanismOutput;

/// Parameters whose Frobenius norm exceeds this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

const CHUNK: usize = 2048;
const PILOT_BUDGET: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Per-sample loss `||A - x x^T||_F^2`, gradient `2 (A - x x^T)`.
    #[default]
    CovarianceFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clip {
    /// Median of the per-sample gradient norms seen by a non-private pilot run.
    MedianHeuristic,
    Fixed(f64),
    /// No clipping.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdConfig {
    pub objective: Objective,
    pub steps: usize,
    pub lr: f64,
    pub clip: Clip,
    pub noise_multiplier: f64,
}

impl Default for DpSgdConfig {
    fn default() -> Self {
        Self {
            objective: Objective::CovarianceFit,
            steps: 500,
            lr: 0.4,
            clip: Clip::MedianHeuristic,
            noise_multiplier: 1.0,
        }
    }
}

/// Privacy of `steps` Gaussian steps with multiplier `z`, composed as
/// zero-concentrated DP and converted to `(epsilon, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZcdpAccounting {
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `eta` obtained by feeding `epsilon` to the pure-DP conversion; `delta`
    /// is not accounted for, so this is an unproven extension.
    pub eta: f64,
    pub eta_is_extension: bool,
}

/// `rho = steps / (2 z^2)`, `epsilon = rho + 2 sqrt(rho ln(1/delta))`, `delta = 1/n`.
pub fn zcdp_accounting(steps: usize, noise_multiplier: f64, n: usize) -> ZcdpAccounting {
    let delta = 1.0 / n as f64;
    let rho = steps as f64 / (2.0 * noise_multiplier * noise_multiplier);
    let epsilon = rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt();
    let eta = if epsilon.is_finite() {
        mip_eta_from_dp(epsilon).expect("epsilon is nonnegative")
    } else {
        0.5
    };
    ZcdpAccounting {
        rho,
        epsilon,
        delta,
        eta,
        eta_is_extension: true,
    }
}

/// Noise multiplier whose accounting lands exactly on `eta`.
pub fn noise_multiplier_for_eta(eta: f64, steps: usize, n: usize) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::validation(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    if steps == 0 || n < 2 {
        return Err(Error::validation("need at least one step and two records"));
    }
    let epsilon = dp_epsilon_from_eta(eta)?;
    let l = (n as f64).ln();
    let s = (l + epsilon).sqrt() - l.sqrt();
    let rho = s * s;
    Ok((steps as f64 / (2.0 * rho)).sqrt())
}

/// Result of [`dpsgd_train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSgdRun {
    pub output: MechanismOutput,
    /// Clipping threshold used; infinite when unclipped.
    pub clip_norm: f64,
    /// Per-sample gradient norms recorded by the pilot run (median heuristic only).
    pub pilot_norms: Vec<f64>,
    pub accounting: Option<ZcdpAccounting>,
}

/// Trains on every record of `data` starting from `A = 0`.
pub fn dpsgd_train(data: &DatasetTable, cfg: &DpSgdConfig, seed: u64) -> Result<DpSgdRun> {
    if cfg.steps == 0 {
        return Err(Error::validation("steps must be at least 1"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::validation(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if !(cfg.noise_multiplier >= 0.0 && cfg.noise_multiplier.is_finite()) {
        return Err(Error::validation("noise multiplier must be nonnegative and finite"));
    }
    let (clip, pilot_norms) = match cfg.clip {
        Clip::MedianHeuristic => {
            let (c, norms) = median_clip_norm(data, cfg.steps, cfg.lr)?;
            (Some(c), norms)
        }
        Clip::Fixed(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::validation(format!("clip norm must be positive, got {c}")));
            }
            (Some(c), Vec::new())
        }
        Clip::Unbounded => (None, Vec::new()),
    };
    if clip.is_none() && cfg.noise_multiplier > 0.0 {
        return Err(Error::validation("noise requires a finite clip norm"));
    }
    let n = data.len();
    let mut rng = SeedStream::new(seed).named("dpsgd").rng();
    let params = descend(data, cfg.steps, cfg.lr, clip, cfg.noise_multiplier, Some(&mut rng), None)?;
    let clip_norm = clip.unwrap_or(f64::INFINITY);
    let noise_scale = clip.map_or(0.0, |c| cfg.noise_multiplier * c / n as f64);
    let accounting = (cfg.noise_multiplier > 0.0).then(|| zcdp_accounting(cfg.steps, cfg.noise_multiplier, n));
    let mut output = MechanismOutput::new(params, "dpsgd/covariance", seed, noise_scale)?
        .with_meta("steps", cfg.steps)
        .with_meta("lr", cfg.lr)
        .with_meta("noise_multiplier", cfg.noise_multiplier)
        .with_meta("clip_norm", clip.map(|c| c.to_string()).unwrap_or_else(|| "inf".into()));
    if let Some(acc) = &accounting {
        output = output.with_meta("accounting", acc);
    }
    Ok(DpSgdRun {
        output,
        clip_norm,
        pilot_norms,
        accounting,
    })
}

/// Median of the unclipped per-sample gradient norms of a non-private run,
/// sampled every `max(1, ceil(steps n / 1e6))` steps. Returns the median and
/// the recorded norms.
pub fn median_clip_norm(data: &DatasetTable, steps: usize, lr: f64) -> Result<(f64, Vec<f64>)> {
    let stride = ((steps as f64 * data.len() as f64 / PILOT_BUDGET).ceil() as usize).max(1);
    let mut norms = Vec::new();
    descend(data, steps, lr, None, 0.0, None, Some((stride, &mut norms)))?;
    let mut sorted = norms.clone();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    };
    if !(median > 0.0) {
        return Err(Error::validation("median gradient norm is zero; cannot calibrate clipping"));
    }
    Ok((median, norms))
}

fn descend(
    data: &DatasetTable,
    steps: usize,
    lr: f64,
    clip: Option<f64>,
    noise_multiplier: f64,
    mut rng: Option<&mut StreamRng>,
    mut record: Option<(usize, &mut Vec<f64>)>,
) -> Result<Vec<f64>> {
    let d = data.dim();
    let dd = d * d;
    let n = data.len() as f64;
    let mut a = vec![0.0; dd];
    let noise = match clip {
        Some(c) if noise_multiplier > 0.0 => {
            Some(Normal::new(0.0, noise_multiplier * c / n).map_err(|e| Error::validation(e.to_string()))?)
        }
        _ => None,
    };
    for step in 0..steps {
        let keep_norms = record.as_ref().is_some_and(|(stride, _)| step % stride == 0);
        let parts: Vec<(Vec<f64>, Vec<f64>)> = data
            .values()
            .par_chunks(CHUNK * d)
            .map(|block| {
                let mut sum = vec![0.0; dd];
                let mut norms = Vec::new();
                let mut g = vec![0.0; dd];
                for x in block.chunks_exact(d) {
                    let mut sq = 0.0;
                    for r in 0..d {
                        for c in 0..d {
                            let v = 2.0 * (a[r * d + c] - x[r] * x[c]);
                            g[r * d + c] = v;
                            sq += v * v;
                        }
                    }
                    let norm = sq.sqrt();
                    if keep_norms {
                        norms.push(norm);
                    }
                    let factor = match clip {
                        Some(c) if norm > c => c / norm,
                        _ => 1.0,
                    };
                    for (s, v) in sum.iter_mut().zip(&g) {
                        *s += factor * v;
                    }
                }
                (sum, norms)
            })
            .collect();
        let mut grad = vec![0.0; dd];
        for (sum, norms) in parts {
            for (g, s) in grad.iter_mut().zip(sum) {
                *g += s;
            }
            if let Some((_, out)) = record.as_mut() {
                out.extend(norms);
            }
        }
        for (ai, gi) in a.iter_mut().zip(&grad) {
            let mut g = gi / n;
            if let (Some(dist), Some(r)) = (&noise, rng.as_deref_mut()) {
                g += dist.sample(r);
            }
            *ai -= lr * g;
        }
        let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !frob.is_finite() || frob > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { step });
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::SecondMoment;
    use crate::algorithm::BaseAlgorithm;
    use rand_distr::StandardNormal;
    use rand::Rng;

    fn gaussian_data(n: usize, d: usize, seed: u64) -> DatasetTable {
        let mut rng = SeedStream::new(seed).rng();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| (j as f64 + 1.0) * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        DatasetTable::from_rows(&rows).unwrap()
    }

    #[test]
    fn noiseless_unclipped_converges_to_second_moment() {
        let data = gaussian_data(2000, 3, 1);
        let cfg = DpSgdConfig {
            clip: Clip::Unbounded,
            noise_multiplier: 0.0,
            ..DpSgdConfig::default()
        };
        let run = dpsgd_train(&data, &cfg, 0).unwrap();
        let s = SecondMoment.evaluate(&data, &data.full_mask());
        let err: f64 = run.output.theta_hat.iter().zip(&s).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / scale < 1e-6, "{}", err / scale);
        assert!(run.accounting.is_none());
    }

    #[test]
    fn median_heuristic_uses_pilot_median() {
        let data = gaussian_data(501, 2, 2);
        let cfg = DpSgdConfig {
            steps: 20,
            noise_multiplier: 0.5,
            ..DpSgdConfig::default()
        };
        let run = dpsgd_train(&data, &cfg, 3).unwrap();
        let mut norms = run.pilot_norms.clone();
        assert_eq!(norms.len(), 20 * 501);
        norms.sort_by(f64::total_cmp);
        let mid = norms.len() / 2;
        assert_eq!(run.clip_norm, 0.5 * (norms[mid - 1] + norms[mid]));
    }

    #[test]
    fn tiny_clip_scales_every_gradient_to_clip_norm() {
        // One step from A = 0 with clip C: each clipped gradient has norm C,
        // so the update is -lr * mean of unit directions times C.
        let data = DatasetTable::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap();
        let c = 1e-3;
        let cfg = DpSgdConfig {
            steps: 1,
            lr: 1.0,
            clip: Clip::Fixed(c),
            noise_multiplier: 0.0,
            ..DpSgdConfig::default()
        };
        let a = dpsgd_train(&data, &cfg, 0).unwrap().output.theta_hat;
        // Per-sample gradients -2 e1e1^T (norm 2) and -8 e2e2^T (norm 8).
        assert!((a[0] - c / 2.0).abs() < 1e-15);
        assert!((a[3] - c / 2.0).abs() < 1e-15);
        assert_eq!((a[1], a[2]), (0.0, 0.0));
    }

    #[test]
    fn divergence_reports_step() {
        let data = gaussian_data(100, 2, 3);
        let cfg = DpSgdConfig {
            lr: 5.0,
            clip: Clip::Unbounded,
            noise_multiplier: 0.0,
            ..DpSgdConfig::default()
        };
        match dpsgd_train(&data, &cfg, 0) {
            Err(Error::Divergence { step }) => assert!(step > 0 && step < 100),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn accounting_inverts() {
        for eta in [0.01, 0.1, 0.3, 0.45] {
            let z = noise_multiplier_for_eta(eta, 500, 50_000).unwrap();
            let acc = zcdp_accounting(500, z, 50_000);
            assert!((acc.eta - eta).abs() < 1e-12, "{eta}: {}", acc.eta);
            assert!(acc.eta_is_extension);
            assert_eq!(acc.delta, 1.0 / 50_000.0);
        }
        assert!(noise_multiplier_for_eta(0.5, 500, 100).is_err());
    }

    #[test]
    fn invalid_configs() {
        let data = gaussian_data(10, 2, 4);
        let bad = |cfg: DpSgdConfig| dpsgd_train(&data, &cfg, 0).is_err();
        assert!(bad(DpSgdConfig { steps: 0, ..DpSgdConfig::default() }));
        assert!(bad(DpSgdConfig { lr: 0.0, ..DpSgdConfig::default() }));
        assert!(bad(DpSgdConfig { clip: Clip::Unbounded, ..DpSgdConfig::default() }));
        assert!(bad(DpSgdConfig { clip: Clip::Fixed(0.0), ..DpSgdConfig::default() }));
    }

    #[test]
    fn seeded_runs_repeat() {
        let data = gaussian_data(300, 2, 5);
        let cfg = DpSgdConfig { steps: 30, ..DpSgdConfig::default() };
        assert_eq!(dpsgd_train(&data, &cfg, 9).unwrap(), dpsgd_train(&data, &cfg, 9).unwrap());
    }
}
