//! Central moments of a base algorithm over random training subsets, exact
//! sensitivity, and a dataset whose variance is tiny next to its sensitivity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{BaseAlgorithm, ReciprocalSum};
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::noise::{sigma_norm, MomentProfile};
use crate::rng::SeedStream;
use crate::subset::{
    binomial, check_capacity, fold_masks, lex_rank, random_subset_of, split_pool, SubsetMask,
    ENUMERATION_CAP,
};

/// Default lower bound applied to degenerate moment estimates.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Which subsets the bootstrap evaluates the algorithm on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleSize {
    /// Half-splits of the training set (size `floor(k/2)`).
    #[default]
    HalfOfTrain,
    /// Half-splits of the full dataset (size `floor(n/2)`), the size the
    /// released output is computed at.
    HalfOfData,
}

/// Settings for the bootstrap moment estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimator {
    pub resamples: usize,
    /// Even, at least 2.
    pub order: u32,
    /// Divide by `B - 1` instead of `B`; only for order 2.
    pub bias_corrected: bool,
    pub floor: f64,
    pub size: ResampleSize,
}

impl Default for MomentEstimator {
    fn default() -> Self {
        Self {
            resamples: 128,
            order: 2,
            bias_corrected: false,
            floor: SIGMA_FLOOR,
            size: ResampleSize::HalfOfTrain,
        }
    }
}

impl MomentEstimator {
    pub fn new(resamples: usize, order: u32) -> Self {
        Self {
            resamples,
            order,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resamples < 2 {
            return Err(Error::validation(format!(
                "at least 2 resamples are required, got {}",
                self.resamples
            )));
        }
        validate_even_order(self.order)?;
        if self.bias_corrected && self.order != 2 {
            return Err(Error::validation("the 1/(B-1) correction applies only to order 2"));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::validation("sigma floor must be positive"));
        }
        Ok(())
    }
}

pub(crate) fn validate_even_order(order: u32) -> Result<()> {
    if order < 2 || order % 2 != 0 {
        return Err(Error::validation(format!(
            "moment order must be an even integer >= 2, got {order}"
        )));
    }
    Ok(())
}

/// Result of [`estimate_moments`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub profile: MomentProfile,
    /// Coordinates whose estimate was zero and got replaced by the floor.
    pub degenerate: Vec<usize>,
    pub resamples: usize,
    pub size: ResampleSize,
}

/// Plug-in estimate `sigma_j = ((1/B) sum_i (theta_j^(i) - mean_j)^M)^(1/M)`
/// over `B` random half-splits.
///
/// `train` is the training set whose halves are resampled under
/// [`ResampleSize::HalfOfTrain`]; it is ignored under `HalfOfData`.
pub fn estimate_moments<A: BaseAlgorithm + ?Sized>(
    data: &DatasetTable,
    train: &SubsetMask,
    alg: &A,
    est: &MomentEstimator,
    stream: &SeedStream,
) -> Result<MomentEstimate> {
    est.validate()?;
    let pool = match est.size {
        ResampleSize::HalfOfTrain => train.clone(),
        ResampleSize::HalfOfData => data.full_mask(),
    };
    if pool.len() != data.len() {
        return Err(Error::validation("training mask length differs from the dataset size"));
    }
    if pool.count() < 2 {
        return Err(Error::validation("resampling pool needs at least 2 records"));
    }
    let stream = stream.named("estimate_moments");
    let outputs: Vec<Vec<f64>> = (0..est.resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let (half, _) = split_pool(&pool, &mut rng);
            alg.evaluate(data, &half)
        })
        .collect();
    let d = check_outputs(&outputs)?;
    let b = outputs.len() as f64;
    let mean = column_mean(&outputs, d);
    let denom = if est.bias_corrected { b - 1.0 } else { b };
    let m = est.order as i32;
    let mut sigma = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for j in 0..d {
        let s = outputs.iter().map(|o| (o[j] - mean[j]).powi(m)).sum::<f64>() / denom;
        let s = s.powf(1.0 / m as f64);
        if s > 0.0 && s.is_finite() {
            sigma.push(s.max(est.floor));
        } else {
            degenerate.push(j);
            sigma.push(est.floor);
        }
    }
    if !degenerate.is_empty() {
        log::warn!(
            "degenerate moment estimate for coordinates {degenerate:?} of `{}`; using floor {}",
            alg.name(),
            est.floor
        );
    }
    Ok(MomentEstimate {
        profile: MomentProfile::new(sigma, est.order)?,
        degenerate,
        resamples: est.resamples,
        size: est.size,
    })
}

fn check_outputs(outputs: &[Vec<f64>]) -> Result<usize> {
    let d = outputs.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::validation("base algorithm returned an empty vector"));
    }
    for o in outputs {
        if o.len() != d {
            return Err(Error::validation("base algorithm output dimension varies across subsets"));
        }
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("base algorithm returned a non-finite value"));
        }
    }
    Ok(d)
}

fn column_mean(outputs: &[Vec<f64>], d: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for o in outputs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= outputs.len() as f64);
    mean
}

/// Per-coordinate moments over all size-k subsets, uniformly weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub order: u32,
    pub central: bool,
    /// `E|theta_j - E theta_j|^M` when central, `E theta_j^M` otherwise.
    pub moments: Vec<f64>,
    pub mean: Vec<f64>,
    pub subsets: u64,
}

impl ExactMoments {
    /// `sigma_j = moment_j^(1/M)`, floored. Requires central moments of order >= 2.
    pub fn profile(&self) -> Result<MomentProfile> {
        if !self.central {
            return Err(Error::validation("a moment profile needs central moments"));
        }
        let inv = 1.0 / self.order as f64;
        let sigma = self.moments.iter().map(|m| m.powf(inv).max(SIGMA_FLOOR)).collect();
        MomentProfile::new(sigma, self.order)
    }
}

#[derive(Clone)]
struct Sums {
    acc: Vec<f64>,
    bad: bool,
    dim: Option<usize>,
}

/// Enumerates every size-`k` subset and returns exact moments of order `order`.
pub fn exact_moments<A: BaseAlgorithm + ?Sized>(
    data: &DatasetTable,
    alg: &A,
    k: usize,
    order: u32,
    central: bool,
) -> Result<ExactMoments> {
    let n = data.len();
    if k > n {
        return Err(Error::validation(format!("subset size {k} exceeds {n}")));
    }
    if order == 0 {
        return Err(Error::validation("moment order must be positive"));
    }
    if n > 64 {
        return Err(Error::validation("exact moments support at most 64 records"));
    }
    let count = check_capacity(n, k, ENUMERATION_CAP)?;
    let probe = alg.evaluate(data, &crate::subset::lex_unrank(n, k, 0));
    let d = probe.len();
    check_outputs(std::slice::from_ref(&probe))?;

    let pass = |f: &(dyn Fn(&[f64], &mut [f64]) + Sync)| -> Result<Vec<f64>> {
        let sums = fold_masks(
            n,
            k,
            count,
            || Sums {
                acc: vec![0.0; d],
                bad: false,
                dim: None,
            },
            |s, _, mask| {
                let out = alg.evaluate(data, mask);
                if out.len() != d || out.iter().any(|v| !v.is_finite()) {
                    s.bad = true;
                    s.dim = Some(out.len());
                    return;
                }
                f(&out, &mut s.acc);
            },
            |t, p| {
                t.bad |= p.bad;
                for (a, b) in t.acc.iter_mut().zip(p.acc) {
                    *a += b;
                }
            },
        );
        if sums.bad {
            return Err(Error::validation(
                "base algorithm returned a non-finite value or varying dimension",
            ));
        }
        Ok(sums.acc.into_iter().map(|s| s / count as f64).collect())
    };

    let mean = pass(&|o, acc| acc.iter_mut().zip(o).for_each(|(a, v)| *a += v))?;
    let m = order as i32;
    let moments = if central {
        pass(&|o, acc| {
            for ((a, v), mu) in acc.iter_mut().zip(o).zip(&mean) {
                *a += (v - mu).abs().powi(m);
            }
        })?
    } else {
        pass(&|o, acc| acc.iter_mut().zip(o).for_each(|(a, v)| *a += v.powi(m)))?
    };
    Ok(ExactMoments {
        order,
        central,
        moments,
        mean,
        subsets: count,
    })
}

/// Distance used to measure output changes between adjacent subsets.
#[derive(Debug, Clone, PartialEq)]
pub enum SensitivityNorm {
    /// Sum of absolute coordinate differences (plain absolute value for scalars).
    Abs,
    Sigma(MomentProfile),
}

/// `max |A(D) - A(D')|` over all pairs of size-`k` subsets sharing `k - 1` records.
pub fn sensitivity_exact<A: BaseAlgorithm + ?Sized>(
    data: &DatasetTable,
    alg: &A,
    k: usize,
    norm: &SensitivityNorm,
) -> Result<f64> {
    let n = data.len();
    if k == 0 || k >= n {
        return Err(Error::validation(format!(
            "adjacent subsets need 0 < k < n, got k={k}, n={n}"
        )));
    }
    if n > 64 {
        return Err(Error::validation("exact sensitivity supports at most 64 records"));
    }
    let count = check_capacity(n, k, ENUMERATION_CAP)?;
    let outputs: Vec<Vec<f64>> = (0..count)
        .into_par_iter()
        .map(|r| alg.evaluate(data, &crate::subset::lex_unrank(n, k, r)))
        .collect();
    let d = check_outputs(&outputs)?;
    if let SensitivityNorm::Sigma(p) = norm {
        if p.dim() != d {
            return Err(Error::validation("profile dimension differs from the output dimension"));
        }
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        match norm {
            SensitivityNorm::Abs => diff.iter().map(|v| v.abs()).sum(),
            SensitivityNorm::Sigma(p) => sigma_norm(&diff, p).expect("dimension checked"),
        }
    };
    let best = fold_masks(
        n,
        k,
        count,
        || 0.0_f64,
        |best, rank, mask| {
            let here = &outputs[rank as usize];
            let mut swapped = mask.clone();
            for out in mask.iter() {
                swapped.remove(out);
                for inn in (0..n).filter(|i| !mask.contains(*i)) {
                    swapped.insert(inn);
                    let other = lex_rank(&swapped);
                    if other > rank {
                        *best = best.max(dist(here, &outputs[other as usize]));
                    }
                    swapped.remove(inn);
                }
                swapped.insert(out);
            }
        },
        |t, p| *t = t.max(p),
    );
    Ok(best)
}

/// Scalar dataset `{2^0, ..., 2^(n-2)} ∪ {a}` with
/// `a = sqrt(p) - (2^(n/2-1) - 1)`, `p = 1 / C(n, n/2)`, paired with the
/// reciprocal-sum algorithm.
///
/// The subset `{2^0, ..., 2^(n/2-2), a}` maps to `1/sqrt(p)`; every other
/// size-`n/2` subset maps into `[0, 1]`.
pub fn build_pathological_dataset(n: usize) -> Result<(DatasetTable, ReciprocalSum)> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::validation(format!(
            "the pathological dataset needs an even n >= 4, got {n}"
        )));
    }
    if n > 64 {
        return Err(Error::validation("the pathological dataset supports n <= 64"));
    }
    let p = 1.0 / binomial(n, n / 2) as f64;
    let mut xs: Vec<f64> = (0..n - 1).map(|i| 2f64.powi(i as i32)).collect();
    xs.push(special_record(n, p));
    Ok((DatasetTable::from_scalars(&xs)?, ReciprocalSum))
}

fn special_record(n: usize, p: f64) -> f64 {
    p.sqrt() - (2f64.powi(n as i32 / 2 - 1) - 1.0)
}

/// The subset whose output is `1/sqrt(p)`.
pub fn pathological_special_subset(n: usize) -> Result<SubsetMask> {
    SubsetMask::from_indices(n, (0..n / 2 - 1).chain(std::iter::once(n - 1)))
}

/// How [`pathological_variance`] computes the variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceMethod {
    /// Full enumeration (subject to the enumeration cap).
    Exact,
    /// Special subset in closed form plus stratified sampling of the rest.
    Hybrid { samples_per_stratum: usize, seed: u64 },
}

/// Variance of the reciprocal-sum output over uniform size-`n/2` subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologicalVariance {
    pub n: usize,
    pub variance: f64,
    /// Equal to `variance` when exact; otherwise a bound at 4 standard errors.
    pub variance_upper: f64,
    pub std_error: f64,
    pub exact: bool,
}

pub fn pathological_variance(n: usize, method: VarianceMethod) -> Result<PathologicalVariance> {
    let (data, alg) = build_pathological_dataset(n)?;
    match method {
        VarianceMethod::Exact => {
            let m = exact_moments(&data, &alg, n / 2, 2, true)?;
            Ok(PathologicalVariance {
                n,
                variance: m.moments[0],
                variance_upper: m.moments[0],
                std_error: 0.0,
                exact: true,
            })
        }
        VarianceMethod::Hybrid {
            samples_per_stratum,
            seed,
        } => hybrid_variance(&data, samples_per_stratum, seed),
    }
}

struct Moments2 {
    m1: f64,
    m2: f64,
    se1: f64,
    se2: f64,
}

fn hybrid_variance(data: &DatasetTable, samples: usize, seed: u64) -> Result<PathologicalVariance> {
    if samples < 2 {
        return Err(Error::validation("hybrid variance needs at least 2 samples per stratum"));
    }
    let n = data.len();
    let half = n / 2;
    let p = 1.0 / binomial(n, half) as f64;
    let a = data.record(n - 1)[0];
    let powers = SubsetMask::from_indices(n, 0..n - 1)?;
    let special = pathological_special_subset(n)?;
    let stream = SeedStream::new(seed).named("pathological_variance");

    // Stratum with the special record (special subset excluded) and without it.
    let with_a = (binomial(n - 1, half - 1) - 1) as f64;
    let without_a = binomial(n - 1, half) as f64;
    let sample = |label: &str, size: usize, offset: f64| -> Moments2 {
        let s = stream.named(label);
        let draws: Vec<f64> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = s.child(i as u64).rng();
                loop {
                    let pick = random_subset_of(&powers, size, &mut rng);
                    if offset != 0.0 {
                        let mut full = pick.clone();
                        full.insert(n - 1);
                        if full == special {
                            continue;
                        }
                    }
                    let sum: f64 = pick.iter().map(|j| data.record(j)[0]).sum::<f64>() + offset;
                    break 1.0 / sum;
                }
            })
            .collect();
        stratum_moments(&draws)
    };
    let sa = sample("with", half - 1, a);
    let sb = sample("without", half, 0.0);
    let wa = with_a / (with_a + without_a);
    let wb = 1.0 - wa;
    let m1 = wa * sa.m1 + wb * sb.m1;
    let m2 = wa * sa.m2 + wb * sb.m2;
    let se1 = (wa * wa * sa.se1 * sa.se1 + wb * wb * sb.se1 * sb.se1).sqrt();
    let se2 = (wa * wa * sa.se2 * sa.se2 + wb * wb * sb.se2 * sb.se2).sqrt();

    let s = 1.0 / p.sqrt();
    let var = |m1: f64, m2: f64| p * s * s + (1.0 - p) * m2 - (p * s + (1.0 - p) * m1).powi(2);
    let variance = var(m1, m2);
    let variance_upper = var((m1 - 4.0 * se1).max(0.0), m2 + 4.0 * se2);
    // Delta-method error of the variance estimate.
    let dm1 = -2.0 * (1.0 - p) * (p * s + (1.0 - p) * m1);
    let std_error = ((dm1 * se1).powi(2) + ((1.0 - p) * se2).powi(2)).sqrt();
    Ok(PathologicalVariance {
        n,
        variance,
        variance_upper,
        std_error,
        exact: false,
    })
}

fn stratum_moments(xs: &[f64]) -> Moments2 {
    let n = xs.len() as f64;
    let m1 = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| x * x).sum::<f64>() / n;
    let v1 = xs.iter().map(|x| (x - m1).powi(2)).sum::<f64>() / (n - 1.0);
    let v2 = xs.iter().map(|x| (x * x - m2).powi(2)).sum::<f64>() / (n - 1.0);
    Moments2 {
        m1,
        m2,
        se1: (v1 / n).sqrt(),
        se2: (v2 / n).sqrt(),
    }
}

/// Sensitivity of the pathological dataset: exact by enumeration when
/// `n <= exact_limit`, otherwise the lower bound `1/sqrt(p) - 1`.
pub fn pathological_sensitivity(n: usize, exact_limit: usize) -> Result<(f64, bool)> {
    if n <= exact_limit {
        let (data, alg) = build_pathological_dataset(n)?;
        Ok((sensitivity_exact(&data, &alg, n / 2, &SensitivityNorm::Abs)?, true))
    } else {
        build_pathological_dataset(n)?;
        let p = 1.0 / binomial(n, n / 2) as f64;
        Ok((1.0 / p.sqrt() - 1.0, false))
    }
}

/// Mean and standard error of `xs`.
pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Uniform random subset of `0..n` with `k` elements, for Monte Carlo callers.
pub(crate) fn random_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> SubsetMask {
    random_subset_of(&SubsetMask::full(n), k, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{ConstantAlgorithm, FnAlgorithm, MeanQuery};
    use crate::subset::enumerate_subsets;
    use proptest::prelude::*;

    fn scalars(xs: &[f64]) -> DatasetTable {
        DatasetTable::from_scalars(xs).unwrap()
    }

    #[test]
    fn constant_algorithm_hits_floor() {
        let d = scalars(&[1.0, 2.0, 3.0, 4.0]);
        let est = estimate_moments(
            &d,
            &d.full_mask(),
            &ConstantAlgorithm(vec![7.0, 7.0]),
            &MomentEstimator::new(16, 2),
            &SeedStream::new(1),
        )
        .unwrap();
        assert_eq!(est.profile.sigma(), &[SIGMA_FLOOR, SIGMA_FLOOR]);
        assert_eq!(est.degenerate, vec![0, 1]);
    }

    #[test]
    fn odd_or_small_orders_rejected() {
        let d = scalars(&[1.0, 2.0, 3.0, 4.0]);
        let s = SeedStream::new(1);
        for m in [1, 3, 5] {
            assert!(estimate_moments(&d, &d.full_mask(), &MeanQuery, &MomentEstimator::new(8, m), &s).is_err());
        }
        assert!(estimate_moments(&d, &d.full_mask(), &MeanQuery, &MomentEstimator::new(1, 2), &s).is_err());
        let corrected = MomentEstimator {
            bias_corrected: true,
            ..MomentEstimator::new(8, 4)
        };
        assert!(estimate_moments(&d, &d.full_mask(), &MeanQuery, &corrected, &s).is_err());
    }

    #[test]
    fn bootstrap_matches_enumeration() {
        let d = scalars(&[0.0, 0.0, 1.0, 1.0]);
        let exact = exact_moments(&d, &MeanQuery, 2, 2, true).unwrap().moments[0];
        // Enumeration oracle: means 0, .5, .5, .5, .5, 1 -> variance 1/12.
        assert!((exact - 1.0 / 12.0).abs() < 1e-15);
        let est = MomentEstimator {
            size: ResampleSize::HalfOfData,
            ..MomentEstimator::new(10_000, 2)
        };
        let got = estimate_moments(&d, &d.full_mask(), &MeanQuery, &est, &SeedStream::new(3)).unwrap();
        let var = got.profile.sigma()[0].powi(2);
        // Squared deviations take values 1/4 (prob 1/3) or 0: sd of the mean is small.
        let sd = (1.0f64 / 3.0 * (0.25f64 - exact).powi(2) + 2.0 / 3.0 * exact.powi(2)).sqrt();
        assert!((var - exact).abs() < 3.0 * sd / 100.0, "{var} vs {exact}");
    }

    #[test]
    fn half_of_train_uses_quarter_subsets() {
        let d = scalars(&(0..8).map(f64::from).collect::<Vec<_>>());
        let train = SubsetMask::from_indices(8, [0, 1, 2, 3]).unwrap();
        let seen = FnAlgorithm::new("probe", |rows: &[&[f64]]| {
            vec![rows.len() as f64 * 10.0 + rows.iter().map(|r| r[0]).fold(0.0, f64::max)]
        });
        let est = estimate_moments(&d, &train, &seen, &MomentEstimator::new(64, 2), &SeedStream::new(2)).unwrap();
        // Two records drawn from {0..3}: output in [20, 23], variance well below 4.
        assert!(est.profile.sigma()[0] < 2.0);
    }

    #[test]
    fn estimate_is_deterministic() {
        let d = scalars(&[0.3, 1.0, 2.5, 4.0, 8.0, 9.0]);
        let e = MomentEstimator::new(50, 4);
        let a = estimate_moments(&d, &d.full_mask(), &MeanQuery, &e, &SeedStream::new(5)).unwrap();
        let b = estimate_moments(&d, &d.full_mask(), &MeanQuery, &e, &SeedStream::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bias_correction_scales_variance() {
        let d = scalars(&[0.3, 1.0, 2.5, 4.0, 8.0, 9.0]);
        let plain = MomentEstimator::new(20, 2);
        let corrected = MomentEstimator {
            bias_corrected: true,
            ..plain.clone()
        };
        let s = SeedStream::new(8);
        let a = estimate_moments(&d, &d.full_mask(), &MeanQuery, &plain, &s).unwrap();
        let b = estimate_moments(&d, &d.full_mask(), &MeanQuery, &corrected, &s).unwrap();
        let ratio = (b.profile.sigma()[0] / a.profile.sigma()[0]).powi(2);
        assert!((ratio - 20.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_variance() {
        let d = scalars(&[0.0, 1.0]);
        let m = exact_moments(&d, &MeanQuery, 1, 2, true).unwrap();
        assert_eq!(m.moments, vec![0.25]);
        assert!((m.profile().unwrap().sigma()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn raw_first_moment_is_mean() {
        let d = scalars(&[0.5, 2.0, 3.0, 7.0, 11.0]);
        let m = exact_moments(&d, &MeanQuery, 2, 1, false).unwrap();
        let outs: Vec<f64> = enumerate_subsets(5, 2).unwrap().map(|s| MeanQuery.evaluate(&d, &s)[0]).collect();
        let streaming = outs.iter().enumerate().fold(0.0, |mu, (i, x)| mu + (x - mu) / (i + 1) as f64);
        assert!((m.moments[0] - streaming).abs() < 1e-12);
        assert!(m.profile().is_err());
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        let d = scalars(&[1.5, -2.0, 4.0]);
        let m = exact_moments(&d, &MeanQuery, 2, 2, true).unwrap();
        let outs: Vec<f64> = enumerate_subsets(3, 2).unwrap().map(|s| MeanQuery.evaluate(&d, &s)[0]).collect();
        let mu = outs.iter().sum::<f64>() / 3.0;
        let var = outs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 3.0;
        assert!((m.moments[0] - var).abs() < 1e-12);
    }

    fn brute_outputs(n: usize) -> Vec<(SubsetMask, f64)> {
        let (d, alg) = build_pathological_dataset(n).unwrap();
        enumerate_subsets(n, n / 2)
            .unwrap()
            .map(|s| {
                let v = alg.evaluate(&d, &s)[0];
                (s, v)
            })
            .collect()
    }

    #[test]
    fn pathological_n4() {
        let (d, alg) = build_pathological_dataset(4).unwrap();
        let a = d.record(3)[0];
        assert!((a - ((1.0f64 / 6.0).sqrt() - 1.0)).abs() < 1e-15);
        assert!((a + 0.5918).abs() < 1e-4);
        let special = pathological_special_subset(4).unwrap();
        assert!((alg.evaluate(&d, &special)[0] - 6f64.sqrt()).abs() < 1e-12);
        for (s, v) in brute_outputs(4) {
            if s != special {
                assert!((0.0..=1.0).contains(&v), "{s:?} -> {v}");
            }
        }
        // Variance oracle over the six subsets.
        let outs: Vec<f64> = brute_outputs(4).into_iter().map(|(_, v)| v).collect();
        let mu = outs.iter().sum::<f64>() / 6.0;
        let var = outs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / 6.0;
        let m = exact_moments(&d, &alg, 2, 2, true).unwrap();
        assert!((m.moments[0] - var).abs() < 1e-12);
    }

    #[test]
    fn sensitivity_matches_pair_oracle() {
        let pairs = brute_outputs(4);
        let mut best: f64 = 0.0;
        for (a, va) in &pairs {
            for (b, vb) in &pairs {
                let shared = a.iter().filter(|i| b.contains(*i)).count();
                if shared == 1 {
                    best = best.max((va - vb).abs());
                }
            }
        }
        let (d, alg) = build_pathological_dataset(4).unwrap();
        let got = sensitivity_exact(&d, &alg, 2, &SensitivityNorm::Abs).unwrap();
        assert!((got - best).abs() < 1e-12);
        let min_adjacent = 6f64.sqrt() - best;
        assert!((0.0..=1.0).contains(&min_adjacent));
    }

    #[test]
    fn sensitivity_trivial_cases() {
        let d = scalars(&[0.0, 1.0]);
        assert_eq!(sensitivity_exact(&d, &MeanQuery, 1, &SensitivityNorm::Abs).unwrap(), 1.0);
        let d = scalars(&[0.0, 1.0, 5.0, 2.0]);
        assert_eq!(sensitivity_exact(&d, &ConstantAlgorithm(vec![3.0]), 2, &SensitivityNorm::Abs).unwrap(), 0.0);
        let p = MomentProfile::new(vec![0.5], 2).unwrap();
        assert_eq!(sensitivity_exact(&d, &MeanQuery, 2, &SensitivityNorm::Sigma(p)).unwrap(), 5.0);
    }

    #[test]
    fn pathological_rejects_odd_n() {
        assert!(build_pathological_dataset(5).is_err());
        assert!(build_pathological_dataset(2).is_err());
    }

    #[test]
    fn hybrid_agrees_with_exact() {
        for n in [12, 16] {
            let exact = pathological_variance(n, VarianceMethod::Exact).unwrap();
            let hyb = pathological_variance(
                n,
                VarianceMethod::Hybrid {
                    samples_per_stratum: 100_000,
                    seed: 4,
                },
            )
            .unwrap();
            assert!(
                (hyb.variance - exact.variance).abs() < 4.0 * hyb.std_error + 1e-9,
                "n={n}: {} vs {} (se {})",
                hyb.variance,
                exact.variance,
                hyb.std_error
            );
            assert!(hyb.variance_upper >= exact.variance);
        }
    }

    #[test]
    fn large_n_sensitivity_is_lower_bound() {
        let (delta, exact) = pathological_sensitivity(36, 20).unwrap();
        assert!(!exact);
        let p = 1.0 / binomial(36, 18) as f64;
        assert!((delta - (p.powf(-0.5) - 1.0)).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn moment_root_is_monotone_in_order(values in prop::collection::vec(-5.0f64..5.0, 5..8)) {
            let d = scalars(&values);
            let mut prev = 0.0;
            for m in [2u32, 4, 6] {
                let e = exact_moments(&d, &MeanQuery, d.len() / 2, m, true).unwrap();
                let root = e.moments[0].powf(1.0 / m as f64);
                prop_assert!(root + 1e-12 >= prev);
                prev = root;
            }
        }
    }
}
