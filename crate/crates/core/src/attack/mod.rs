//! Membership-inference attackers.
//!
//! The Bayes attacker guesses "in" iff the posterior probability that the
//! target was in the training set, under a uniform prior over size-k
//! training sets, is at least 1/2.

mod conversion;
mod postprocess;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::PrivacyBudget;
use crate::error::{Error, Result};
use crate::mechanisms::{ConditionalDensity, FiniteSupport, Mechanism};
use crate::moments::random_subset;
use crate::noise::euclidean;
use crate::rng::{SeedStream, StreamRng};
use crate::subset::{enumerate_subsets, rank_bits, SubsetMask};

pub use conversion::{dp_epsilon_from_eta, mip_eta_from_dp};
pub use postprocess::{PostProcess, PostProcessed};

/// Posteriors within this distance below 1/2 count as ties and guess "in".
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerKind {
    BayesExact,
    Plugin,
}

/// Accuracy of one attacker against one fixed target record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub target_id: usize,
    pub accuracy: f64,
    pub std_error: f64,
    pub rounds: usize,
    pub attacker: AttackerKind,
    pub attacker_name: String,
    /// MIP level claimed by the mechanism, when it makes one.
    pub eta_claimed: Option<f64>,
}

impl AttackReport {
    fn from_hits(
        target_id: usize,
        hits: usize,
        rounds: usize,
        attacker: AttackerKind,
        attacker_name: &str,
        budget: Option<PrivacyBudget>,
    ) -> Self {
        let accuracy = hits as f64 / rounds as f64;
        Self {
            target_id,
            accuracy,
            std_error: (accuracy * (1.0 - accuracy) / rounds as f64).sqrt(),
            rounds,
            attacker,
            attacker_name: attacker_name.to_string(),
            eta_claimed: claimed_eta(budget),
        }
    }

    /// Baseline accuracy of always guessing the more likely membership.
    pub fn prior_baseline(n: usize, k: usize) -> f64 {
        let r = k as f64 / n as f64;
        r.max(1.0 - r)
    }
}

fn claimed_eta(budget: Option<PrivacyBudget>) -> Option<f64> {
    match budget? {
        PrivacyBudget::Mip { eta, .. } => Some(eta),
        PrivacyBudget::Dp { epsilon } => mip_eta_from_dp(epsilon).ok(),
    }
}

fn check_target<M: Mechanism + ?Sized>(mech: &M, target: usize) -> Result<()> {
    if target >= mech.data().len() {
        return Err(Error::validation(format!(
            "target {target} out of range for {} records",
            mech.data().len()
        )));
    }
    Ok(())
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `P(target in train | output)` under a uniform prior over size-k masks.
pub fn bayes_posterior<M: ConditionalDensity + ?Sized>(
    mech: &M,
    output: &M::Output,
    target: usize,
) -> Result<f64> {
    check_target(mech, target)?;
    let n = mech.data().len();
    let k = mech.train_size();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let fast = rank_bits(n, k).and_then(|bits| Some((bits, mech.log_density_by_rank(output)?)));
    match fast {
        Some((bits, lds)) => {
            let bit = 1u64 << target;
            for (b, ld) in bits.iter().zip(lds) {
                if b & bit != 0 {
                    inside.push(ld);
                } else {
                    outside.push(ld);
                }
            }
        }
        None => {
            for mask in enumerate_subsets(n, k)? {
                let ld = mech.log_density(output, &mask);
                if mask.contains(target) {
                    inside.push(ld);
                } else {
                    outside.push(ld);
                }
            }
        }
    }
    let li = log_sum_exp(&inside);
    let lo = log_sum_exp(&outside);
    if li == f64::NEG_INFINITY && lo == f64::NEG_INFINITY {
        return Err(Error::UndefinedPosterior);
    }
    if li == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if lo == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let post = 1.0 / (1.0 + (lo - li).exp());
    // Both sides infinite: the output does not discriminate.
    Ok(if post.is_nan() { 0.5 } else { post })
}

fn guesses_in(posterior: f64) -> bool {
    posterior >= 0.5 - TIE_TOLERANCE
}

/// Monte Carlo accuracy of the Bayes attacker: each round draws a uniform
/// training mask and a release, then guesses from the exact posterior.
pub fn optimal_attacker_accuracy<M: ConditionalDensity + ?Sized>(
    mech: &M,
    target: usize,
    rounds: usize,
    seed: u64,
) -> Result<AttackReport> {
    check_target(mech, target)?;
    if rounds == 0 {
        return Err(Error::validation("rounds must be positive"));
    }
    let n = mech.data().len();
    let k = mech.train_size();
    enumerate_subsets(n, k)?;
    let stream = SeedStream::new(seed).named("optimal_attacker").child(target as u64);
    let hits: Vec<bool> = (0..rounds)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.child(i as u64).rng();
            let train = random_subset(n, k, &mut rng);
            let out = mech.release(&train, &mut rng);
            let post = bayes_posterior(mech, &out, target)?;
            Ok(guesses_in(post) == train.contains(target))
        })
        .collect::<Result<_>>()?;
    let h = hits.iter().filter(|h| **h).count();
    Ok(AttackReport::from_hits(target, h, rounds, AttackerKind::BayesExact, "bayes", mech.budget()))
}

/// Exact Bayes-attacker accuracy by summing the PMF over every output and
/// training mask.
pub fn exact_attacker_accuracy<M: FiniteSupport + ?Sized>(mech: &M, target: usize) -> Result<f64> {
    check_target(mech, target)?;
    let n = mech.data().len();
    let masks: Vec<SubsetMask> = enumerate_subsets(n, mech.train_size())?.collect();
    let mut correct = 0.0;
    for out in mech.support() {
        let mut p_in = 0.0;
        let mut p_out = 0.0;
        for m in &masks {
            let p = mech.conditional_density(&out, m);
            if m.contains(target) {
                p_in += p;
            } else {
                p_out += p;
            }
        }
        if p_in + p_out == 0.0 {
            continue;
        }
        let post = p_in / (p_in + p_out);
        correct += if guesses_in(post) { p_in } else { p_out };
    }
    Ok(correct / masks.len() as f64)
}

/// Largest `P(o | D) / P(o | D')` over outputs and masks sharing all but one
/// record; infinite when some output is possible under `D` only.
pub fn max_adjacent_pmf_ratio<M: FiniteSupport + ?Sized>(mech: &M) -> Result<f64> {
    let n = mech.data().len();
    let masks: Vec<SubsetMask> = enumerate_subsets(n, mech.train_size())?.collect();
    let support = mech.support();
    let table: Vec<Vec<f64>> = masks
        .iter()
        .map(|m| support.iter().map(|o| mech.log_density(o, m)).collect())
        .collect();
    let mut worst = 0.0_f64;
    for (i, a) in masks.iter().enumerate() {
        for (j, b) in masks.iter().enumerate() {
            let shared = a.iter().filter(|x| b.contains(*x)).count();
            if i == j || shared + 1 != a.count() {
                continue;
            }
            for (la, lb) in table[i].iter().zip(&table[j]) {
                if *la == f64::NEG_INFINITY {
                    continue;
                }
                if *lb == f64::NEG_INFINITY {
                    return Ok(f64::INFINITY);
                }
                worst = worst.max((la - lb).exp());
            }
        }
    }
    Ok(worst)
}

/// Largest `|ln(posterior odds / prior odds)|` of membership of `target`
/// over all possible outputs.
pub fn max_posterior_odds_shift<M: FiniteSupport + ?Sized>(mech: &M, target: usize) -> Result<f64> {
    let n = mech.data().len();
    let k = mech.train_size();
    let prior = k as f64 / n as f64;
    let prior_log_odds = (prior / (1.0 - prior)).ln();
    let mut worst = 0.0_f64;
    for out in mech.support() {
        let post = match bayes_posterior(mech, &out, target) {
            Ok(p) => p,
            Err(Error::UndefinedPosterior) => continue,
            Err(e) => return Err(e),
        };
        worst = worst.max(((post / (1.0 - post)).ln() - prior_log_odds).abs());
    }
    Ok(worst)
}

/// An attacker that only sees the target id and the released output.
pub trait PluginAttacker<O>: Sync {
    fn name(&self) -> &str;

    fn guess(&self, target: usize, output: &O, rng: &mut StreamRng) -> bool;
}

/// Always guesses "in".
#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysIn;

impl<O> PluginAttacker<O> for AlwaysIn {
    fn name(&self) -> &str {
        "always-in"
    }

    fn guess(&self, _: usize, _: &O, _: &mut StreamRng) -> bool {
        true
    }
}

/// Guesses "in" iff the release lies within `threshold` (Euclidean) of the
/// target record.
#[derive(Debug, Clone)]
pub struct DistanceThreshold {
    records: crate::data::DatasetTable,
    threshold: f64,
    name: String,
}

impl DistanceThreshold {
    pub fn new(records: crate::data::DatasetTable, threshold: f64) -> Self {
        Self {
            records,
            threshold,
            name: format!("distance<={threshold}"),
        }
    }
}

impl PluginAttacker<Vec<f64>> for DistanceThreshold {
    fn name(&self) -> &str {
        &self.name
    }

    fn guess(&self, target: usize, output: &Vec<f64>, _: &mut StreamRng) -> bool {
        let x = self.records.record(target);
        let diff: Vec<f64> = output.iter().zip(x).map(|(o, v)| o - v).collect();
        euclidean(&diff) <= self.threshold
    }
}

/// Bayes posterior threshold, run through the plug-in game.
pub struct BayesPlugin<'a, M: ?Sized> {
    mech: &'a M,
}

impl<'a, M: ConditionalDensity + ?Sized> BayesPlugin<'a, M> {
    pub fn new(mech: &'a M) -> Self {
        Self { mech }
    }
}

impl<M: ConditionalDensity + ?Sized> PluginAttacker<M::Output> for BayesPlugin<'_, M> {
    fn name(&self) -> &str {
        "bayes-plugin"
    }

    fn guess(&self, target: usize, output: &M::Output, _: &mut StreamRng) -> bool {
        bayes_posterior(self.mech, output, target).map_or(true, guesses_in)
    }
}

/// Plays the membership game for each target. Mechanism and attacker draw
/// from separate streams.
pub fn attack_game<M, P>(
    mech: &M,
    attacker: &P,
    targets: &[usize],
    rounds: usize,
    seed: u64,
) -> Result<Vec<AttackReport>>
where
    M: Mechanism + ?Sized,
    P: PluginAttacker<M::Output> + ?Sized,
{
    if rounds == 0 {
        return Err(Error::validation("rounds must be positive"));
    }
    let n = mech.data().len();
    let k = mech.train_size();
    let root = SeedStream::new(seed).named("attack_game");
    targets
        .iter()
        .map(|&target| {
            check_target(mech, target)?;
            let per_target = root.child(target as u64);
            let mech_stream = per_target.named("mechanism");
            let att_stream = per_target.named("attacker");
            let hits = (0..rounds)
                .into_par_iter()
                .filter(|&i| {
                    let mut rng = mech_stream.child(i as u64).rng();
                    let train = random_subset(n, k, &mut rng);
                    let out = mech.release(&train, &mut rng);
                    let mut arng = att_stream.child(i as u64).rng();
                    attacker.guess(target, &out, &mut arng) == train.contains(target)
                })
                .count();
            Ok(AttackReport::from_hits(target, hits, rounds, AttackerKind::Plugin, attacker.name(), mech.budget()))
        })
        .collect()
}

/// Largest accuracy over reports.
pub fn max_accuracy(reports: &[AttackReport]) -> Option<&AttackReport> {
    reports.iter().max_by(|a, b| a.accuracy.total_cmp(&b.accuracy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{ConstantAlgorithm, MeanQuery};
    use crate::data::DatasetTable;
    use crate::mechanisms::{BinaryTightDp, MipMechanism, SubsetPublisher};
    use crate::noise::NoiseVariant;

    fn constant_mech() -> MipMechanism {
        let data = DatasetTable::from_scalars(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        MipMechanism::with_exact_moments(data, ConstantAlgorithm(vec![1.0]), 0.1, 2, NoiseVariant::DensityExact)
            .unwrap()
    }

    #[test]
    fn uninformative_output_gives_prior_posterior() {
        let m = constant_mech();
        let post = bayes_posterior(&m, &vec![0.3], 2).unwrap();
        assert!((post - 0.5).abs() < 1e-12);
        let rep = optimal_attacker_accuracy(&m, 0, 4000, 1).unwrap();
        assert!((rep.accuracy - 0.5).abs() <= 3.0 * rep.std_error, "{rep:?}");
    }

    #[test]
    fn binary_posterior_and_accuracy() {
        let m = BinaryTightDp::new(3f64.ln()).unwrap();
        let x = SubsetMask::from_indices(2, [0]).unwrap();
        assert!((bayes_posterior(&m, &x, 0).unwrap() - 0.75).abs() < 1e-12);
        assert!((exact_attacker_accuracy(&m, 0).unwrap() - 0.75).abs() < 1e-12);
        assert!((max_adjacent_pmf_ratio(&m).unwrap() - 3.0).abs() < 1e-12);
        assert!((max_posterior_odds_shift(&m, 0).unwrap() - 3f64.ln()).abs() < 1e-12);
        let near_zero = BinaryTightDp::new(1e-9).unwrap();
        assert!((exact_attacker_accuracy(&near_zero, 1).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn publisher_full_disclosure() {
        let data = DatasetTable::from_scalars(&[0.0; 6]).unwrap();
        let full = SubsetPublisher::new(data.clone(), 1.0).unwrap();
        let shown = SubsetMask::from_indices(6, [0, 2, 5]).unwrap();
        assert_eq!(bayes_posterior(&full, &shown, 2).unwrap(), 1.0);
        assert_eq!(exact_attacker_accuracy(&full, 0).unwrap(), 1.0);
        let rep = optimal_attacker_accuracy(&full, 3, 500, 2).unwrap();
        assert_eq!(rep.accuracy, 1.0);
        let silent = SubsetPublisher::new(data, 0.0).unwrap();
        assert!((exact_attacker_accuracy(&silent, 0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn undefined_posterior() {
        let data = DatasetTable::from_scalars(&[0.0; 4]).unwrap();
        let m = SubsetPublisher::new(data, 0.5).unwrap();
        let impossible = SubsetMask::full(4);
        assert!(matches!(bayes_posterior(&m, &impossible, 0), Err(Error::UndefinedPosterior)));
    }

    #[test]
    fn always_in_hits_prior_rate() {
        let m = constant_mech();
        let reps = attack_game(&m, &AlwaysIn, &[0, 1], 4000, 3).unwrap();
        for r in reps {
            assert!((r.accuracy - 0.5).abs() <= 3.0 * r.std_error + 1e-12);
        }
    }

    #[test]
    fn plugin_bayes_matches_optimal() {
        let data = DatasetTable::from_scalars(&[0.0, 0.1, 0.2, 5.0, 5.1, 9.0]).unwrap();
        let m = MipMechanism::with_exact_moments(data, MeanQuery, 0.5, 2, NoiseVariant::DensityExact).unwrap();
        let a = optimal_attacker_accuracy(&m, 5, 4000, 7).unwrap();
        let b = &attack_game(&m, &BayesPlugin::new(&m), &[5], 4000, 8).unwrap()[0];
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.accuracy - b.accuracy).abs() <= 2.0 * se, "{} vs {}", a.accuracy, b.accuracy);
        assert_eq!(a.eta_claimed, Some(0.5));
    }

    #[test]
    fn reports_serialize() {
        let r = AttackReport::from_hits(3, 60, 100, AttackerKind::BayesExact, "bayes", None);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["attacker"], "bayes_exact");
        assert_eq!(v["target_id"], 3);
        assert_eq!(AttackReport::prior_baseline(7, 3), 4.0 / 7.0);
    }
}
