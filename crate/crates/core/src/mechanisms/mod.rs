//! Release mechanisms.
//!
//! A mechanism owns its dataset and maps a training mask to a randomized
//! output. Mechanisms that expose [`ConditionalDensity`] can be attacked by
//! the exact Bayes attacker; [`FiniteSupport`] ones admit exact accuracy by
//! summing over every output.

mod constructions;
mod dpsgd;
mod laplace;
mod mip;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::budget::PrivacyBudget;
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::noise::MomentProfile;
use crate::rng::StreamRng;
use crate::subset::SubsetMask;

pub use constructions::{BinaryTightDp, SubsetPublisher};
pub use dpsgd::{
    dpsgd_train, median_clip_norm, noise_multiplier_for_eta, zcdp_accounting, Clip, DpSgdConfig, DpSgdRun, Objective,
    ZcdpAccounting, DIVERGENCE_LIMIT,
};
pub use laplace::{privatize_laplace_dp, LaplaceMechanism};
pub use mip::{privatize_mip, MipMechanism, MipParams};

/// Identity and privacy claim of a mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismDescriptor {
    pub id: String,
    pub budget: Option<PrivacyBudget>,
    /// Whether `conditional_density` is available.
    pub has_density: bool,
}

pub trait Mechanism: Send + Sync {
    type Output: Clone + Send + Sync;

    fn id(&self) -> &str;

    fn data(&self) -> &DatasetTable;

    /// Size of the training subsets the mechanism is evaluated on.
    fn train_size(&self) -> usize {
        self.data().len() / 2
    }

    fn budget(&self) -> Option<PrivacyBudget> {
        None
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> Self::Output;
}

/// Output density (or PMF) given the training mask, up to a factor shared by
/// all masks. Ratios across masks are exact.
pub trait ConditionalDensity: Mechanism {
    /// Natural log of the density; `-inf` where it vanishes.
    fn log_density(&self, output: &Self::Output, train: &SubsetMask) -> f64;

    /// Log-density at every size-`train_size()` mask in lexicographic rank
    /// order, when the mechanism can produce it faster than mask by mask.
    fn log_density_by_rank(&self, _output: &Self::Output) -> Option<Vec<f64>> {
        None
    }

    fn conditional_density(&self, output: &Self::Output, train: &SubsetMask) -> f64 {
        self.log_density(output, train).exp()
    }

    fn descriptor(&self) -> MechanismDescriptor {
        MechanismDescriptor {
            id: self.id().to_string(),
            budget: self.budget(),
            has_density: true,
        }
    }
}

/// Mechanisms with finitely many outputs whose `log_density` is the exact
/// log-PMF.
pub trait FiniteSupport: ConditionalDensity {
    /// Every output with positive probability under some training mask.
    fn support(&self) -> Vec<Self::Output>;
}

/// A released vector plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismOutput {
    pub theta_hat: Vec<f64>,
    pub mechanism_id: String,
    pub seed: u64,
    pub noise_scale: f64,
    pub profile: Option<MomentProfile>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl MechanismOutput {
    pub(crate) fn new(theta_hat: Vec<f64>, mechanism_id: impl Into<String>, seed: u64, noise_scale: f64) -> Result<Self> {
        if theta_hat.is_empty() {
            return Err(Error::validation("released vector is empty"));
        }
        if theta_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("released vector has non-finite entries"));
        }
        Ok(Self {
            theta_hat,
            mechanism_id: mechanism_id.into(),
            seed,
            noise_scale,
            profile: None,
            metadata: BTreeMap::new(),
        })
    }

    pub(crate) fn with_meta(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("metadata serializes");
        self.metadata.insert(key.to_string(), v);
        self
    }
}

pub(crate) fn check_output<A: crate::algorithm::BaseAlgorithm + ?Sized>(
    alg: &A,
    theta: &[f64],
) -> Result<()> {
    if theta.is_empty() || theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation(format!(
            "base algorithm `{}` returned an empty or non-finite vector",
            alg.name()
        )));
    }
    Ok(())
}
