use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::algorithm::BaseAlgorithm;
use crate::budget::PrivacyBudget;
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::moments::{estimate_moments, exact_moments, MomentEstimator};
use crate::noise::{sample_mip_noise, sigma_norm_of_residual, MomentProfile, NoiseConstant, NoiseSpec, NoiseVariant};
use crate::rng::{SeedStream, StreamRng};
use crate::subset::{binomial, lex_rank, lex_unrank, random_half_split, SubsetMask};

use super::{check_output, ConditionalDensity, Mechanism, MechanismOutput};

const CACHE_LIMIT: u128 = 1_000_000;

/// `A(train) + X` with `X` drawn from a fixed [`NoiseSpec`].
pub struct MipMechanism {
    id: String,
    data: DatasetTable,
    alg: Arc<dyn BaseAlgorithm>,
    spec: NoiseSpec,
    base_cache: OnceLock<Option<Vec<Vec<f64>>>>,
}

impl std::fmt::Debug for MipMechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MipMechanism")
            .field("id", &self.id)
            .field("alg", &self.alg.name())
            .field("spec", &self.spec)
            .finish()
    }
}

impl MipMechanism {
    pub fn new(data: DatasetTable, alg: impl BaseAlgorithm + 'static, spec: NoiseSpec) -> Result<Self> {
        let alg: Arc<dyn BaseAlgorithm> = Arc::new(alg);
        let probe = alg.evaluate(&data, &SubsetMask::from_indices(data.len(), 0..data.len() / 2)?);
        check_output(alg.as_ref(), &probe)?;
        if probe.len() != spec.dim() {
            return Err(Error::validation(format!(
                "algorithm output has dimension {}, noise has {}",
                probe.len(),
                spec.dim()
            )));
        }
        Ok(Self {
            id: format!("mip/{}", alg.name()),
            data,
            alg,
            spec,
            base_cache: OnceLock::new(),
        })
    }

    /// Calibrates to the exact central moments over all size-`floor(n/2)` subsets.
    pub fn with_exact_moments(
        data: DatasetTable,
        alg: impl BaseAlgorithm + 'static,
        eta: f64,
        order: u32,
        variant: NoiseVariant,
    ) -> Result<Self> {
        crate::moments::validate_even_order(order)?;
        let profile = exact_moments(&data, &alg, data.len() / 2, order, true)?.profile()?;
        let spec = NoiseSpec::new(eta, profile, variant, NoiseConstant::NonIsotropic)?;
        Self::new(data, alg, spec)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn algorithm(&self) -> &dyn BaseAlgorithm {
        self.alg.as_ref()
    }

    /// `A(train)`, served from a per-rank table when the subset family is small.
    pub fn base_output(&self, train: &SubsetMask) -> Vec<f64> {
        let n = self.data.len();
        let k = self.train_size();
        if train.count() == k && n <= 64 {
            if let Some(table) = self.base_cache.get_or_init(|| self.build_cache()) {
                return table[lex_rank(train) as usize].clone();
            }
        }
        self.alg.evaluate(&self.data, train)
    }

    fn build_cache(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.data.len();
        let k = self.train_size();
        let count = binomial(n, k);
        if count > CACHE_LIMIT {
            return None;
        }
        Some(
            (0..count as u64)
                .into_par_iter()
                .map(|r| self.alg.evaluate(&self.data, &lex_unrank(n, k, r)))
                .collect(),
        )
    }
}

impl Mechanism for MipMechanism {
    type Output = Vec<f64>;

    fn id(&self) -> &str {
        &self.id
    }

    fn data(&self) -> &DatasetTable {
        &self.data
    }

    fn budget(&self) -> Option<PrivacyBudget> {
        Some(PrivacyBudget::Mip {
            eta: self.spec.eta(),
            order: self.spec.profile().order(),
        })
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> Vec<f64> {
        let theta = self.base_output(train);
        let noise = sample_mip_noise(&self.spec, rng);
        theta.iter().zip(noise).map(|(t, x)| t + x).collect()
    }
}

impl ConditionalDensity for MipMechanism {
    fn log_density(&self, output: &Vec<f64>, train: &SubsetMask) -> f64 {
        let theta = self.base_output(train);
        self.spec
            .log_density_of_norm(sigma_norm_of_residual(output, &theta, self.spec.profile()))
    }

    fn log_density_by_rank(&self, output: &Vec<f64>) -> Option<Vec<f64>> {
        if self.data.len() > 64 {
            return None;
        }
        let table = self.base_cache.get_or_init(|| self.build_cache()).as_ref()?;
        let profile = self.spec.profile();
        Some(
            table
                .iter()
                .map(|theta| self.spec.log_density_of_norm(sigma_norm_of_residual(output, theta, profile)))
                .collect(),
        )
    }
}

/// Parameters of [`privatize_mip`].
#[derive(Debug, Clone, PartialEq)]
pub struct MipParams {
    pub eta: f64,
    /// Even, at least 2.
    pub order: u32,
    pub variant: NoiseVariant,
    pub constant: NoiseConstant,
    /// Used when `profile` is `None`; its order is replaced by `order`.
    pub estimator: MomentEstimator,
    /// A known moment bound, skipping estimation.
    pub profile: Option<MomentProfile>,
}

impl MipParams {
    pub fn new(eta: f64, order: u32) -> Self {
        Self {
            eta,
            order,
            variant: NoiseVariant::default(),
            constant: NoiseConstant::NonIsotropic,
            estimator: MomentEstimator::new(128, order),
            profile: None,
        }
    }
}

/// Random half-split, moment estimation on the training half (unless a
/// profile is supplied), then one noisy release of `A(train)`.
pub fn privatize_mip<A: BaseAlgorithm + ?Sized>(
    data: &DatasetTable,
    alg: &A,
    params: &MipParams,
    seed: u64,
) -> Result<MechanismOutput> {
    crate::budget::validate_eta(params.eta)?;
    crate::moments::validate_even_order(params.order)?;
    let stream = SeedStream::new(seed);
    let (train, _) = random_half_split(data, &stream)?;
    let (profile, estimated) = match &params.profile {
        Some(p) => {
            if p.order() != params.order {
                return Err(Error::validation("supplied profile order differs from the requested order"));
            }
            (p.clone().validated()?, None)
        }
        None => {
            let est = MomentEstimator {
                order: params.order,
                ..params.estimator.clone()
            };
            let e = estimate_moments(data, &train, alg, &est, &stream.named("moments"))?;
            (e.profile.clone(), Some(e))
        }
    };
    let theta = alg.evaluate(data, &train);
    check_output(alg, &theta)?;
    if theta.len() != profile.dim() {
        return Err(Error::validation(format!(
            "algorithm output has dimension {}, profile has {}",
            theta.len(),
            profile.dim()
        )));
    }
    let spec = NoiseSpec::new(params.eta, profile.clone(), params.variant, params.constant)?;
    let mut rng = stream.named("noise").rng();
    let noise = sample_mip_noise(&spec, &mut rng);
    let released: Vec<f64> = theta.iter().zip(&noise).map(|(t, x)| t + x).collect();
    let mut out = MechanismOutput::new(released, format!("mip/{}", alg.name()), seed, spec.scale())?
        .with_meta("eta", params.eta)
        .with_meta("M", params.order)
        .with_meta("variant", params.variant)
        .with_meta("constant", params.constant)
        .with_meta("train_size", train.count());
    out = match estimated {
        Some(e) => out
            .with_meta("estimator", "bootstrap")
            .with_meta("B", e.resamples)
            .with_meta("resample_size", e.size)
            .with_meta("degenerate", e.degenerate),
        None => out.with_meta("estimator", "supplied"),
    };
    out.profile = Some(profile);
    Ok(out)
}
