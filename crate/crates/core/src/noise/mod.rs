//! Noise calibration for membership-inference privacy.
//!
//! Noise is `X = r U` with `U` a generalized-normal direction normalized to
//! unit σ-weighted norm and `r` a random radius at scale
//! `c = (constant / eta)^(1 + 2/M)`.

mod gen_normal;
mod marginal;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::budget::validate_eta;
use crate::error::{Error, Result};

pub use gen_normal::{inv_gamma_lr, sample_gen_normal, sample_laplace};
pub(crate) use gen_normal::{gen_normal_unchecked, laplace_unchecked};
pub use marginal::CoordinateMarginal;

/// Per-coordinate M-th central moment bounds `sigma_i` and the order `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentProfile {
    sigma: Vec<f64>,
    #[serde(rename = "M")]
    order: u32,
}

impl MomentProfile {
    /// Requires a non-empty `sigma` of positive finite entries and `order >= 2`.
    pub fn new(sigma: Vec<f64>, order: u32) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::validation("moment profile needs at least one coordinate"));
        }
        if let Some(s) = sigma.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::validation(format!(
                "sigma entries must be positive and finite, got {s}"
            )));
        }
        if order < 2 {
            return Err(Error::validation(format!(
                "moment order must be at least 2, got {order}"
            )));
        }
        Ok(Self { sigma, order })
    }

    /// `d` copies of the same `sigma`.
    pub fn uniform(dim: usize, sigma: f64, order: u32) -> Result<Self> {
        Self::new(vec![sigma; dim], order)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// Checks an untrusted (e.g. deserialized) profile.
    pub fn validated(self) -> Result<Self> {
        Self::new(self.sigma, self.order)
    }
}

/// `(sum_i |x_i|^M / (d sigma_i^M))^(1/M)`.
pub fn sigma_norm(x: &[f64], profile: &MomentProfile) -> Result<f64> {
    if x.len() != profile.dim() {
        return Err(Error::validation(format!(
            "vector has dimension {}, profile has {}",
            x.len(),
            profile.dim()
        )));
    }
    Ok(sigma_norm_unchecked(x, profile))
}

pub(crate) fn sigma_norm_unchecked(x: &[f64], profile: &MomentProfile) -> f64 {
    let m = profile.order as i32;
    let d = x.len() as f64;
    // Scale by the largest ratio first so large M cannot overflow.
    let ratios = x.iter().zip(&profile.sigma).map(|(xi, s)| (xi / s).abs());
    let peak = ratios.clone().fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let sum: f64 = ratios.map(|r| (r / peak).powi(m)).sum();
    peak * (sum / d).powf(1.0 / m as f64)
}

/// `||x - y||_{sigma,M}` without materializing the difference.
pub(crate) fn sigma_norm_of_residual(x: &[f64], y: &[f64], profile: &MomentProfile) -> f64 {
    let m = profile.order as i32;
    let ratio = |i: usize| ((x[i] - y[i]) / profile.sigma[i]).abs();
    let d = x.len();
    let peak = (0..d).map(ratio).fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let mean = (0..d).map(|i| (ratio(i) / peak).powi(m)).sum::<f64>() / d as f64;
    let root = match m {
        2 => mean.sqrt(),
        4 => mean.sqrt().sqrt(),
        _ => mean.powf(1.0 / m as f64),
    };
    peak * root
}

/// Which leading constant the scale uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseConstant {
    /// 6.16, for per-coordinate (non-isotropic) profiles.
    #[serde(rename = "6.16")]
    NonIsotropic,
    /// 7.5, for the isotropic Euclidean construction.
    #[serde(rename = "7.5")]
    Isotropic,
}

impl NoiseConstant {
    pub fn value(self) -> f64 {
        match self {
            NoiseConstant::NonIsotropic => 6.16,
            NoiseConstant::Isotropic => 7.5,
        }
    }
}

/// How the radius is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseVariant {
    /// Signed Laplace(c) radius. The density on `R^d` is
    /// `∝ exp(-s/c) s^(1-d)` with `s = ||x||_{sigma,M}`.
    PaperLiteral,
    /// Gamma(d, c) radius. The density on `R^d` is `∝ exp(-||x||_{sigma,M}/c)`.
    #[default]
    DensityExact,
}

impl std::str::FromStr for NoiseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper_literal" | "paper-literal" => Ok(NoiseVariant::PaperLiteral),
            "density_exact" | "density-exact" => Ok(NoiseVariant::DensityExact),
            other => Err(Error::validation(format!("unknown noise variant `{other}`"))),
        }
    }
}

/// `(constant / eta)^(1 + 2/M)` for `eta` in (0, 1/2] and `M >= 2`.
pub fn mip_scale_constant(eta: f64, order: u32, constant: NoiseConstant) -> Result<f64> {
    validate_eta(eta)?;
    if order < 2 {
        return Err(Error::validation(format!(
            "moment order must be at least 2, got {order}"
        )));
    }
    Ok(scale_formula(eta, order as f64, constant.value()))
}

pub(crate) fn scale_formula(eta: f64, order: f64, constant: f64) -> f64 {
    (constant / eta).powf(1.0 + 2.0 / order)
}

/// A calibrated noise distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    eta: f64,
    scale: f64,
    profile: MomentProfile,
    variant: NoiseVariant,
    constant: NoiseConstant,
}

impl NoiseSpec {
    /// Scale derived from `eta` and the profile's order.
    pub fn new(
        eta: f64,
        profile: MomentProfile,
        variant: NoiseVariant,
        constant: NoiseConstant,
    ) -> Result<Self> {
        let scale = mip_scale_constant(eta, profile.order(), constant)?;
        Ok(Self {
            eta,
            scale,
            profile,
            variant,
            constant,
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// The radius scale `c`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn profile(&self) -> &MomentProfile {
        &self.profile
    }

    pub fn variant(&self) -> NoiseVariant {
        self.variant
    }

    pub fn constant(&self) -> NoiseConstant {
        self.constant
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    /// Log-density of the noise at `x`, up to a constant independent of `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let s = sigma_norm(x, &self.profile)?;
        Ok(self.log_density_of_norm(s))
    }

    pub(crate) fn log_density_of_norm(&self, s: f64) -> f64 {
        match self.variant {
            NoiseVariant::DensityExact => -s / self.scale,
            NoiseVariant::PaperLiteral => {
                let d = self.dim() as f64;
                -s / self.scale - (d - 1.0) * s.ln()
            }
        }
    }
}

/// Direction `U = Y / ||Y||_{sigma,M}` with `Y_i ~ GenNormal(0, sigma_i, M)`.
pub fn sample_direction<R: Rng + ?Sized>(profile: &MomentProfile, rng: &mut R) -> Vec<f64> {
    let beta = profile.order() as f64;
    loop {
        let y: Vec<f64> = profile
            .sigma()
            .iter()
            .map(|&s| gen_normal_unchecked(s, beta, rng))
            .collect();
        let norm = sigma_norm_unchecked(&y, profile);
        if norm > 0.0 && norm.is_finite() {
            return y.into_iter().map(|v| v / norm).collect();
        }
    }
}

/// One draw of `X = r U` under `spec`.
pub fn sample_mip_noise<R: Rng + ?Sized>(spec: &NoiseSpec, rng: &mut R) -> Vec<f64> {
    let u = sample_direction(&spec.profile, rng);
    let r = match spec.variant {
        NoiseVariant::PaperLiteral => laplace_unchecked(spec.scale, rng),
        NoiseVariant::DensityExact => gamma_radius(spec.dim(), spec.scale, rng),
    };
    u.into_iter().map(|v| r * v).collect()
}

fn gamma_radius<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> f64 {
    Gamma::new(dim as f64, scale)
        .expect("shape and scale are positive")
        .sample(rng)
}

/// Euclidean-norm noise with density `∝ exp(-||x||_2 / (c sigma))`,
/// `c = (7.5/eta)^(1 + 2/M)`, for a scalar moment bound on `||theta - E theta||_2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicNoise {
    eta: f64,
    sigma: f64,
    order: u32,
    dim: usize,
    scale: f64,
}

impl IsotropicNoise {
    pub fn new(eta: f64, sigma: f64, order: u32, dim: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::validation(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        if dim == 0 {
            return Err(Error::validation("dimension must be positive"));
        }
        let c = mip_scale_constant(eta, order, NoiseConstant::Isotropic)?;
        Ok(Self {
            eta,
            sigma,
            order,
            dim,
            scale: c * sigma,
        })
    }

    /// The product `c sigma`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Up to a constant independent of `x`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        -euclidean(x) / self.scale
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u = loop {
            let g: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = euclidean(&g);
            if n > 0.0 {
                break g.into_iter().map(|v| v / n).collect::<Vec<_>>();
            }
        };
        let r = gamma_radius(self.dim, self.scale, rng);
        u.into_iter().map(|v| r * v).collect()
    }
}

pub(crate) fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
