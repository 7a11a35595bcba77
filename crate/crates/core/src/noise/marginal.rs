//! Coordinate marginals of two-dimensional density-exact noise, by
//! quadrature. Used to evaluate likelihoods after a release is projected to
//! one coordinate.

use crate::error::{Error, Result};

use super::{MomentProfile, NoiseSpec, NoiseVariant};

const GRID: usize = 8001;
const INNER: usize = 1000;
const TAIL: f64 = 60.0;

/// Density and CDF of one coordinate of two-dimensional density-exact noise.
///
/// In standardized units `t = x / (c sigma_j)` the marginal is proportional
/// to `h(t) = ∫ exp(-((|t|^M + |v|^M)/2)^(1/M)) dv`.
#[derive(Debug, Clone)]
pub struct CoordinateMarginal {
    unit: f64,
    step: f64,
    log_pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl CoordinateMarginal {
    /// Marginal of coordinate `coord` of `spec`. Requires `d = 2` and the
    /// density-exact variant.
    pub fn new(spec: &NoiseSpec, coord: usize) -> Result<Self> {
        if spec.dim() != 2 || coord > 1 {
            return Err(Error::validation("coordinate marginals need two-dimensional noise"));
        }
        if spec.variant() != NoiseVariant::DensityExact {
            return Err(Error::validation(
                "coordinate marginals are only tabulated for the density-exact variant",
            ));
        }
        Ok(Self::standardized(spec.profile(), spec.scale() * spec.profile().sigma()[coord]))
    }

    fn standardized(profile: &MomentProfile, unit: f64) -> Self {
        let m = profile.order() as f64;
        let reach = 2f64.powf(1.0 / m) * TAIL;
        let step = reach / (GRID - 1) as f64;
        let h: Vec<f64> = (0..GRID)
            .map(|i| 2.0 * half_line_integral(i as f64 * step, m, reach))
            .collect();
        let mut cdf = vec![0.0; GRID];
        for i in 1..GRID {
            cdf[i] = cdf[i - 1] + 0.5 * step * (h[i - 1] + h[i]);
        }
        let half_mass = cdf[GRID - 1];
        let z = 2.0 * half_mass;
        let log_pdf = h.iter().map(|v| (v / z).ln()).collect();
        let cdf = cdf.iter().map(|v| 0.5 + 0.5 * v / half_mass).collect();
        Self {
            unit,
            step,
            log_pdf,
            cdf,
        }
    }

    /// Log-density at `x` in output units.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let t = (x / self.unit).abs() / self.step;
        let last = GRID - 1;
        let lp = if t >= last as f64 {
            let slope = self.log_pdf[last] - self.log_pdf[last - 1];
            self.log_pdf[last] + slope * (t - last as f64)
        } else {
            let i = t.floor() as usize;
            let w = t - i as f64;
            self.log_pdf[i] * (1.0 - w) + self.log_pdf[i + 1] * w
        };
        lp - self.unit.ln()
    }

    /// CDF at `x` in output units.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x / self.unit).abs() / self.step;
        let upper = if t >= (GRID - 1) as f64 {
            1.0
        } else {
            let i = t.floor() as usize;
            let w = t - i as f64;
            self.cdf[i] * (1.0 - w) + self.cdf[i + 1] * w
        };
        if x >= 0.0 {
            upper
        } else {
            1.0 - upper
        }
    }
}

fn half_line_integral(t: f64, m: f64, reach: f64) -> f64 {
    let tm = t.abs().powf(m);
    let f = |v: f64| (-((tm + v.powf(m)) / 2.0).powf(1.0 / m)).exp();
    let h = reach / INNER as f64;
    let mut acc = f(0.0) + f(reach);
    for j in 1..INNER {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(j as f64 * h);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{sample_mip_noise, NoiseConstant};
    use crate::rng::SeedStream;
    use crate::testutil::ks_statistic;

    fn spec(order: u32, sigma: [f64; 2]) -> NoiseSpec {
        let p = MomentProfile::new(sigma.to_vec(), order).unwrap();
        NoiseSpec::new(0.5, p, NoiseVariant::DensityExact, NoiseConstant::NonIsotropic).unwrap()
    }

    #[test]
    fn gaussian_order_matches_bessel_form() {
        // M = 2: h(t) = 2 sqrt(2) tau K1(tau), tau = t / sqrt 2, and Z = 4 pi.
        let s = spec(2, [1.0, 1.0]);
        let marg = CoordinateMarginal::new(&s, 0).unwrap();
        let k1_at_one = 0.601_907_230_197_234_6;
        let want = 2.0 * std::f64::consts::SQRT_2 * k1_at_one / (4.0 * std::f64::consts::PI);
        let x = std::f64::consts::SQRT_2 * s.scale();
        let got = (marg.log_pdf(x) + s.scale().ln()).exp();
        assert!((got / want - 1.0).abs() < 1e-4, "{got} vs {want}");
    }

    #[test]
    fn cdf_matches_samples() {
        let s = spec(4, [0.5, 2.0]);
        let mut rng = SeedStream::new(9).rng();
        for coord in 0..2 {
            let marg = CoordinateMarginal::new(&s, coord).unwrap();
            let xs: Vec<f64> = (0..100_000).map(|_| sample_mip_noise(&s, &mut rng)[coord]).collect();
            let ks = ks_statistic(xs, |x| marg.cdf(x));
            assert!(ks < 0.01, "coord {coord}: ks {ks}");
        }
    }

    #[test]
    fn rejects_unsupported_specs() {
        let p = MomentProfile::new(vec![1.0; 3], 2).unwrap();
        let s3 = NoiseSpec::new(0.5, p, NoiseVariant::DensityExact, NoiseConstant::NonIsotropic).unwrap();
        assert!(CoordinateMarginal::new(&s3, 0).is_err());
        let p = MomentProfile::new(vec![1.0; 2], 2).unwrap();
        let lit = NoiseSpec::new(0.5, p, NoiseVariant::PaperLiteral, NoiseConstant::NonIsotropic).unwrap();
        assert!(CoordinateMarginal::new(&lit, 0).is_err());
    }
}
