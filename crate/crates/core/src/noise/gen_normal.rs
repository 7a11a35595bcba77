//! Symmetric generalized normal, Laplace and the inverse regularized
//! incomplete gamma function used to sample them.

use rand::Rng;
use rand_distr::Open01;
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Draws from the symmetric generalized normal with density proportional to
/// `exp(-(|x|/alpha)^beta)`.
///
/// `|x| = alpha * P^{-1}(1/beta, u)^{1/beta}` with `P` the regularized lower
/// incomplete gamma function; the sign is a fair coin.
pub fn sample_gen_normal<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::validation(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::validation(format!("beta must be at least 1, got {beta}")));
    }
    Ok(gen_normal_unchecked(alpha, beta, rng))
}

pub(crate) fn gen_normal_unchecked<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let g = inv_gamma_lr(1.0 / beta, u);
    let mag = alpha * g.powf(1.0 / beta);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

/// Draws from Laplace(0, scale), density `exp(-|x|/scale) / (2 scale)`.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation(format!(
            "Laplace scale must be positive, got {scale}"
        )));
    }
    Ok(laplace_unchecked(scale, rng))
}

pub(crate) fn laplace_unchecked<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    if u < 0.5 {
        scale * (2.0 * u).ln()
    } else {
        -scale * (2.0 * (1.0 - u)).ln()
    }
}

/// Solves `P(a, x) = p` for `x` (Halley iteration from the usual
/// Wilson-Hilferty / small-`a` starting points).
pub fn inv_gamma_lr(a: f64, p: f64) -> f64 {
    debug_assert!(a > 0.0);
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return (a + 100.0 * a.sqrt()).max(100.0);
    }
    let a1 = a - 1.0;
    let gln = ln_gamma(a);
    let (lna1, afac) = if a > 1.0 {
        let lna1 = a1.ln();
        (lna1, (a1 * (lna1 - 1.0) - gln).exp())
    } else {
        (0.0, 0.0)
    };
    let mut x = if a > 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if p < 0.5 {
            z = -z;
        }
        (a * (1.0 - 1.0 / (9.0 * a) - z / (3.0 * a.sqrt())).powi(3)).max(1e-3)
    } else {
        let t = 1.0 - a * (0.253 + a * 0.12);
        if p < t {
            (p / t).powf(1.0 / a)
        } else {
            1.0 - (1.0 - (p - t) / (1.0 - t)).ln()
        }
    };
    for _ in 0..32 {
        if x <= 0.0 {
            return 0.0;
        }
        let err = gamma_lr(a, x) - p;
        let dens = if a > 1.0 {
            afac * (-(x - a1) + a1 * (x.ln() - lna1)).exp()
        } else {
            (-x + a1 * x.ln() - gln).exp()
        };
        if dens == 0.0 || !dens.is_finite() {
            break;
        }
        let u = err / dens;
        let step = u / (1.0 - 0.5 * (u * (a1 / x - 1.0)).min(1.0));
        x -= step;
        if x <= 0.0 {
            x = 0.5 * (x + step);
        }
        if step.abs() < 1e-12 * x {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::testutil::ks_statistic;
    use statrs::function::gamma::gamma;

    #[test]
    fn inverse_gamma_roundtrip() {
        for &a in &[1.0 / 6.0, 0.25, 0.5, 1.0, 2.0, 7.5] {
            for &p in &[1e-9, 1e-4, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
                let x = inv_gamma_lr(a, p);
                let back = gamma_lr(a, x);
                assert!((back - p).abs() <= 1e-9 * p.max(1e-3), "a={a} p={p} x={x} back={back}");
            }
        }
    }

    fn abs_moment(alpha: f64, beta: f64, m: f64) -> f64 {
        alpha.powf(m) * gamma((m + 1.0) / beta) / gamma(1.0 / beta)
    }

    #[test]
    fn gaussian_shape_second_moment() {
        let mut rng = SeedStream::new(21).rng();
        let alpha = 1.7;
        let n = 1_000_000;
        let m2: f64 = (0..n)
            .map(|_| sample_gen_normal(alpha, 2.0, &mut rng).unwrap().powi(2))
            .sum::<f64>()
            / n as f64;
        let want = alpha * alpha / 2.0;
        assert!((m2 / want - 1.0).abs() < 0.02, "{m2} vs {want}");
        assert!((abs_moment(alpha, 2.0, 2.0) - want).abs() < 1e-12);
    }

    #[test]
    fn beta_one_is_laplace() {
        let mut rng = SeedStream::new(22).rng();
        let b = 0.8;
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_gen_normal(b, 1.0, &mut rng).unwrap())
            .collect();
        let cdf = |x: f64| {
            if x < 0.0 {
                0.5 * (x / b).exp()
            } else {
                1.0 - 0.5 * (-x / b).exp()
            }
        };
        let ks = ks_statistic(xs, cdf);
        assert!(ks < 0.005, "ks {ks}");
    }

    #[test]
    fn gen_normal_is_centered() {
        let mut rng = SeedStream::new(23).rng();
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gen_normal(2.0, 4.0, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn matching_order_absolute_moments() {
        for (i, beta) in [1.0, 2.0, 4.0, 6.0].into_iter().enumerate() {
            let mut rng = SeedStream::new(30 + i as u64).rng();
            let alpha = 0.6;
            let n = 1_000_000;
            let got = (0..n)
                .map(|_| gen_normal_unchecked(alpha, beta, &mut rng).abs().powf(beta))
                .sum::<f64>()
                / n as f64;
            let want = abs_moment(alpha, beta, beta);
            assert!((got / want - 1.0).abs() < 0.02, "beta={beta}: {got} vs {want}");
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = SeedStream::new(0).rng();
        assert!(sample_gen_normal(0.0, 2.0, &mut rng).is_err());
        assert!(sample_gen_normal(1.0, 0.5, &mut rng).is_err());
        assert!(sample_laplace(0.0, &mut rng).is_err());
        assert!(sample_laplace(-1.0, &mut rng).is_err());
    }

    #[test]
    fn laplace_variance_and_median() {
        let mut rng = SeedStream::new(24).rng();
        let b = 1.3;
        let n = 1_000_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_laplace(b, &mut rng).unwrap()).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var / (2.0 * b * b) - 1.0).abs() < 0.02, "{var}");
        xs.iter_mut().for_each(|x| *x = x.abs());
        let mid = n / 2;
        let (_, med, _) = xs.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
        let want = b * std::f64::consts::LN_2;
        assert!((*med / want - 1.0).abs() < 0.02, "{med} vs {want}");
    }
}
