use crate::error::{Error, Result};

/// MIP level implied by pure epsilon-DP: `1/(1 + e^-epsilon) - 1/2`.
pub fn mip_eta_from_dp(epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::validation(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    // Same value as the logistic form, without cancellation near zero.
    Ok(0.5 * (0.5 * epsilon).tanh())
}

/// Inverse of [`mip_eta_from_dp`]: `ln((1 + 2 eta)/(1 - 2 eta))`.
pub fn dp_epsilon_from_eta(eta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&eta) {
        return Err(Error::validation(format!("eta must lie in [0, 1/2), got {eta}")));
    }
    Ok(2.0 * (2.0 * eta).atanh())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_points() {
        assert_eq!(mip_eta_from_dp(0.0).unwrap(), 0.0);
        assert!((mip_eta_from_dp(3f64.ln()).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(dp_epsilon_from_eta(0.0).unwrap(), 0.0);
        assert!((dp_epsilon_from_eta(0.25).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert!(mip_eta_from_dp(-0.1).is_err());
        assert!(dp_epsilon_from_eta(0.5).is_err());
        assert!(dp_epsilon_from_eta(-0.01).is_err());
    }

    #[test]
    fn matches_logistic_form() {
        for eps in [0.3, 1.0, 2.5, 7.0] {
            let logistic = 1.0 / (1.0 + (-eps as f64).exp()) - 0.5;
            assert!((mip_eta_from_dp(eps).unwrap() - logistic).abs() < 1e-15);
        }
    }

    #[test]
    fn small_epsilon_law() {
        for eps in [0.001, 0.004, 0.005, 0.01] {
            let r = mip_eta_from_dp(eps).unwrap() / (eps / 4.0);
            assert!((0.99..=1.01).contains(&r), "{eps}: {r}");
        }
    }

    #[test]
    fn round_trip() {
        for eps in [0.01, 0.1, 1.0, 5.0] {
            let back = dp_epsilon_from_eta(mip_eta_from_dp(eps).unwrap()).unwrap();
            assert!((back / eps - 1.0).abs() < 1e-12, "{eps} -> {back}");
        }
    }

    #[test]
    fn increasing_and_concave() {
        let h = 0.01;
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * h).collect();
        let f: Vec<f64> = grid.iter().map(|&e| mip_eta_from_dp(e).unwrap()).collect();
        for w in f.windows(3) {
            assert!(w[1] > w[0]);
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-15);
        }
    }
}
