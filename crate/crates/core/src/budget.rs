use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A privacy target: an MIP level with its moment order, or a pure DP level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PrivacyBudget {
    Mip { eta: f64, order: u32 },
    Dp { epsilon: f64 },
}

impl PrivacyBudget {
    /// `eta` in (0, 1/2], `order >= 2`.
    pub fn mip(eta: f64, order: u32) -> Result<Self> {
        validate_eta(eta)?;
        if order < 2 {
            return Err(Error::validation(format!(
                "moment order must be at least 2, got {order}"
            )));
        }
        Ok(PrivacyBudget::Mip { eta, order })
    }

    pub fn dp(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::validation(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(PrivacyBudget::Dp { epsilon })
    }
}

pub(crate) fn validate_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 0.5 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "eta must lie in (0, 1/2], got {eta}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_validate() {
        assert!(PrivacyBudget::mip(0.1, 2).is_ok());
        assert!(PrivacyBudget::mip(0.5, 4).is_ok());
        assert!(PrivacyBudget::mip(0.0, 2).is_err());
        assert!(PrivacyBudget::mip(0.6, 2).is_err());
        assert!(PrivacyBudget::mip(0.1, 1).is_err());
        assert!(PrivacyBudget::dp(0.0).is_err());
        assert!(PrivacyBudget::dp(f64::INFINITY).is_err());
    }

    #[test]
    fn serializes_with_kind_tag() {
        let s = serde_json::to_string(&PrivacyBudget::mip(0.25, 2).unwrap()).unwrap();
        assert_eq!(s, r#"{"kind":"mip","eta":0.25,"order":2}"#);
    }
}
