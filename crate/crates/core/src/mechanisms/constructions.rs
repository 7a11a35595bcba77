//! Small mechanisms with exact PMFs that witness the relationship between
//! DP and MIP.

use rand::Rng;

use crate::budget::PrivacyBudget;
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::subset::SubsetMask;

use super::{ConditionalDensity, FiniteSupport, Mechanism};

/// Publishes each training record independently with probability `p`.
#[derive(Debug, Clone)]
pub struct SubsetPublisher {
    data: DatasetTable,
    p: f64,
}

impl SubsetPublisher {
    pub fn new(data: DatasetTable, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Self { data, p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Mechanism for SubsetPublisher {
    type Output = SubsetMask;

    fn id(&self) -> &str {
        "subset-publisher"
    }

    fn data(&self) -> &DatasetTable {
        &self.data
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> SubsetMask {
        let mut out = SubsetMask::empty(train.len());
        for i in train.iter() {
            if rng.random::<f64>() < self.p {
                out.insert(i);
            }
        }
        out
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

impl ConditionalDensity for SubsetPublisher {
    fn log_density(&self, output: &SubsetMask, train: &SubsetMask) -> f64 {
        if !output.is_subset_of(train) {
            return f64::NEG_INFINITY;
        }
        let shown = output.count() as f64;
        let hidden = (train.count() - output.count()) as f64;
        xlogy(shown, self.p) + xlogy(hidden, 1.0 - self.p)
    }
}

impl FiniteSupport for SubsetPublisher {
    fn support(&self) -> Vec<SubsetMask> {
        let n = self.data.len();
        let k = self.train_size();
        assert!(n <= 24, "support enumeration limited to 24 records");
        (0u64..1 << n)
            .filter(|bits| bits.count_ones() as usize <= k)
            .map(|bits| {
                SubsetMask::from_indices(n, (0..n).filter(|i| bits >> i & 1 == 1)).expect("in range")
            })
            .collect()
    }
}

/// On the two-record dataset `{0, 1}` with one training record: releases the
/// training record with probability `1/(1 + e^-epsilon)`, the other one
/// otherwise. This is exactly epsilon-DP and the optimal attacker's accuracy
/// equals that probability.
#[derive(Debug, Clone)]
pub struct BinaryTightDp {
    data: DatasetTable,
    epsilon: f64,
    keep: f64,
}

impl BinaryTightDp {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::validation(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            data: DatasetTable::from_scalars(&[0.0, 1.0])?,
            epsilon,
            keep: 1.0 / (1.0 + (-epsilon).exp()),
        })
    }

    /// Probability of releasing the training record.
    pub fn keep_probability(&self) -> f64 {
        self.keep
    }
}

impl Mechanism for BinaryTightDp {
    type Output = SubsetMask;

    fn id(&self) -> &str {
        "binary-tight-dp"
    }

    fn data(&self) -> &DatasetTable {
        &self.data
    }

    fn budget(&self) -> Option<PrivacyBudget> {
        Some(PrivacyBudget::Dp { epsilon: self.epsilon })
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> SubsetMask {
        if rng.random::<f64>() < self.keep {
            train.clone()
        } else {
            train.complement()
        }
    }
}

impl ConditionalDensity for BinaryTightDp {
    fn log_density(&self, output: &SubsetMask, train: &SubsetMask) -> f64 {
        if output == train {
            self.keep.ln()
        } else if *output == train.complement() {
            (1.0 - self.keep).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

impl FiniteSupport for BinaryTightDp {
    fn support(&self) -> Vec<SubsetMask> {
        vec![
            SubsetMask::from_indices(2, [0]).expect("in range"),
            SubsetMask::from_indices(2, [1]).expect("in range"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn publisher_pmf_sums_to_one() {
        let data = DatasetTable::from_scalars(&[0.0; 6]).unwrap();
        let m = SubsetPublisher::new(data, 0.3).unwrap();
        let train = SubsetMask::from_indices(6, [1, 2, 4]).unwrap();
        let total: f64 = m.support().iter().map(|o| m.conditional_density(o, &train)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(m.support().len(), 42);
    }

    #[test]
    fn publisher_extremes() {
        let data = DatasetTable::from_scalars(&[0.0; 4]).unwrap();
        let train = SubsetMask::from_indices(4, [0, 3]).unwrap();
        let mut rng = SeedStream::new(1).rng();
        let none = SubsetPublisher::new(data.clone(), 0.0).unwrap();
        assert!(none.release(&train, &mut rng).is_empty());
        let all = SubsetPublisher::new(data.clone(), 1.0).unwrap();
        assert_eq!(all.release(&train, &mut rng), train);
        assert!(SubsetPublisher::new(data, 1.5).is_err());
    }

    #[test]
    fn binary_pmf_ratio_is_exp_epsilon() {
        let m = BinaryTightDp::new(3f64.ln()).unwrap();
        assert!((m.keep_probability() - 0.75).abs() < 1e-15);
        let [a, b]: [SubsetMask; 2] = m.support().try_into().unwrap();
        let r = m.conditional_density(&a, &a) / m.conditional_density(&a, &b);
        assert!((r - 3.0).abs() < 1e-12);
        assert!(BinaryTightDp::new(0.0).is_err());
    }
}
