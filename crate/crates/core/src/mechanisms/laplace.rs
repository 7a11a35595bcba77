use std::sync::Arc;

use crate::algorithm::BaseAlgorithm;
use crate::budget::PrivacyBudget;
use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::noise::laplace_unchecked;
use crate::rng::{SeedStream, StreamRng};
use crate::subset::{random_half_split, SubsetMask};

use super::{check_output, ConditionalDensity, Mechanism, MechanismOutput};

fn validate(epsilon: f64, sensitivity: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::validation(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(Error::validation(format!(
            "sensitivity must be positive, got {sensitivity}"
        )));
    }
    Ok(())
}

/// `A(train) + L` with independent Laplace(sensitivity / epsilon) coordinates.
pub struct LaplaceMechanism {
    id: String,
    data: DatasetTable,
    alg: Arc<dyn BaseAlgorithm>,
    epsilon: f64,
    scale: f64,
}

impl LaplaceMechanism {
    pub fn new(
        data: DatasetTable,
        alg: impl BaseAlgorithm + 'static,
        epsilon: f64,
        sensitivity: f64,
    ) -> Result<Self> {
        validate(epsilon, sensitivity)?;
        Ok(Self {
            id: format!("laplace-dp/{}", alg.name()),
            data,
            alg: Arc::new(alg),
            epsilon,
            scale: sensitivity / epsilon,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl Mechanism for LaplaceMechanism {
    type Output = Vec<f64>;

    fn id(&self) -> &str {
        &self.id
    }

    fn data(&self) -> &DatasetTable {
        &self.data
    }

    fn budget(&self) -> Option<PrivacyBudget> {
        Some(PrivacyBudget::Dp { epsilon: self.epsilon })
    }

    fn release(&self, train: &SubsetMask, rng: &mut StreamRng) -> Vec<f64> {
        self.alg
            .evaluate(&self.data, train)
            .into_iter()
            .map(|t| t + laplace_unchecked(self.scale, rng))
            .collect()
    }
}

impl ConditionalDensity for LaplaceMechanism {
    fn log_density(&self, output: &Vec<f64>, train: &SubsetMask) -> f64 {
        let theta = self.alg.evaluate(&self.data, train);
        let d = theta.len() as f64;
        let l1: f64 = output.iter().zip(&theta).map(|(o, t)| (o - t).abs()).sum();
        -l1 / self.scale - d * (2.0 * self.scale).ln()
    }
}

/// Random half-split, then `A(train)` plus Laplace(sensitivity / epsilon) noise.
pub fn privatize_laplace_dp<A: BaseAlgorithm + ?Sized>(
    data: &DatasetTable,
    alg: &A,
    epsilon: f64,
    sensitivity: f64,
    seed: u64,
) -> Result<MechanismOutput> {
    validate(epsilon, sensitivity)?;
    let stream = SeedStream::new(seed);
    let (train, _) = random_half_split(data, &stream)?;
    let theta = alg.evaluate(data, &train);
    check_output(alg, &theta)?;
    let scale = sensitivity / epsilon;
    let mut rng = stream.named("noise").rng();
    let released = theta.iter().map(|t| t + laplace_unchecked(scale, &mut rng)).collect();
    Ok(MechanismOutput::new(released, format!("laplace-dp/{}", alg.name()), seed, scale)?
        .with_meta("epsilon", epsilon)
        .with_meta("sensitivity", sensitivity)
        .with_meta("train_size", train.count()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::ConstantAlgorithm;
    use crate::rng::SeedStream;

    #[test]
    fn unit_budget_noise_variance_is_two() {
        let data = DatasetTable::from_scalars(&[0.0, 1.0]).unwrap();
        let m = LaplaceMechanism::new(data, ConstantAlgorithm(vec![0.0, 0.0]), 1.0, 1.0).unwrap();
        let mut rng = SeedStream::new(7).rng();
        let train = SubsetMask::from_indices(2, [0]).unwrap();
        let n = 500_000;
        let mut acc = [0.0; 2];
        for _ in 0..n {
            let o = m.release(&train, &mut rng);
            acc[0] += o[0] * o[0];
            acc[1] += o[1] * o[1];
        }
        for a in acc {
            assert!((a / n as f64 / 2.0 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn large_epsilon_approaches_base_output() {
        let data = DatasetTable::from_scalars(&[2.0, 4.0, 6.0, 8.0]).unwrap();
        let out = privatize_laplace_dp(&data, &ConstantAlgorithm(vec![3.0]), 1e9, 1.0, 1).unwrap();
        assert!((out.theta_hat[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let data = DatasetTable::from_scalars(&[2.0, 4.0]).unwrap();
        let alg = ConstantAlgorithm(vec![3.0]);
        assert!(privatize_laplace_dp(&data, &alg, 1.0, 0.0, 1).is_err());
        assert!(privatize_laplace_dp(&data, &alg, 0.0, 1.0, 1).is_err());
        assert!(LaplaceMechanism::new(data, alg, -1.0, 1.0).is_err());
    }

    #[test]
    fn density_ratio_across_masks_bounded_by_budget() {
        use crate::algorithm::MeanQuery;
        let data = DatasetTable::from_scalars(&[0.0, 1.0]).unwrap();
        let m = LaplaceMechanism::new(data, MeanQuery, 0.7, 1.0).unwrap();
        let a = SubsetMask::from_indices(2, [0]).unwrap();
        let b = SubsetMask::from_indices(2, [1]).unwrap();
        for o in [-3.0, 0.2, 0.5, 4.0] {
            let r = m.log_density(&vec![o], &a) - m.log_density(&vec![o], &b);
            assert!(r.abs() <= 0.7 + 1e-12);
        }
    }
}
