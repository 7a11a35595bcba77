//! Base algorithms: deterministic maps from a training subset to a vector.

use std::fmt;

use crate::data::DatasetTable;
use crate::subset::SubsetMask;

/// A deterministic map from a subset of a dataset to an output vector.
///
/// The same subset must always give bit-identical output. The exact
/// attacker and the moment enumeration rely on it.
pub trait BaseAlgorithm: Send + Sync {
    fn name(&self) -> &str;

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64>;
}

impl<A: BaseAlgorithm + ?Sized> BaseAlgorithm for &A {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        (**self).evaluate(data, subset)
    }
}

impl<A: BaseAlgorithm + ?Sized> BaseAlgorithm for std::sync::Arc<A> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        (**self).evaluate(data, subset)
    }
}

/// Column-wise mean of the selected records.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanQuery;

impl BaseAlgorithm for MeanQuery {
    fn name(&self) -> &str {
        "mean"
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        let mut acc = vec![0.0; data.dim()];
        let mut k = 0usize;
        for i in subset.iter() {
            for (a, x) in acc.iter_mut().zip(data.record(i)) {
                *a += x;
            }
            k += 1;
        }
        if k > 0 {
            acc.iter_mut().for_each(|a| *a /= k as f64);
        }
        acc
    }
}

/// `1 / sum(x)` over a one-column subset.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReciprocalSum;

impl BaseAlgorithm for ReciprocalSum {
    fn name(&self) -> &str {
        "reciprocal-sum"
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        let s: f64 = subset.iter().map(|i| data.record(i)[0]).sum();
        vec![1.0 / s]
    }
}

/// Uncentered second-moment matrix `(1/k) sum x x^T`, flattened row-major.
///
/// This is the minimizer of `||A - (1/k) sum x x^T||_F^2`, the covariance
/// fit used by the synthetic-data study.
#[derive(Debug, Clone, Copy, Default)]
pub struct SecondMoment;

impl BaseAlgorithm for SecondMoment {
    fn name(&self) -> &str {
        "covariance"
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        second_moment(data, subset)
    }
}

pub(crate) fn second_moment(data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
    let d = data.dim();
    let mut acc = vec![0.0; d * d];
    let mut k = 0usize;
    for i in subset.iter() {
        let x = data.record(i);
        for r in 0..d {
            for c in 0..d {
                acc[r * d + c] += x[r] * x[c];
            }
        }
        k += 1;
    }
    if k > 0 {
        acc.iter_mut().for_each(|a| *a /= k as f64);
    }
    acc
}

/// Returns the same vector for every subset.
#[derive(Debug, Clone)]
pub struct ConstantAlgorithm(pub Vec<f64>);

impl BaseAlgorithm for ConstantAlgorithm {
    fn name(&self) -> &str {
        "constant"
    }

    fn evaluate(&self, _: &DatasetTable, _: &SubsetMask) -> Vec<f64> {
        self.0.clone()
    }
}

/// Adapts a closure over the selected records.
pub struct FnAlgorithm<F> {
    name: String,
    f: F,
}

impl<F> FnAlgorithm<F>
where
    F: Fn(&[&[f64]]) -> Vec<f64> + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
        }
    }
}

impl<F> fmt::Debug for FnAlgorithm<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnAlgorithm").field("name", &self.name).finish()
    }
}

impl<F> BaseAlgorithm for FnAlgorithm<F>
where
    F: Fn(&[&[f64]]) -> Vec<f64> + Send + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }

    fn evaluate(&self, data: &DatasetTable, subset: &SubsetMask) -> Vec<f64> {
        let rows: Vec<&[f64]> = subset.iter().map(|i| data.record(i)).collect();
        (self.f)(&rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_selected_rows() {
        let d = DatasetTable::from_rows(&[[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]]).unwrap();
        let m = SubsetMask::from_indices(3, [0, 2]).unwrap();
        assert_eq!(MeanQuery.evaluate(&d, &m), vec![2.0, 4.5]);
    }

    #[test]
    fn second_moment_is_symmetric_outer_average() {
        let d = DatasetTable::from_rows(&[[1.0, 2.0], [3.0, -1.0]]).unwrap();
        let out = SecondMoment.evaluate(&d, &d.full_mask());
        assert_eq!(out, vec![5.0, -0.5, -0.5, 2.5]);
    }

    #[test]
    fn closure_adapter() {
        let d = DatasetTable::from_scalars(&[1.0, 2.0, 5.0]).unwrap();
        let max = FnAlgorithm::new("max", |rows: &[&[f64]]| {
            vec![rows.iter().map(|r| r[0]).fold(f64::MIN, f64::max)]
        });
        assert_eq!(max.evaluate(&d, &d.full_mask()), vec![5.0]);
        assert_eq!(ReciprocalSum.evaluate(&d, &d.full_mask()), vec![0.125]);
    }
}
