use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `(A + A^T)^(1/2)`: symmetrizes without halving, clamps negative
/// eigenvalues to zero and returns the principal square root.
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    principal_sqrt(&(a + a.transpose()))
}

/// Principal square root of the symmetric part of `s`, negative eigenvalues
/// clamped to zero.
pub fn principal_sqrt(s: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Frobenius-norm relative error `||a - truth||_F / ||truth||_F`.
pub fn relative_error(a: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(truth).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = truth.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Gradient of `||A - S||_F^2` with respect to `A`.
pub fn covariance_gradient(a: &[f64], s: &[f64]) -> Vec<f64> {
    a.iter().zip(s).map(|(x, y)| 2.0 * (x - y)).collect()
}

/// Gradient descent on `||A - S||_F^2` from `A = 0`.
pub fn fit_covariance_gd(s: &[f64], lr: f64, steps: usize) -> Result<Vec<f64>> {
    let mut a = vec![0.0; s.len()];
    for step in 0..steps {
        let g = covariance_gradient(&a, s);
        for (x, gi) in a.iter_mut().zip(g) {
            *x -= lr * gi;
        }
        let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !frob.is_finite() || frob > crate::mechanisms::DIVERGENCE_LIMIT {
            return Err(Error::Divergence { step });
        }
    }
    Ok(a)
}

/// Orthogonal `d x d` matrix from the QR factorization of a Gaussian matrix,
/// with column signs fixed so the distribution is Haar.
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric positive definite check by eigenvalues.
pub fn check_spd(s: &DMatrix<f64>) -> Result<()> {
    if !s.is_square() || (s - s.transpose()).amax() > 1e-10 * s.amax().max(1.0) {
        return Err(Error::validation("covariance must be a symmetric square matrix"));
    }
    let eig = SymmetricEigen::new(s.clone());
    if eig.eigenvalues.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::validation("covariance must be positive definite"));
    }
    Ok(())
}
