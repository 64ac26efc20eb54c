use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::FeatureSet;
use crate::error::{Error, Result};

/// Mean and covariance of a feature distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianSummary {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::Data(format!(
                "covariance {}x{} does not match mean of length {}",
                cov.nrows(),
                cov.ncols(),
                mean.len()
            )));
        }
        Ok(GaussianSummary { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance plus a shrinkage floor
/// `εI`, `ε = 1e-6 · trace / d`.
pub fn fit_gaussian(fs: &FeatureSet) -> Result<GaussianSummary> {
    let (n, d) = (fs.n_samples, fs.dim);
    if n == 0 || d == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: n });
    }
    let mut mean = DVector::zeros(d);
    for i in 0..n {
        for (m, &v) in mean.iter_mut().zip(fs.row(i)) {
            *m += v;
        }
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    if n > 1 {
        let centered = DMatrix::from_fn(n, d, |i, j| fs.row(i)[j] - mean[j]);
        cov = centered.transpose() * &centered / (n - 1) as f64;
    }
    let eps = 1e-6 * cov.trace() / d as f64;
    for j in 0..d {
        cov[(j, j)] += eps;
    }
    symmetrize(&mut cov);
    Ok(GaussianSummary { mean, cov })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Principal square root of a symmetric positive semi-definite matrix via
/// its eigendecomposition; slightly negative eigenvalues are clamped to 0.
pub fn matrix_sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Data(format!("matrix_sqrt_psd needs a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let mut sym = m.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| libm::sqrt(l.max(0.0))).collect();
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    let mut r = scaled * v.transpose();
    symmetrize(&mut r);
    Ok(r)
}

/// `|μ1 - μ2|² + tr(Σ1 + Σ2 - 2 (Σ1^½ Σ2 Σ1^½)^½)`, clamped at zero.
///
/// The cross term is evaluated as the nuclear norm of `Σ1^½ Σ2^½`, which
/// equals the trace above without taking square roots of the tiny
/// eigenvalues of a rank-deficient product.
pub fn frechet_distance(g1: &GaussianSummary, g2: &GaussianSummary) -> Result<f64> {
    if g1.dim() != g2.dim() {
        return Err(Error::Data(format!(
            "cannot compare {}-dimensional and {}-dimensional summaries",
            g1.dim(),
            g2.dim()
        )));
    }
    let diff = &g1.mean - &g2.mean;
    let root1 = matrix_sqrt_psd(&g1.cov)?;
    let root2 = matrix_sqrt_psd(&g2.cov)?;
    let cross: f64 = (root1 * root2).singular_values().iter().sum();
    let value = diff.dot(&diff) + g1.cov.trace() + g2.cov.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_fit() {
        let fs = FeatureSet::from_rows(alloc::vec![alloc::vec![0.0, 0.0], alloc::vec![2.0, 2.0]], "test").unwrap();
        let g = fit_gaussian(&fs).unwrap();
        assert_eq!(g.mean.as_slice(), &[1.0, 1.0]);
        // unbiased: each variance is ((−1)² + 1²)/(2−1) = 2; ε = 1e-6·4/2
        let eps = 2e-6;
        assert!((g.cov[(0, 0)] - (2.0 + eps)).abs() < 1e-15);
        assert!((g.cov[(0, 1)] - 2.0).abs() < 1e-15);
        assert!((g.cov[(1, 1)] - (2.0 + eps)).abs() < 1e-15);
    }

    #[test]
    fn repeated_point_has_floor_covariance() {
        let fs = FeatureSet::from_rows(alloc::vec![alloc::vec![3.0, -1.0, 2.0]; 5], "test").unwrap();
        let g = fit_gaussian(&fs).unwrap();
        assert_eq!(g.mean.as_slice(), &[3.0, -1.0, 2.0]);
        assert!(g.cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_roots() {
        let r = matrix_sqrt_psd(&DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![4.0, 9.0]))).unwrap();
        assert!((r[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((r[(1, 1)] - 3.0).abs() < 1e-12);
        assert!(r[(0, 1)].abs() < 1e-12);
        let id = matrix_sqrt_psd(&DMatrix::identity(5, 5)).unwrap();
        assert!((id - DMatrix::<f64>::identity(5, 5)).norm() < 1e-12);
    }
}
