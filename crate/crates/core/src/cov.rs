//! Validated Hermitian PSD covariance matrices.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// A complex Hermitian PSD matrix. Construction validates Hermiticity to
/// `1e-10` and positive semidefiniteness to `-1e-9 * lambda_max`, then
/// stores the exactly symmetrized matrix.
#[derive(Clone, Debug)]
pub struct HermitianCov {
    mat: DMatrix<Complex64>,
}

impl HermitianCov {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(CoreError::Dimension("covariance must be square".into()));
        }
        let scale = mat.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
        let dev = (&mat - mat.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dev > 1e-10 * scale {
            return Err(CoreError::NotHermitian { deviation: dev });
        }
        let mat = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(mat.clone());
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let min_ev = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_ev < -1e-9 * max_ev.max(1e-300) {
            return Err(CoreError::NotPsd { min_eig: min_ev });
        }
        Ok(HermitianCov { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.mat.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    /// Number of eigenvalues above `rel_threshold * lambda_max`.
    pub fn rank_above(&self, rel_threshold: f64) -> usize {
        let ev = self.eigenvalues();
        let cut = rel_threshold * ev[0].max(0.0);
        ev.iter().filter(|&&v| v > cut).count()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.mat.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        m[(1, 0)] = Complex64::new(0.0, 1.0); // should be -i to be Hermitian
        assert!(matches!(
            HermitianCov::new(m),
            Err(CoreError::NotHermitian { .. })
        ));
    }

    #[test]
    fn rejects_indefinite() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        m[(1, 1)] = Complex64::new(-1.0, 0.0);
        assert!(matches!(HermitianCov::new(m), Err(CoreError::NotPsd { .. })));
    }

    #[test]
    fn rank_counting() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = Complex64::new(2.0, 0.0);
        m[(1, 1)] = Complex64::new(1.0, 0.0);
        m[(2, 2)] = Complex64::new(1e-6, 0.0);
        let c = HermitianCov::new(m).unwrap();
        assert_eq!(c.rank_above(1e-3), 2);
        assert_eq!(c.rank_above(1e-9), 3);
    }
}
