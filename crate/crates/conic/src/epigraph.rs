//! Second-order-cone epigraph of a convex quadratic.
//!
//! A PSD quadratic `z^T Q z` is factored as `||F z||^2` with `F` obtained
//! from the eigendecomposition of `Q` (eigenvalues clipped at zero), so that
//! `min z^T Q z + q^T z` becomes `min t + q^T z` subject to
//! `||[2 F z; 1 - t]|| <= 1 + t`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::ProblemError;

/// Factor of a PSD quadratic form: `z^T Q z = ||rows * z||^2`.
#[derive(Clone, Debug)]
pub struct QuadraticFactor {
    /// `rank x n` dense factor.
    pub rows: DMatrix<f64>,
}

impl QuadraticFactor {
    pub fn rank(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Evaluate `z^T Q z` through the factor.
    pub fn quad_value(&self, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows.nrows() {
            let mut r = 0.0;
            for j in 0..self.rows.ncols() {
                r += self.rows[(i, j)] * z[j];
            }
            acc += r * r;
        }
        acc
    }
}

/// Factor a symmetric PSD matrix for the epigraph reformulation.
///
/// Eigenvalues in `[-1e-9 ||Q||, 0)` are treated as roundoff and clipped to
/// zero; anything below that band is a contract violation.
pub fn quadratic_epigraph(q: &DMatrix<f64>) -> Result<QuadraticFactor, ProblemError> {
    let n = q.nrows();
    if q.ncols() != n {
        return Err(ProblemError::DimensionMismatch {
            what: "quadratic objective matrix must be square".into(),
        });
    }
    let sym = (q + q.transpose()) * 0.5;
    let asym = (q - q.transpose()).norm();
    if asym > 1e-8 * (1.0 + q.norm()) {
        return Err(ProblemError::NotSymmetric);
    }
    let eig = SymmetricEigen::new(sym);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min_ev = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_ev < -1e-9 * max_ev.max(1.0) {
        return Err(ProblemError::IndefiniteQuadratic { min_eig: min_ev });
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 1e-14 * max_ev.max(1.0))
        .collect();
    let mut rows = DMatrix::zeros(keep.len(), n);
    for (r, &i) in keep.iter().enumerate() {
        let s = eig.eigenvalues[i].sqrt();
        for j in 0..n {
            rows[(r, j)] = s * eig.eigenvectors[(j, i)];
        }
    }
    Ok(QuadraticFactor { rows })
}
