//! Symmetric-matrix vectorizations.
//!
//! Two encodings are used throughout the crate:
//!
//! * `svec` for real symmetric `n x n` matrices: length `n(n+1)/2`,
//!   lower triangle in column-major order, off-diagonal entries scaled
//!   by `sqrt(2)` so that `<svec(A), svec(B)> = tr(A B)`.
//! * A Hermitian encoding for complex `m x m` Hermitian matrices: length
//!   `m^2`, laid out as the `m` (real) diagonal entries followed by
//!   `(sqrt(2) Re, sqrt(2) Im)` pairs of the strict upper triangle in
//!   row-major order, so that `<u, v> = Re tr(A^H B)`.
//!
//! A Hermitian matrix is fed to the real PSD cone through the standard
//! embedding `[[Re A, -Im A], [Im A, Re A]]`, which is symmetric and PSD
//! exactly when `A` is. The embedding is linear and maps each Hermitian
//! coordinate to two real svec coordinates with coefficients `+-1`.

use nalgebra::DMatrix;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Length of the real symmetric svec for side `n`.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index of entry `(i, j)` with `i >= j` in the real symmetric svec.
pub fn svec_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i >= j && i < n);
    j * (2 * n - j + 1) / 2 + (i - j)
}

/// Pack a real symmetric matrix into svec form.
pub fn svec_of(mat: &DMatrix<f64>) -> Vec<f64> {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols());
    let mut out = vec![0.0; svec_len(n)];
    for j in 0..n {
        for i in j..n {
            let v = mat[(i, j)];
            out[svec_index(i, j, n)] = if i == j { v } else { SQRT2 * v };
        }
    }
    out
}

/// Unpack an svec into a dense symmetric matrix.
pub fn smat_of(v: &[f64], n: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), svec_len(n));
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let x = v[svec_index(i, j, n)];
            if i == j {
                out[(i, j)] = x;
            } else {
                let x = x / SQRT2;
                out[(i, j)] = x;
                out[(j, i)] = x;
            }
        }
    }
    out
}

/// Length of the Hermitian encoding for side `m`.
pub fn herm_len(m: usize) -> usize {
    m * m
}

/// Coordinate of the diagonal entry `(i, i)` in the Hermitian encoding.
pub fn herm_diag(i: usize) -> usize {
    i
}

fn upper_pair(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// Coordinate of `sqrt(2) Re A[i, j]` for `i < j`.
pub fn herm_re(i: usize, j: usize, m: usize) -> usize {
    m + 2 * upper_pair(i, j, m)
}

/// Coordinate of `sqrt(2) Im A[i, j]` for `i < j`.
pub fn herm_im(i: usize, j: usize, m: usize) -> usize {
    m + 2 * upper_pair(i, j, m) + 1
}

/// One elementary term `w * e_a e_b^T` of an embedded basis matrix.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ElemTerm {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

/// Precomputed real embedding of the Hermitian encoding for side `m`.
///
/// For each Hermitian coordinate `r` this stores
/// * the two real svec coordinates (side `2m`) it maps to, with signs, and
/// * the decomposition of the embedded basis matrix into elementary
///   `e_a e_b^T` terms, used for fast congruence assembly.
pub(crate) struct HermEmbedding {
    pub m: usize,
    /// `cols[r]` = list of `(real svec coordinate, coefficient)`.
    pub cols: Vec<Vec<(usize, f64)>>,
    /// `terms[r]` = elementary-matrix decomposition of `smat(E e_r)`.
    pub terms: Vec<Vec<ElemTerm>>,
}

impl HermEmbedding {
    pub fn new(m: usize) -> Self {
        let ne = 2 * m;
        let hl = herm_len(m);
        let mut cols = vec![Vec::new(); hl];
        let mut terms = vec![Vec::new(); hl];
        let s = 1.0 / SQRT2;
        for i in 0..m {
            let r = herm_diag(i);
            cols[r].push((svec_index(i, i, ne), 1.0));
            cols[r].push((svec_index(m + i, m + i, ne), 1.0));
            terms[r].push(ElemTerm { a: i, b: i, w: 1.0 });
            terms[r].push(ElemTerm { a: m + i, b: m + i, w: 1.0 });
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let r = herm_re(i, j, m);
                cols[r].push((svec_index(j, i, ne), 1.0));
                cols[r].push((svec_index(m + j, m + i, ne), 1.0));
                for (a, b) in [(j, i), (i, j), (m + j, m + i), (m + i, m + j)] {
                    terms[r].push(ElemTerm { a, b, w: s });
                }

                let r = herm_im(i, j, m);
                cols[r].push((svec_index(m + i, j, ne), 1.0));
                cols[r].push((svec_index(m + j, i, ne), -1.0));
                for (a, b, w) in [
                    (m + i, j, s),
                    (j, m + i, s),
                    (m + j, i, -s),
                    (i, m + j, -s),
                ] {
                    terms[r].push(ElemTerm { a, b, w });
                }
            }
        }
        HermEmbedding { m, cols, terms }
    }

    /// Embedded real svec length (`svec_len(2m)`).
    pub fn embedded_len(&self) -> usize {
        svec_len(2 * self.m)
    }

    /// Apply the embedding: Hermitian encoding -> real svec of side `2m`.
    pub fn apply(&self, herm: &[f64], out: &mut [f64]) {
        debug_assert_eq!(herm.len(), herm_len(self.m));
        debug_assert_eq!(out.len(), self.embedded_len());
        out.fill(0.0);
        for (r, &v) in herm.iter().enumerate() {
            if v != 0.0 {
                for &(c, w) in &self.cols[r] {
                    out[c] += w * v;
                }
            }
        }
    }

    /// Apply the transpose: real svec of side `2m` -> Hermitian encoding.
    pub fn apply_t(&self, real: &[f64], out: &mut [f64]) {
        debug_assert_eq!(real.len(), self.embedded_len());
        debug_assert_eq!(out.len(), herm_len(self.m));
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(c, w) in &self.cols[r] {
                acc += w * real[c];
            }
            *o = acc;
        }
    }

    /// `B[r, r'] = tr(X_r T X_{r'} T)` for all Hermitian coordinate pairs,
    /// where `X_r = smat(E e_r)` and `T` is symmetric. This is the matrix of
    /// the congruence `u -> E^T svec(T smat(E u) T)` used in KKT assembly.
    pub fn congruence(&self, t: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let hl = herm_len(self.m);
        debug_assert_eq!(out.nrows(), hl);
        for r in 0..hl {
            for rp in r..hl {
                let mut acc = 0.0;
                for u in &self.terms[r] {
                    for v in &self.terms[rp] {
                        acc += u.w * v.w * t[(u.b, v.a)] * t[(v.b, u.a)];
                    }
                }
                out[(r, rp)] = acc;
                out[(rp, r)] = acc;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_roundtrip_and_isometry() {
        let n = 5;
        let mut a = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        a = &a + a.transpose();
        let v = svec_of(&a);
        let back = smat_of(&v, n);
        assert!((&a - &back).norm() < 1e-14);

        let mut b = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j) % 7) as f64 - 3.0);
        b = &b + b.transpose();
        let w = svec_of(&b);
        let dot: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum();
        assert!((dot - (a * b).trace()).abs() < 1e-10);
    }

    #[test]
    fn embedding_matches_dense_construction() {
        let m = 3;
        let emb = HermEmbedding::new(m);
        // Hermitian A with re/im parts; build its encoding by the layout.
        let re = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, -1.0, 0.5, 3.0, 0.25, -1.0, 0.25, 1.5]);
        let im = DMatrix::from_row_slice(3, 3, &[0.0, 0.7, -0.2, -0.7, 0.0, 0.9, 0.2, -0.9, 0.0]);
        let mut h = vec![0.0; herm_len(m)];
        for i in 0..m {
            h[herm_diag(i)] = re[(i, i)];
        }
        for i in 0..m {
            for j in (i + 1)..m {
                h[herm_re(i, j, m)] = SQRT2 * re[(i, j)];
                h[herm_im(i, j, m)] = SQRT2 * im[(i, j)];
            }
        }
        let mut out = vec![0.0; emb.embedded_len()];
        emb.apply(&h, &mut out);
        let x = smat_of(&out, 2 * m);
        // Expected [[re, -im], [im, re]].
        for i in 0..m {
            for j in 0..m {
                assert!((x[(i, j)] - re[(i, j)]).abs() < 1e-12);
                assert!((x[(i, j + m)] + im[(i, j)]).abs() < 1e-12);
                assert!((x[(i + m, j)] - im[(i, j)]).abs() < 1e-12);
                assert!((x[(i + m, j + m)] - re[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn congruence_matches_direct_evaluation() {
        let m = 2;
        let emb = HermEmbedding::new(m);
        let ne = 2 * m;
        let mut t = DMatrix::from_fn(ne, ne, |i, j| ((i * 3 + j * 5) % 13) as f64 / 7.0);
        t = &t + t.transpose();
        let hl = herm_len(m);
        let mut b = DMatrix::zeros(hl, hl);
        emb.congruence(&t, &mut b);

        // Direct: B[r,r'] = (E e_r)^T svec(T smat(E e_r') T).
        for r in 0..hl {
            for rp in 0..hl {
                let mut er = vec![0.0; hl];
                er[rp] = 1.0;
                let mut embedded = vec![0.0; emb.embedded_len()];
                emb.apply(&er, &mut embedded);
                let xm = smat_of(&embedded, ne);
                let txt = &t * &xm * &t;
                let sv = svec_of(&txt);
                let mut lhs = vec![0.0; hl];
                er.fill(0.0);
                er[r] = 1.0;
                emb.apply(&er, &mut embedded);
                emb.apply_t(&sv, &mut lhs);
                assert!((b[(r, rp)] - lhs[r]).abs() < 1e-10, "({r},{rp})");
            }
        }
    }
}
