//! Dense LDL^T factorization of quasi-definite KKT matrices.
//!
//! The reduced interior-point system `[H, A^T; A, 0]` is factored without
//! pivoting. Near convergence its condition number grows like the inverse
//! squared barrier parameter and exceeds what plain f64 elimination can
//! resolve, so a second factorization path accumulates inner products in
//! double-double arithmetic (Dekker two-product, Neumaier two-sum); the
//! solver switches to it when iterative refinement flags a bad factor.

/// Row-major dense symmetric matrix, factored in place.
pub(crate) struct LdlFactor {
    n: usize,
    /// Lower triangle of L (unit diagonal) packed into a full row-major
    /// buffer; the strict upper triangle is scratch.
    l: Vec<f64>,
    pub(crate) d: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    let mut s3 = 0.0;
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for i in 4 * chunks..a.len() {
        s0 += a[i] * b[i];
    }
    s0 + s1 + s2 + s3
}

/// Double-double accumulator value.
#[derive(Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    // Dekker splitting; exact when no overflow occurs.
    const SPLIT: f64 = 134_217_729.0; // 2^27 + 1
    let p = a * b;
    let a_c = SPLIT * a;
    let a_hi = a_c - (a_c - a);
    let a_lo = a - a_hi;
    let b_c = SPLIT * b;
    let b_hi = b_c - (b_c - b);
    let b_lo = b - b_hi;
    let err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo;
    (p, err)
}

impl Dd {
    #[inline]
    fn add_prod(&mut self, a: f64, b: f64) {
        let (p, pe) = two_prod(a, b);
        let (s, se) = two_sum(self.hi, p);
        self.hi = s;
        self.lo += se + pe;
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn dot_dd(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Dd::default();
    for i in 0..a.len() {
        acc.add_prod(a[i], b[i]);
    }
    acc.value()
}

impl LdlFactor {
    /// Factor a symmetric matrix given by its full row-major buffer.
    ///
    /// `n_pos` is the size of the leading block whose D entries are expected
    /// positive; the trailing block is expected negative. Regularization is
    /// dynamic only: a pivot that loses its sign to roundoff is nudged to a
    /// floor proportional to its own original diagonal entry, and the
    /// caller's iterative refinement absorbs the perturbation.
    pub fn factor(mut mat: Vec<f64>, n: usize, n_pos: usize, precise: bool) -> Option<LdlFactor> {
        debug_assert_eq!(mat.len(), n * n);
        let mut d = vec![0.0; n];
        let mut w = vec![0.0; n];
        let eps_floor = if precise { 1e-28 } else { 1e-15 };
        for j in 0..n {
            {
                let row_j = &mat[j * n..j * n + j];
                for k in 0..j {
                    w[k] = row_j[k] * d[k];
                }
            }
            let row_j = &mat[j * n..j * n + j];
            let acc = if precise {
                dot_dd(row_j, &w[..j])
            } else {
                dot(row_j, &w[..j])
            };
            let mut dj = mat[j * n + j] - acc;
            if !dj.is_finite() {
                return None;
            }
            // Intervene only when roundoff may have destroyed the pivot's
            // sign; the uncertainty scales with the cancelled mass, and
            // legitimate pivots can be many orders below their original
            // diagonal in a quasi-definite matrix.
            let floor = eps_floor * (mat[j * n + j].abs() + acc.abs()) + f64::MIN_POSITIVE;
            if j < n_pos {
                if dj < floor {
                    dj = floor;
                }
            } else if dj > -floor {
                dj = -floor;
            }
            d[j] = dj;
            for i in (j + 1)..n {
                let (lo, hi) = mat.split_at_mut(i * n);
                let row_j = &lo[j * n..j * n + j];
                let row_i = &mut hi[..n];
                let acc = if precise {
                    dot_dd(&row_i[..j], &w[..j])
                } else {
                    dot(&row_i[..j], &w[..j])
                };
                let v = (row_i[j] - acc) / dj;
                debug_assert!(row_j.len() == j);
                row_i[j] = v;
            }
        }
        Some(LdlFactor { n, l: mat, d })
    }

    /// Solve `M x = rhs` in place.
    pub fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            x[i] -= dot(row, &x[..i]);
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            if xi != 0.0 {
                for j in 0..i {
                    x[j] -= self.l[i * n + j] * xi;
                }
            }
        }
    }
}
