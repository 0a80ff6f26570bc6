//! Complex dense factorizations used by the precoder constructions:
//! semidefinite-safe Cholesky and a Householder QR with a full unitary
//! factor and positive-real diagonal normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

type CMat = DMatrix<Complex64>;

/// Lower-triangular `L` with `L L^H = A` for Hermitian PSD `A`.
///
/// Eigenvalues below `clip_rel * lambda_max` are clipped to zero before
/// factorization, and zero pivots produce zero columns, so semidefinite
/// input is handled without pivoting.
pub(crate) fn cholesky_psd(a: &CMat, clip_rel: f64) -> CMat {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let needs_clip = eig
        .eigenvalues
        .iter()
        .any(|&ev| ev < clip_rel * max_ev);
    let work = if needs_clip {
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < clip_rel * max_ev {
                *v = 0.0;
            }
        }
        let d = CMat::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(vals[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    } else {
        a.clone()
    };

    let mut l = CMat::zeros(n, n);
    let pivot_floor = max_ev * 1e-14;
    for j in 0..n {
        let mut d = work[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= pivot_floor {
            continue; // column stays zero
        }
        let piv = d.sqrt();
        l[(j, j)] = Complex64::new(piv, 0.0);
        for i in (j + 1)..n {
            let mut v = work[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / piv;
        }
    }
    l
}

/// QR decomposition `B = Q [R; 0]` of a tall complex matrix (rows >= cols)
/// with `Q` square unitary and the diagonal of `R` real and nonnegative.
pub(crate) fn qr_full(b: &CMat) -> (CMat, CMat) {
    let m = b.nrows();
    let k = b.ncols();
    assert!(m >= k);
    let mut r = b.clone();
    let mut q = CMat::identity(m, m);

    for col in 0..k {
        // Householder vector for column col below the diagonal.
        let mut norm2 = 0.0;
        for i in col..m {
            norm2 += r[(i, col)].norm_sqr();
        }
        let norm = norm2.sqrt();
        if norm < 1e-300 {
            continue;
        }
        let x0 = r[(col, col)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        let mut v = DVector::from_element(m, Complex64::new(0.0, 0.0));
        for i in col..m {
            v[i] = r[(i, col)];
        }
        v[col] -= alpha;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        let scale = Complex64::new(2.0 / vnorm2, 0.0);
        // r <- (I - scale v v^H) r ; q <- q (I - scale v v^H).
        for j in col..k {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in col..m {
                dot += v[i].conj() * r[(i, j)];
            }
            let f = scale * dot;
            for i in col..m {
                let vi = v[i];
                r[(i, j)] -= f * vi;
            }
        }
        for row in 0..m {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in col..m {
                dot += q[(row, i)] * v[i];
            }
            let f = dot * scale;
            for i in col..m {
                q[(row, i)] -= f * v[i].conj();
            }
        }
        r[(col, col)] = alpha;
        for i in (col + 1)..m {
            r[(i, col)] = Complex64::new(0.0, 0.0);
        }
    }

    // Rotate so every R diagonal entry is real nonnegative.
    for col in 0..k {
        let d = r[(col, col)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let pc = phase.conj();
            for j in col..k {
                r[(col, j)] *= pc;
            }
            for i in 0..m {
                q[(i, col)] *= phase;
            }
        }
    }
    let r_top = r.rows(0, k).into_owned();
    (q, r_top)
}

/// Row QR decomposition `A = [L, 0] Q` of a wide complex matrix
/// (rows <= cols): `L` lower triangular with real nonnegative diagonal and
/// `Q` square unitary.
pub(crate) fn row_qr(a: &CMat) -> (CMat, CMat) {
    let (q_tall, r) = qr_full(&a.adjoint());
    (r.adjoint(), q_tall.adjoint())
}
