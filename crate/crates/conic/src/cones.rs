//! Symmetric-cone machinery: Nesterov-Todd scalings, Jordan algebra
//! operations, projections and boundary step lengths for the product of
//! nonnegative-orthant, second-order and PSD cones.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::svec::{smat_of, svec_index, svec_len, svec_of};

/// One factor of the cone product, with its offset into the `s`/`z` vectors.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ConeSeg {
    pub kind: ConeKind,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ConeKind {
    NonNeg,
    /// Second-order cone `{ u : u_0 >= ||u_1|| }`.
    Soc,
    /// Real symmetric PSD cone of side `n`, in svec form.
    Psd(usize),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct ConeLayout {
    pub segs: Vec<ConeSeg>,
    pub dim: usize,
}

impl ConeLayout {
    pub fn push(&mut self, kind: ConeKind, len: usize) {
        if let ConeKind::Psd(n) = kind {
            debug_assert_eq!(len, svec_len(n));
        }
        self.segs.push(ConeSeg {
            kind,
            offset: self.dim,
            len,
        });
        self.dim += len;
    }

    /// Barrier degree of the product cone.
    pub fn degree(&self) -> usize {
        self.segs
            .iter()
            .map(|s| match s.kind {
                ConeKind::NonNeg => s.len,
                ConeKind::Soc => 1,
                ConeKind::Psd(n) => n,
            })
            .sum()
    }

    /// Identity element of the product cone.
    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for seg in &self.segs {
            let u = &mut e[seg.offset..seg.offset + seg.len];
            match seg.kind {
                ConeKind::NonNeg => u.fill(1.0),
                ConeKind::Soc => u[0] = 1.0,
                ConeKind::Psd(n) => {
                    for i in 0..n {
                        u[svec_index(i, i, n)] = 1.0;
                    }
                }
            }
        }
        e
    }

    /// Smallest `t` such that `v + t * e` lies on the cone boundary
    /// (negative when `v` is interior).
    pub fn min_shift(&self, v: &[f64]) -> f64 {
        let mut t = f64::NEG_INFINITY;
        for seg in &self.segs {
            let u = &v[seg.offset..seg.offset + seg.len];
            let need = match seg.kind {
                ConeKind::NonNeg => -u.iter().cloned().fold(f64::INFINITY, f64::min),
                ConeKind::Soc => norm(&u[1..]) - u[0],
                ConeKind::Psd(n) => {
                    let m = smat_of(u, n);
                    let eig = SymmetricEigen::new(m);
                    -eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
                }
            };
            t = t.max(need);
        }
        t
    }

    /// Euclidean projection onto the cone, in place.
    pub fn project(&self, v: &mut [f64]) {
        for seg in &self.segs {
            let u = &mut v[seg.offset..seg.offset + seg.len];
            match seg.kind {
                ConeKind::NonNeg => {
                    for x in u.iter_mut() {
                        if *x < 0.0 {
                            *x = 0.0;
                        }
                    }
                }
                ConeKind::Soc => project_soc(u),
                ConeKind::Psd(n) => {
                    let m = smat_of(u, n);
                    let mut eig = SymmetricEigen::new(m);
                    for ev in eig.eigenvalues.iter_mut() {
                        if *ev < 0.0 {
                            *ev = 0.0;
                        }
                    }
                    let rec = &eig.eigenvectors
                        * DMatrix::from_diagonal(&eig.eigenvalues)
                        * eig.eigenvectors.transpose();
                    u.copy_from_slice(&svec_of(&rec));
                }
            }
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project_soc(u: &mut [f64]) {
    let t = u[0];
    let r = norm(&u[1..]);
    if r <= t {
        return;
    }
    if r <= -t {
        u.fill(0.0);
        return;
    }
    let a = 0.5 * (t + r);
    u[0] = a;
    let scale = a / r;
    for x in &mut u[1..] {
        *x *= scale;
    }
}

/// Nesterov-Todd scaling for one cone segment, computed from interior
/// points `s` and `z`. `W` satisfies `W z = W^{-T} s = lambda`.
pub(crate) enum Scaling {
    NonNeg {
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        w: DMatrix<f64>,
        #[cfg_attr(not(test), allow(dead_code))]
        winv: DMatrix<f64>,
        /// `(W^T W)^{-1}` as a dense matrix.
        hinv: DMatrix<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        /// `W u = svec(r^T smat(u) r)`.
        r: DMatrix<f64>,
        #[cfg_attr(not(test), allow(dead_code))]
        rinv: DMatrix<f64>,
        /// `(W^T W)^{-1} u = svec(tinv smat(u) tinv)`.
        tinv: DMatrix<f64>,
        /// Eigenvalues of the scaled point (which is diagonal).
        lam: Vec<f64>,
        lambda: Vec<f64>,
    },
}

pub(crate) fn compute_scaling(kind: ConeKind, s: &[f64], z: &[f64]) -> Option<Scaling> {
    match kind {
        ConeKind::NonNeg => {
            let mut w = vec![0.0; s.len()];
            let mut lambda = vec![0.0; s.len()];
            for i in 0..s.len() {
                if s[i] <= 0.0 || z[i] <= 0.0 {
                    return None;
                }
                w[i] = (s[i] / z[i]).sqrt();
                lambda[i] = (s[i] * z[i]).sqrt();
            }
            Some(Scaling::NonNeg { w, lambda })
        }
        ConeKind::Soc => {
            let d = s.len();
            let sj = jdot(s, s);
            let zj = jdot(z, z);
            if sj <= 0.0 || zj <= 0.0 || s[0] <= 0.0 || z[0] <= 0.0 {
                return None;
            }
            let a = sj.sqrt();
            let b = zj.sqrt();
            let sb: Vec<f64> = s.iter().map(|x| x / a).collect();
            let zb: Vec<f64> = z.iter().map(|x| x / b).collect();
            let dot: f64 = sb.iter().zip(&zb).map(|(x, y)| x * y).sum();
            let gamma = ((1.0 + dot) * 0.5).sqrt();
            if !gamma.is_finite() || gamma <= 0.0 {
                return None;
            }
            // wbar = (sbar + J zbar) / (2 gamma), a unit-hyperbolic point
            // (wbar^T J wbar = 1). The scaling is W = sqrt(a/b) P(wbar)^{1/2}
            // with the closed form
            //   P(w)^{1/2} = [ w0, w1^T; w1, I + w1 w1^T / (1 + w0) ],
            // and W^{-1} uses the same form at J wbar.
            let mut wbar = vec![0.0; d];
            wbar[0] = (sb[0] + zb[0]) / (2.0 * gamma);
            for i in 1..d {
                wbar[i] = (sb[i] - zb[i]) / (2.0 * gamma);
            }
            let sqrt_rep = |v: &[f64]| -> DMatrix<f64> {
                let mut m = DMatrix::zeros(d, d);
                m[(0, 0)] = v[0];
                for i in 1..d {
                    m[(0, i)] = v[i];
                    m[(i, 0)] = v[i];
                    for j in 1..d {
                        m[(i, j)] = v[i] * v[j] / (1.0 + v[0]);
                    }
                    m[(i, i)] += 1.0;
                }
                m
            };
            let beta = (a / b).sqrt();
            let w = sqrt_rep(&wbar) * beta;
            let jwbar: Vec<f64> = wbar
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == 0 { v } else { -v })
                .collect();
            let winv = sqrt_rep(&jwbar) / beta;
            let lambda: Vec<f64> = {
                let zl = DMatrix::from_column_slice(d, 1, z);
                let l = &w * zl;
                l.column(0).iter().cloned().collect()
            };
            let hinv = &winv * &winv;
            Some(Scaling::Soc {
                w,
                winv,
                hinv,
                lambda,
            })
        }
        ConeKind::Psd(n) => {
            let sm = smat_of(s, n);
            let zm = smat_of(z, n);
            let (s_half, s_mhalf) = sym_sqrt_pair(&sm)?;
            let bmat = {
                let b = &s_half * &zm * &s_half;
                (&b + b.transpose()) * 0.5
            };
            let eig = SymmetricEigen::new(bmat);
            let maxev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
            if !(maxev > 0.0) {
                return None;
            }
            let floor = maxev * 1e-15;
            let mut quarter = Vec::with_capacity(n);
            let mut lam = Vec::with_capacity(n);
            for &ev in eig.eigenvalues.iter() {
                let ev = ev.max(floor);
                quarter.push(ev.powf(0.25));
                lam.push(ev.sqrt());
            }
            let q = &eig.eigenvectors;
            // r = S^{1/2} Q Lam^{-1/4}; rinv = Lam^{1/4} Q^T S^{-1/2}.
            let mut r = &s_half * q;
            for (j, qv) in quarter.iter().enumerate() {
                let mut col = r.column_mut(j);
                col /= *qv;
            }
            let mut rinv = q.transpose() * &s_mhalf;
            for (i, qv) in quarter.iter().enumerate() {
                let mut row = rinv.row_mut(i);
                row *= *qv;
            }
            let tinv = {
                let t = rinv.transpose() * &rinv;
                (&t + t.transpose()) * 0.5
            };
            let lambda = {
                let mut d = DMatrix::zeros(n, n);
                for i in 0..n {
                    d[(i, i)] = lam[i];
                }
                svec_of(&d)
            };
            Some(Scaling::Psd {
                r,
                rinv,
                tinv,
                lam,
                lambda,
            })
        }
    }
}

/// `(S^{1/2}, S^{-1/2})` of a symmetric PD matrix; `None` if not PD.
fn sym_sqrt_pair(s: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    let eig = SymmetricEigen::new(s.clone());
    let maxev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    if !(maxev > 0.0) {
        return None;
    }
    let floor = maxev * 1e-15;
    let mut half = DMatrix::zeros(n, n);
    let mut mhalf = DMatrix::zeros(n, n);
    for i in 0..n {
        let ev = eig.eigenvalues[i].max(floor);
        let r = ev.sqrt();
        half[(i, i)] = r;
        mhalf[(i, i)] = 1.0 / r;
    }
    let q = &eig.eigenvectors;
    Some((q * half * q.transpose(), q * mhalf * q.transpose()))
}

fn jdot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = a[0] * b[0];
    for i in 1..a.len() {
        acc -= a[i] * b[i];
    }
    acc
}

impl Scaling {
    pub fn lambda(&self) -> &[f64] {
        match self {
            Scaling::NonNeg { lambda, .. } => lambda,
            Scaling::Soc { lambda, .. } => lambda,
            Scaling::Psd { lambda, .. } => lambda,
        }
    }

    /// `W u`.
    pub fn apply_w(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..u.len() {
                    out[i] = w[i] * u[i];
                }
            }
            Scaling::Soc { w, .. } => mat_vec(w, u, out),
            Scaling::Psd { r, .. } => {
                let n = r.nrows();
                let x = smat_of(u, n);
                let y = r.transpose() * x * r;
                out.copy_from_slice(&svec_of(&sym(&y)));
            }
        }
    }

    /// `W^T u` (all scalings here are symmetric except the PSD map).
    pub fn apply_wt(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { .. } | Scaling::Soc { .. } => self.apply_w(u, out),
            Scaling::Psd { r, .. } => {
                let n = r.nrows();
                let x = smat_of(u, n);
                let y = r * x * r.transpose();
                out.copy_from_slice(&svec_of(&sym(&y)));
            }
        }
    }

    /// `W^{-T} u`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn apply_winvt(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..u.len() {
                    out[i] = u[i] / w[i];
                }
            }
            Scaling::Soc { winv, .. } => mat_vec(winv, u, out),
            Scaling::Psd { rinv, .. } => {
                let n = rinv.nrows();
                let x = smat_of(u, n);
                let y = rinv * x * rinv.transpose();
                out.copy_from_slice(&svec_of(&sym(&y)));
            }
        }
    }

    /// `(W^T W)^{-1} u`.
    #[cfg_attr(not(test), allow(dead_code))]
    pub fn apply_hinv(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..u.len() {
                    out[i] = u[i] / (w[i] * w[i]);
                }
            }
            Scaling::Soc { hinv, .. } => mat_vec(hinv, u, out),
            Scaling::Psd { tinv, .. } => {
                let n = tinv.nrows();
                let x = smat_of(u, n);
                let y = tinv * x * tinv;
                out.copy_from_slice(&svec_of(&sym(&y)));
            }
        }
    }

    /// Solve `lambda o x = d` in the Jordan algebra, where `lambda` is the
    /// scaled point of this scaling.
    pub fn lambda_circ_solve(&self, d: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                for i in 0..d.len() {
                    out[i] = d[i] / lambda[i];
                }
            }
            Scaling::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let l1 = &lambda[1..];
                let det = l0 * l0 - l1.iter().map(|x| x * x).sum::<f64>();
                let l1d: f64 = l1.iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
                let x0 = (l0 * d[0] - l1d) / det;
                out[0] = x0;
                for i in 1..d.len() {
                    out[i] = (d[i] - x0 * lambda[i]) / l0;
                }
            }
            Scaling::Psd { lam, .. } => {
                let n = lam.len();
                let dm = smat_of(d, n);
                let mut x = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        x[(i, j)] = 2.0 * dm[(i, j)] / (lam[i] + lam[j]);
                    }
                }
                out.copy_from_slice(&svec_of(&x));
            }
        }
    }

    /// Jordan product `a o b` for this cone.
    pub fn circ(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { .. } => {
                for i in 0..a.len() {
                    out[i] = a[i] * b[i];
                }
            }
            Scaling::Soc { .. } => {
                out[0] = a.iter().zip(b).map(|(x, y)| x * y).sum();
                for i in 1..a.len() {
                    out[i] = a[0] * b[i] + b[0] * a[i];
                }
            }
            Scaling::Psd { lam, .. } => {
                let n = lam.len();
                let am = smat_of(a, n);
                let bm = smat_of(b, n);
                let p = &am * &bm;
                let sym = (&p + p.transpose()) * 0.5;
                out.copy_from_slice(&svec_of(&sym));
            }
        }
    }

    /// Largest `t` such that `lambda + t * d` stays in the cone
    /// (`f64::INFINITY` when unbounded).
    pub fn max_step(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                let mut t = f64::INFINITY;
                for i in 0..d.len() {
                    if d[i] < 0.0 {
                        t = t.min(-lambda[i] / d[i]);
                    }
                }
                t
            }
            Scaling::Soc { lambda, .. } => soc_max_step(lambda, d),
            Scaling::Psd { lam, .. } => {
                let n = lam.len();
                let dm = smat_of(d, n);
                let mut c = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        c[(i, j)] = -dm[(i, j)] / (lam[i] * lam[j]).sqrt();
                    }
                }
                let eig = SymmetricEigen::new(c);
                let mx = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if mx <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / mx
                }
            }
        }
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest Jordan eigenvalue of a point of this cone.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn jordan_min_eig(kind: ConeKind, v: &[f64]) -> f64 {
    match kind {
        ConeKind::NonNeg => v.iter().cloned().fold(f64::INFINITY, f64::min),
        ConeKind::Soc => v[0] - norm(&v[1..]),
        ConeKind::Psd(n) => {
            let m = smat_of(v, n);
            let eig = SymmetricEigen::new(m);
            eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
        }
    }
}

fn mat_vec(m: &DMatrix<f64>, u: &[f64], out: &mut [f64]) {
    for i in 0..m.nrows() {
        let mut acc = 0.0;
        for j in 0..m.ncols() {
            acc += m[(i, j)] * u[j];
        }
        out[i] = acc;
    }
}

/// Max step for a second-order cone from interior point `l` along `d`.
fn soc_max_step(l: &[f64], d: &[f64]) -> f64 {
    // Smallest positive root of (l0 + t d0)^2 - ||l1 + t d1||^2. Because the
    // Lorentz gauge l0 - ||l1|| is concave in t and positive at 0, that root
    // is exactly the cone exit. Stable rationalized form 2c / (-b + sqrt(D)).
    let a = d[0] * d[0] - d[1..].iter().map(|x| x * x).sum::<f64>();
    let b = 2.0 * (l[0] * d[0] - l[1..].iter().zip(&d[1..]).map(|(x, y)| x * y).sum::<f64>());
    let c = l[0] * l[0] - l[1..].iter().map(|x| x * x).sum::<f64>();
    debug_assert!(c > 0.0);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let denom = -b + disc.sqrt();
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    2.0 * c / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_interior(kind: ConeKind, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match kind {
            ConeKind::NonNeg => (0..len).map(|_| rng.gen_range(0.1..3.0)).collect(),
            ConeKind::Soc => {
                let mut v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r = norm(&v[1..]);
                v[0] = r + rng.gen_range(0.1..2.0);
                v
            }
            ConeKind::Psd(n) => {
                let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.3;
                svec_of(&m)
            }
        }
    }

    #[test]
    fn nt_scaling_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (kind, len) in [
            (ConeKind::NonNeg, 5),
            (ConeKind::Soc, 4),
            (ConeKind::Psd(3), svec_len(3)),
        ] {
            for _ in 0..20 {
                let s = random_interior(kind, len, &mut rng);
                let z = random_interior(kind, len, &mut rng);
                let sc = compute_scaling(kind, &s, &z).expect("interior");
                let mut wz = vec![0.0; len];
                let mut wts = vec![0.0; len];
                sc.apply_w(&z, &mut wz);
                sc.apply_winvt(&s, &mut wts);
                for i in 0..len {
                    assert!(
                        (wz[i] - wts[i]).abs() < 1e-8 * (1.0 + wz[i].abs()),
                        "{kind:?} W z != W^-T s at {i}: {} vs {}",
                        wz[i],
                        wts[i]
                    );
                    assert!((wz[i] - sc.lambda()[i]).abs() < 1e-8 * (1.0 + wz[i].abs()));
                }
                // Hinv is the inverse of u -> W^T W u.
                let u = random_interior(kind, len, &mut rng);
                let mut wu = vec![0.0; len];
                let mut wtwu = vec![0.0; len];
                let mut back = vec![0.0; len];
                sc.apply_w(&u, &mut wu);
                sc.apply_wt(&wu, &mut wtwu);
                sc.apply_hinv(&wtwu, &mut back);
                for i in 0..len {
                    assert!((back[i] - u[i]).abs() < 1e-7 * (1.0 + u[i].abs()));
                }
                // lambda_circ_solve inverts lambda o (.).
                let mut lx = vec![0.0; len];
                sc.lambda_circ_solve(&u, &mut lx);
                let mut lu = vec![0.0; len];
                sc.circ(sc.lambda(), &lx, &mut lu);
                for i in 0..len {
                    assert!((lu[i] - u[i]).abs() < 1e-7 * (1.0 + u[i].abs()));
                }
            }
        }
    }

    #[test]
    fn step_lengths_reach_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for (kind, len) in [
            (ConeKind::NonNeg, 5),
            (ConeKind::Soc, 4),
            (ConeKind::Psd(3), svec_len(3)),
        ] {
            for _ in 0..20 {
                let s = random_interior(kind, len, &mut rng);
                let z = random_interior(kind, len, &mut rng);
                let sc = compute_scaling(kind, &s, &z).expect("interior");
                let d: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let t = sc.max_step(&d);
                if t.is_finite() {
                    let layout = {
                        let mut l = ConeLayout::default();
                        l.push(kind, len);
                        l
                    };
                    let just_in: Vec<f64> = sc
                        .lambda()
                        .iter()
                        .zip(&d)
                        .map(|(l, dd)| l + 0.999 * t * dd)
                        .collect();
                    assert!(
                        layout.min_shift(&just_in) < 1e-6,
                        "{kind:?}: inside point reported outside, t={t}"
                    );
                    let out: Vec<f64> = sc
                        .lambda()
                        .iter()
                        .zip(&d)
                        .map(|(l, dd)| l + 1.01 * t * dd)
                        .collect();
                    assert!(
                        layout.min_shift(&out) > -1e-9,
                        "{kind:?}: outside point reported inside, t={t}, shift={}",
                        layout.min_shift(&out)
                    );
                }
            }
        }
    }
}
