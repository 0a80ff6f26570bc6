//! Primal-dual interior-point method on the homogeneous self-dual
//! embedding, with Nesterov-Todd scaling and a Mehrotra-style
//! predictor-corrector. Follows the classic conelp construction: every
//! iteration factors one reduced KKT matrix and solves it for three
//! right-hand sides.
//!
//! The embedding solves
//!
//! ```text
//! A^T y + G^T z + c tau = 0        s, z in K,  tau, kappa >= 0
//! A x - b tau           = 0        s o z = 0,  tau kappa = 0
//! G x + s - h tau       = 0
//! c^T x + b^T y + h^T z + kappa = 0
//! ```
//!
//! so optimality, primal infeasibility and unboundedness are all read off
//! the limit point (`tau > 0` vs `kappa > 0`).

use nalgebra::DMatrix;

use crate::cones::{compute_scaling, ConeKind, Scaling};
use crate::linalg::LdlFactor;
use crate::problem::{StdBlock, StdForm};
use crate::svec::svec_index;
use crate::{ResidualReport, SolveStatus, SolverConfig};

pub(crate) struct RawOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residuals: ResidualReport,
}

fn trace_enabled() -> bool {
    static ON: std::sync::OnceLock<bool> = std::sync::OnceLock::new();
    *ON.get_or_init(|| std::env::var("DFRC_CONIC_TRACE").ok().as_deref() == Some("1"))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn identity_scaling(kind: ConeKind, len: usize) -> Scaling {
    match kind {
        ConeKind::NonNeg => Scaling::NonNeg {
            w: vec![1.0; len],
            lambda: vec![1.0; len],
        },
        ConeKind::Soc => {
            let w = DMatrix::identity(len, len);
            let mut lambda = vec![0.0; len];
            lambda[0] = 1.0;
            Scaling::Soc {
                winv: w.clone(),
                hinv: w.clone(),
                w,
                lambda,
            }
        }
        ConeKind::Psd(n) => {
            let mut lambda = vec![0.0; len];
            for i in 0..n {
                lambda[svec_index(i, i, n)] = 1.0;
            }
            Scaling::Psd {
                r: DMatrix::identity(n, n),
                rinv: DMatrix::identity(n, n),
                tinv: DMatrix::identity(n, n),
                lam: vec![1.0; n],
                lambda,
            }
        }
    }
}

/// Canonical inverse-Hessian action per cone block. These are the exact
/// matrices contracted into the reduced KKT, so residual evaluation and the
/// factored operator agree to machine precision (an independent
/// reconstruction through `W` would differ by eps times the squared cone
/// condition number and stall iterative refinement).
enum HinvOp {
    NonNeg(Vec<f64>),
    Soc(DMatrix<f64>),
    /// Congruence matrix on the Hermitian side; the embedded action is
    /// `u -> E Bt E^T u / 2`.
    PsdBt(DMatrix<f64>),
}

struct Kkt<'a> {
    form: &'a StdForm,
    hinv_ops: Vec<HinvOp>,
    /// Assembled KKT matrix, kept for on-demand refactorization.
    buf: Vec<f64>,
    factor: LdlFactor,
    /// Double-double factorization, built lazily when refinement detects
    /// that the plain factor cannot resolve the system.
    precise: std::cell::OnceCell<LdlFactor>,
}

impl<'a> Kkt<'a> {
    /// Assemble `[G^T (W^T W)^{-1} G + dI, A^T; A, -dI]` and factor it.
    fn new(form: &'a StdForm, scalings: &'a [Scaling]) -> Option<Kkt<'a>> {
        let n = form.n;
        let p = form.p();
        let nk = n + p;
        let mut kkt = vec![0.0; nk * nk];
        let mut hinv_ops = Vec::with_capacity(form.blocks.len());

        for (blk, sc) in form.blocks.iter().zip(scalings) {
            match (blk, sc) {
                (StdBlock::Rows { rows, .. }, Scaling::NonNeg { w, .. }) => {
                    let diag: Vec<f64> = w.iter().map(|wi| 1.0 / (wi * wi)).collect();
                    for (i, row) in rows.iter().enumerate() {
                        let d = diag[i];
                        for &(c1, v1) in row {
                            let dv = d * v1;
                            for &(c2, v2) in row {
                                kkt[c1 * nk + c2] += dv * v2;
                            }
                        }
                    }
                    hinv_ops.push(HinvOp::NonNeg(diag));
                }
                (StdBlock::Rows { rows, .. }, Scaling::Soc { hinv, .. }) => {
                    // Densify over the block's active columns, conjugate by
                    // Hinv, scatter back.
                    let mut active: Vec<usize> = rows
                        .iter()
                        .flat_map(|r| r.iter().map(|&(c, _)| c))
                        .collect();
                    active.sort_unstable();
                    active.dedup();
                    let na = active.len();
                    let mb = rows.len();
                    let mut pos = vec![usize::MAX; n];
                    for (k, &c) in active.iter().enumerate() {
                        pos[c] = k;
                    }
                    let mut gl = DMatrix::zeros(mb, na);
                    for (i, row) in rows.iter().enumerate() {
                        for &(c, v) in row {
                            gl[(i, pos[c])] += v;
                        }
                    }
                    let ml = gl.transpose() * hinv * &gl;
                    for k1 in 0..na {
                        let c1 = active[k1];
                        for k2 in 0..na {
                            kkt[c1 * nk + active[k2]] += ml[(k1, k2)];
                        }
                    }
                    hinv_ops.push(HinvOp::Soc(hinv.clone()));
                }
                (
                    StdBlock::Psd {
                        emb, cols, active, ..
                    },
                    Scaling::Psd { tinv, .. },
                ) => {
                    let hl = emb.m * emb.m;
                    let mut btilde = DMatrix::zeros(hl, hl);
                    emb.congruence(tinv, &mut btilde);
                    for &u in active {
                        for &(ru, au) in &cols[u] {
                            let row_u = u * nk;
                            for &v in active {
                                for &(rv, av) in &cols[v] {
                                    kkt[row_u + v] += au * av * btilde[(ru, rv)];
                                }
                            }
                        }
                    }
                    hinv_ops.push(HinvOp::PsdBt(btilde));
                }
                _ => unreachable!("block/scaling mismatch"),
            }
        }

        for (i, row) in form.a_rows.iter().enumerate() {
            let r = n + i;
            for &(c, v) in row {
                kkt[r * nk + c] += v;
                kkt[c * nk + r] += v;
            }
        }

        let factor = LdlFactor::factor(kkt.clone(), nk, n, false)?;
        Some(Kkt {
            form,
            hinv_ops,
            buf: kkt,
            factor,
            precise: std::cell::OnceCell::new(),
        })
    }

    /// Apply the canonical `(W^T W)^{-1}` (the assembled one) per cone.
    fn hinv_all(&self, u: &[f64], out: &mut [f64]) {
        for ((seg, op), blk) in self
            .form
            .layout
            .segs
            .iter()
            .zip(&self.hinv_ops)
            .zip(&self.form.blocks)
        {
            let ui = &u[seg.offset..seg.offset + seg.len];
            let oi = &mut out[seg.offset..seg.offset + seg.len];
            match (op, blk) {
                (HinvOp::NonNeg(d), _) => {
                    for i in 0..ui.len() {
                        oi[i] = d[i] * ui[i];
                    }
                }
                (HinvOp::Soc(hinv), _) => {
                    for i in 0..ui.len() {
                        let mut acc = 0.0;
                        for j in 0..ui.len() {
                            acc += hinv[(i, j)] * ui[j];
                        }
                        oi[i] = acc;
                    }
                }
                (HinvOp::PsdBt(bt), StdBlock::Psd { emb, .. }) => {
                    // E^T E = 2I, so the embedded action consistent with the
                    // assembled congruence is E Bt E^T / 4.
                    let hl = emb.m * emb.m;
                    let mut herm = vec![0.0; hl];
                    emb.apply_t(ui, &mut herm);
                    let mut mapped = vec![0.0; hl];
                    for i in 0..hl {
                        let mut acc = 0.0;
                        for j in 0..hl {
                            acc += bt[(i, j)] * herm[j];
                        }
                        mapped[i] = 0.25 * acc;
                    }
                    emb.apply(&mapped, oi);
                }
                _ => unreachable!(),
            }
        }
    }

    /// Reduced right-hand side `(rx + G^T Hinv rz, ry)`.
    fn reduced_rhs(&self, rx: &[f64], ry: &[f64], rz: &[f64]) -> Vec<f64> {
        let form = self.form;
        let n = form.n;
        let p = form.p();
        let m = form.m();
        let mut tmp_m = vec![0.0; m];
        self.hinv_all(rz, &mut tmp_m);
        let mut rhs = vec![0.0; n + p];
        rhs[..n].copy_from_slice(rx);
        form.gt_mul_acc(&tmp_m, 1.0, &mut rhs[..n]);
        rhs[n..].copy_from_slice(ry);
        rhs
    }

    /// Apply the reduced KKT operator `[G^T Hinv G, A^T; A, 0]` through the
    /// same per-cone matrices that were assembled, so refinement residuals
    /// are consistent with the factored matrix.
    fn reduced_apply(&self, xy: &[f64], out: &mut [f64]) {
        let form = self.form;
        let n = form.n;
        let m = form.m();
        let mut gx = vec![0.0; m];
        form.g_mul(&xy[..n], &mut gx);
        let mut hgx = vec![0.0; m];
        self.hinv_all(&gx, &mut hgx);
        out.fill(0.0);
        form.gt_mul_acc(&hgx, 1.0, &mut out[..n]);
        form.at_mul_acc(&xy[n..], 1.0, &mut out[..n]);
        form.a_mul(&xy[..n], &mut out[n..]);
    }

    /// Solve the scaled KKT system through the reduced form, with iterative
    /// refinement and escalation to the double-double factorization when
    /// the plain factor cannot resolve the system.
    fn solve(&self, rx: &[f64], ry: &[f64], rz: &[f64], dx: &mut [f64], dy: &mut [f64], dz: &mut [f64]) {
        let form = self.form;
        let n = form.n;
        let p = form.p();
        let m = form.m();
        let rhs = self.reduced_rhs(rx, ry, rz);
        let scale = norm(&rhs).max(1.0);

        let run = |factor: &LdlFactor, xy: &mut Vec<f64>, rounds: usize| -> f64 {
            let mut sol = rhs.clone();
            factor.solve(&mut sol);
            *xy = sol;
            let mut rel = f64::INFINITY;
            let mut applied = vec![0.0; n + p];
            for round in 0..=rounds {
                self.reduced_apply(xy, &mut applied);
                let mut resid = rhs.clone();
                for i in 0..(n + p) {
                    resid[i] -= applied[i];
                }
                rel = norm(&resid) / scale;
                if rel <= 1e-13 || round == rounds {
                    break;
                }
                factor.solve(&mut resid);
                for i in 0..(n + p) {
                    xy[i] += resid[i];
                }
            }
            rel
        };

        let mut xy = Vec::new();
        let rel = run(&self.factor, &mut xy, 2);
        if rel > 1e-11 {
            let nk = n + p;
            let precise = self.precise.get_or_init(|| {
                LdlFactor::factor(self.buf.clone(), nk, n, true).expect("escalated factorization")
            });
            let rel2 = run(precise, &mut xy, 4);
            if trace_enabled() {
                eprintln!("    kkt: escalated, rel {rel:.3e} -> {rel2:.3e}");
            }
        }
        dx.copy_from_slice(&xy[..n]);
        dy.copy_from_slice(&xy[n..]);
        let mut gx = vec![0.0; m];
        form.g_mul(dx, &mut gx);
        for i in 0..m {
            gx[i] -= rz[i];
        }
        self.hinv_all(&gx, dz);
    }
}

fn per_cone<'s>(
    form: &StdForm,
    scalings: &'s [Scaling],
) -> impl Iterator<Item = (&'s Scaling, usize, usize)> + 's {
    form.layout
        .segs
        .iter()
        .zip(scalings)
        .map(|(seg, sc)| (sc, seg.offset, seg.len))
        .collect::<Vec<_>>()
        .into_iter()
}

/// Normalized residuals `(pres, dres, gap, relgap)` of an HSDE iterate.
#[allow(clippy::too_many_arguments)]
fn residual_metric(
    form: &StdForm,
    h: &[f64],
    norm_b: f64,
    norm_h: f64,
    norm_c: f64,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    s: &[f64],
    tau: f64,
    _kappa: f64,
) -> (f64, f64, f64, f64) {
    let n = form.n;
    let p = form.p();
    let m = form.m();
    let c = &form.c;
    let b = &form.b;
    let mut resx = vec![0.0; n];
    for i in 0..n {
        resx[i] = c[i] * tau;
    }
    form.at_mul_acc(y, 1.0, &mut resx);
    form.gt_mul_acc(z, 1.0, &mut resx);
    let mut resy = vec![0.0; p];
    form.a_mul(x, &mut resy);
    for i in 0..p {
        resy[i] -= b[i] * tau;
    }
    let mut resz = vec![0.0; m];
    form.g_mul(x, &mut resz);
    for i in 0..m {
        resz[i] += s[i] - h[i] * tau;
    }
    let pcost = dot(c, x) / tau;
    let gap = dot(s, z) / (tau * tau);
    let relgap = gap / pcost.abs().max(1.0);
    let pres = (norm(&resy) / norm_b).max(norm(&resz) / norm_h) / tau;
    let dres = norm(&resx) / norm_c / tau;
    (pres, dres, gap, relgap)
}

/// Composite progress measure: distance to optimality or to either
/// infeasibility certificate, whichever is nearest. Keeps the merit
/// safeguard from blocking legitimate divergence of an infeasible instance
/// (where `tau -> 0` blows up the optimality residuals).
#[allow(clippy::too_many_arguments)]
fn progress_metric(
    form: &StdForm,
    h: &[f64],
    norm_b: f64,
    norm_h: f64,
    norm_c: f64,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    s: &[f64],
    tau: f64,
    kappa: f64,
) -> f64 {
    let (pres, dres, gap, relgap) = residual_metric(form, h, norm_b, norm_h, norm_c, x, y, z, s, tau, kappa);
    let mut metric = pres.max(dres).max(relgap.min(gap));
    let n = form.n;
    let p = form.p();
    let m = form.m();
    let nbhz = -(dot(&form.b, y) + dot(h, z));
    if nbhz > 0.0 {
        let mut aty = vec![0.0; n];
        form.at_mul_acc(y, 1.0, &mut aty);
        form.gt_mul_acc(z, 1.0, &mut aty);
        metric = metric.min(norm(&aty) / norm_c / nbhz);
    }
    let ncx = -dot(&form.c, x);
    if ncx > 0.0 {
        let mut ax = vec![0.0; p];
        form.a_mul(x, &mut ax);
        let mut gxs = vec![0.0; m];
        form.g_mul(x, &mut gxs);
        for i in 0..m {
            gxs[i] += s[i];
        }
        metric = metric.min((norm(&ax) / norm_b).max(norm(&gxs) / norm_h) / ncx);
    }
    metric
}

pub(crate) fn solve(form: &StdForm, cfg: &SolverConfig) -> RawOutcome {
    let n = form.n;
    let p = form.p();
    let m = form.m();
    let c = &form.c;
    let b = &form.b;
    let h = form.h_vec();
    let deg = form.layout.degree();

    let norm_b = norm(b).max(1.0);
    let norm_h = norm(&h).max(1.0);
    let norm_c = norm(c).max(1.0);

    let fail = |iters: usize, res: ResidualReport, x: Vec<f64>| RawOutcome {
        status: SolveStatus::NumericalFailure,
        x,
        iterations: iters,
        residuals: res,
    };

    // Initial point from two solves with identity scaling.
    let id_scalings: Vec<Scaling> = form
        .layout
        .segs
        .iter()
        .map(|seg| identity_scaling(seg.kind, seg.len))
        .collect();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; p];
    let mut z = vec![0.0; m];
    let mut s = vec![0.0; m];
    {
        let kkt = match Kkt::new(form, &id_scalings) {
            Some(k) => k,
            None => return fail(0, ResidualReport::default(), vec![0.0; n]),
        };
        let zero_n = vec![0.0; n];
        let zero_m = vec![0.0; m];
        let zero_p = vec![0.0; p];
        let mut dz = vec![0.0; m];
        kkt.solve(&zero_n, b, &h, &mut x, &mut y, &mut dz);
        // s = h - G x = -dz at the solution of the primal init system.
        for i in 0..m {
            s[i] = -dz[i];
        }
        let shift = form.layout.min_shift(&s);
        if shift >= -1e-12 {
            let e = form.layout.identity();
            for i in 0..m {
                s[i] += (1.0 + shift) * e[i];
            }
        }
        let minus_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut dx = vec![0.0; n];
        kkt.solve(&minus_c, &zero_p, &zero_m, &mut dx, &mut y, &mut z);
        let shift = form.layout.min_shift(&z);
        if shift >= -1e-12 {
            let e = form.layout.identity();
            for i in 0..m {
                z[i] += (1.0 + shift) * e[i];
            }
        }
    }
    let mut tau = 1.0;
    let mut kappa = 1.0;
    let mut small_steps = 0usize;

    let mut best_res = ResidualReport::default();
    // Best iterate seen, for the stall exit: the endgame of a degenerate
    // instance can freeze the step lengths with the iterate already at the
    // achievable accuracy.
    let mut best_metric = f64::INFINITY;
    let mut best_x: Vec<f64> = x.iter().map(|v| v / tau).collect();
    let mut best_report = ResidualReport::default();
    let mut stagnant = 0usize;
    let mut tau_mark = tau;

    let mut resx = vec![0.0; n];
    let mut resy = vec![0.0; p];
    let mut resz = vec![0.0; m];

    for iter in 0..cfg.max_iters_ipm {
        // Residuals of the homogeneous model.
        resx.copy_from_slice(c);
        for v in resx.iter_mut() {
            *v *= tau;
        }
        form.at_mul_acc(&y, 1.0, &mut resx);
        form.gt_mul_acc(&z, 1.0, &mut resx);

        form.a_mul(&x, &mut resy);
        for i in 0..p {
            resy[i] -= b[i] * tau;
        }
        form.g_mul(&x, &mut resz);
        for i in 0..m {
            resz[i] += s[i] - h[i] * tau;
        }
        let rest = dot(c, &x) + dot(b, &y) + dot(&h, &z) + kappa;

        let pcost = dot(c, &x) / tau;
        let gap = dot(&s, &z) / (tau * tau);
        let relgap = gap / pcost.abs().max(1.0);
        let pres = (norm(&resy) / norm_b).max(norm(&resz) / norm_h) / tau;
        let dres = norm(&resx) / norm_c / tau;
        best_res = ResidualReport {
            primal: pres,
            dual: dres,
            gap,
            rel_gap: relgap,
        };

        if pres <= cfg.rel_tol && dres <= cfg.rel_tol && (gap <= cfg.abs_tol || relgap <= cfg.rel_tol)
        {
            let xs: Vec<f64> = x.iter().map(|v| v / tau).collect();
            return RawOutcome {
                status: SolveStatus::Optimal,
                x: xs,
                iterations: iter,
                residuals: best_res,
            };
        }

        let metric = progress_metric(form, &h, norm_b, norm_h, norm_c, &x, &y, &z, &s, tau, kappa);
        if metric < 0.99 * best_metric {
            best_metric = metric;
            best_x = x.iter().map(|v| v / tau).collect();
            best_report = best_res;
            stagnant = 0;
            tau_mark = tau;
        } else if tau < 0.9 * tau_mark {
            // Steadily shrinking tau is progress toward an infeasibility
            // certificate even while the optimality metrics stagnate.
            stagnant = 0;
            tau_mark = tau;
        } else {
            stagnant += 1;
            if stagnant >= 8 {
                return RawOutcome {
                    status: SolveStatus::MaxIterations,
                    x: best_x,
                    iterations: iter,
                    residuals: best_report,
                };
            }
        }

        // Certificates.
        let nbhz = -(dot(b, &y) + dot(&h, &z));
        if nbhz > 0.0 {
            let mut aty = vec![0.0; n];
            form.at_mul_acc(&y, 1.0, &mut aty);
            form.gt_mul_acc(&z, 1.0, &mut aty);
            if norm(&aty) / norm_c / nbhz <= cfg.infeas_tol {
                let xs: Vec<f64> = x.iter().map(|v| v / tau.max(1e-300)).collect();
                return RawOutcome {
                    status: SolveStatus::Infeasible,
                    x: xs,
                    iterations: iter,
                    residuals: best_res,
                };
            }
        }
        let ncx = -dot(c, &x);
        if ncx > 0.0 {
            let mut ax = vec![0.0; p];
            form.a_mul(&x, &mut ax);
            let mut gxs = vec![0.0; m];
            form.g_mul(&x, &mut gxs);
            for i in 0..m {
                gxs[i] += s[i];
            }
            let r = (norm(&ax) / norm_b).max(norm(&gxs) / norm_h) / ncx;
            if r <= cfg.infeas_tol {
                let xs: Vec<f64> = x.iter().map(|v| v / tau.max(1e-300)).collect();
                return RawOutcome {
                    status: SolveStatus::Unbounded,
                    x: xs,
                    iterations: iter,
                    residuals: best_res,
                };
            }
        }

        let mu = (dot(&s, &z) + tau * kappa) / (deg as f64 + 1.0);

        // Nesterov-Todd scalings.
        let mut scalings = Vec::with_capacity(form.layout.segs.len());
        for seg in &form.layout.segs {
            match compute_scaling(
                seg.kind,
                &s[seg.offset..seg.offset + seg.len],
                &z[seg.offset..seg.offset + seg.len],
            ) {
                Some(sc) => scalings.push(sc),
                None => {
                    return RawOutcome {
                        status: SolveStatus::NumericalFailure,
                        x: best_x,
                        iterations: iter,
                        residuals: best_report,
                    }
                }
            }
        }
        let lambda: Vec<f64> = {
            let mut l = vec![0.0; m];
            for (sc, off, len) in per_cone(form, &scalings) {
                l[off..off + len].copy_from_slice(sc.lambda());
            }
            l
        };

        let kkt = match Kkt::new(form, &scalings) {
            Some(k) => k,
            None => {
                return RawOutcome {
                    status: SolveStatus::NumericalFailure,
                    x: best_x,
                    iterations: iter,
                    residuals: best_report,
                }
            }
        };

        // Direction basis for the tau column.
        let minus_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let mut x1 = vec![0.0; n];
        let mut y1 = vec![0.0; p];
        let mut z1 = vec![0.0; m];
        kkt.solve(&minus_c, b, &h, &mut x1, &mut y1, &mut z1);
        let den_aux = dot(c, &x1) + dot(b, &y1) + dot(&h, &z1);
        let denom = den_aux - kappa / tau;
        if !denom.is_finite() || denom.abs() < 1e-300 {
            return RawOutcome {
                status: SolveStatus::NumericalFailure,
                x: best_x,
                iterations: iter,
                residuals: best_report,
            };
        }

        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; p];
        let mut dz = vec![0.0; m];
        let mut ds = vec![0.0; m];
        let mut dtau;
        let mut dkappa;

        // One pass computes a direction for the given complementarity
        // targets (dtilde, dkap) and residual weight eta.
        let mut x2 = vec![0.0; n];
        let mut y2 = vec![0.0; p];
        let mut z2 = vec![0.0; m];
        // Returns (dtau, dkappa) and fills the scaled directions
        // wdz = W dz and wts = W^{-T} ds = dtilde - W dz directly (the
        // latter avoids an ill-conditioned unscale/rescale round trip).
        let mut direction = |dtilde: &[f64],
                             dkap: f64,
                             eta: f64,
                             dx: &mut Vec<f64>,
                             dy: &mut Vec<f64>,
                             dz: &mut Vec<f64>,
                             ds: &mut Vec<f64>,
                             wdz: &mut Vec<f64>,
                             wts: &mut Vec<f64>|
         -> (f64, f64) {
            let rx: Vec<f64> = resx.iter().map(|v| -eta * v).collect();
            let ry: Vec<f64> = resy.iter().map(|v| -eta * v).collect();
            let mut rz: Vec<f64> = resz.iter().map(|v| -eta * v).collect();
            // rz -= W^T dtilde
            let mut wt = vec![0.0; m];
            for (sc, off, len) in per_cone(form, &scalings) {
                sc.apply_wt(&dtilde[off..off + len], &mut wt[off..off + len]);
            }
            for i in 0..m {
                rz[i] -= wt[i];
            }
            kkt.solve(&rx, &ry, &rz, &mut x2, &mut y2, &mut z2);
            let numer =
                -eta * rest - dkap / tau - (dot(c, &x2) + dot(b, &y2) + dot(&h, &z2));
            let dtau_l = numer / denom;
            for i in 0..n {
                dx[i] = x2[i] + dtau_l * x1[i];
            }
            for i in 0..p {
                dy[i] = y2[i] + dtau_l * y1[i];
            }
            for i in 0..m {
                dz[i] = z2[i] + dtau_l * z1[i];
            }
            // A large |dtau| amplifies the basis solves' residuals; one
            // correction pass at fixed dtau removes that error.
            if dtau_l.abs() > 1.0 {
                let mut rho1 = vec![0.0; n];
                for i in 0..n {
                    rho1[i] = rx[i] - c[i] * dtau_l;
                }
                form.at_mul_acc(dy, -1.0, &mut rho1);
                form.gt_mul_acc(dz, -1.0, &mut rho1);
                let mut rho2 = vec![0.0; p];
                form.a_mul(dx, &mut rho2);
                for i in 0..p {
                    rho2[i] = (ry[i] + b[i] * dtau_l) - rho2[i];
                }
                let rho3 = vec![0.0; m];
                let mut cx = vec![0.0; n];
                let mut cy = vec![0.0; p];
                let mut cz = vec![0.0; m];
                kkt.solve(&rho1, &rho2, &rho3, &mut cx, &mut cy, &mut cz);
                for i in 0..n {
                    dx[i] += cx[i];
                }
                for i in 0..p {
                    dy[i] += cy[i];
                }
                for i in 0..m {
                    dz[i] += cz[i];
                }
            }
            // Scaled s-direction for the line search: W^{-T} ds = dtilde - W dz.
            for (sc, off, len) in per_cone(form, &scalings) {
                sc.apply_w(&dz[off..off + len], &mut wdz[off..off + len]);
            }
            for i in 0..m {
                wts[i] = dtilde[i] - wdz[i];
            }
            // ds itself comes from the third Newton equation,
            // ds = -eta r_z - G dx + h dtau, so the residual contraction is
            // exact; the W^T(dtilde - W dz) form is equal in exact
            // arithmetic but amplifies roundoff through W near convergence.
            form.g_mul(dx, ds);
            for i in 0..m {
                ds[i] = -eta * resz[i] - ds[i] + h[i] * dtau_l;
            }
            let dkappa_l = (dkap - kappa * dtau_l) / tau;
            (dtau_l, dkappa_l)
        };

        let max_alpha = |wdz: &[f64], winvtds: &[f64], dtau: f64, dkappa: f64| -> f64 {
            let mut a = f64::INFINITY;
            for (ci, (sc, off, len)) in per_cone(form, &scalings).enumerate() {
                let az = sc.max_step(&wdz[off..off + len]);
                let asv = sc.max_step(&winvtds[off..off + len]);
                if trace_enabled() && az.min(asv) < 1e-3 {
                    eprintln!("  cone {ci}: step z={az:.3e} s={asv:.3e}");
                }
                a = a.min(az).min(asv);
            }
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            if trace_enabled() {
                eprintln!("  tau/kappa: dtau={dtau:.3e} dkappa={dkappa:.3e} a={a:.3e}");
            }
            a
        };

        // Affine direction: dtilde = -lambda, dkap = -tau*kappa.
        let mut wdz = vec![0.0; m];
        let mut winvtds = vec![0.0; m];
        let dtilde_aff: Vec<f64> = lambda.iter().map(|v| -v).collect();
        let (at, ak) = direction(
            &dtilde_aff,
            -tau * kappa,
            1.0,
            &mut dx,
            &mut dy,
            &mut dz,
            &mut ds,
            &mut wdz,
            &mut winvtds,
        );
        dtau = at;
        dkappa = ak;
        let alpha_aff = max_alpha(&wdz, &winvtds, dtau, dkappa).min(1.0);

        // Predicted complementarity after the affine step, evaluated in the
        // scaled frame where the linearization is exact.
        let mu_aff = {
            let mut sz = 0.0;
            for i in 0..m {
                sz += (lambda[i] + alpha_aff * winvtds[i]) * (lambda[i] + alpha_aff * wdz[i]);
            }
            (sz + (tau + alpha_aff * dtau) * (kappa + alpha_aff * dkappa)) / (deg as f64 + 1.0)
        };
        // Mehrotra exponent-3 heuristic, with a balanced fallback: when the
        // affine probe collapses, sigma -> 1 would freeze the residuals, so
        // split the effort between centering and residual reduction instead.
        let sigma = if alpha_aff > 0.05 {
            ((mu_aff / mu).max(0.0).min(1.0)).powi(3)
        } else {
            0.5
        };

        // Combined direction with Mehrotra correction. The corrector is
        // quadratic in the affine direction, so it is dropped when the
        // affine step collapses (the direction itself can blow up near a
        // degenerate limit and would poison the combined step).
        let use_corrector = alpha_aff > 0.05;
        let mut ds_target = vec![0.0; m];
        {
            let e = form.layout.identity();
            let mut ll = vec![0.0; m];
            let mut corr = vec![0.0; m];
            for (sc, off, len) in per_cone(form, &scalings) {
                sc.circ(
                    &lambda[off..off + len],
                    &lambda[off..off + len],
                    &mut ll[off..off + len],
                );
                if use_corrector {
                    sc.circ(
                        &winvtds[off..off + len],
                        &wdz[off..off + len],
                        &mut corr[off..off + len],
                    );
                }
            }
            for i in 0..m {
                ds_target[i] = -ll[i] - corr[i] + sigma * mu * e[i];
            }
        }
        let mut dtilde = vec![0.0; m];
        for (sc, off, len) in per_cone(form, &scalings) {
            sc.lambda_circ_solve(&ds_target[off..off + len], &mut dtilde[off..off + len]);
        }
        let dkap = if use_corrector {
            -tau * kappa - dtau * dkappa + sigma * mu
        } else {
            -tau * kappa + sigma * mu
        };
        let (ct, ck) = direction(
            &dtilde,
            dkap,
            1.0 - sigma,
            &mut dx,
            &mut dy,
            &mut dz,
            &mut ds,
            &mut wdz,
            &mut winvtds,
        );
        dtau = ct;
        dkappa = ck;
        let mut alpha = (0.9 * max_alpha(&wdz, &winvtds, dtau, dkappa)).min(1.0);

        // Safeguard for degenerate geometry: when the Mehrotra direction
        // collapses (the affine direction can blow up without strict
        // complementarity), retry with the barrier parameter held fixed and
        // full residual reduction. The fixed-mu Newton map is nonsingular
        // on the central path, so this step stays bounded and still
        // contracts the residuals.
        if !(alpha > 1e-5) {
            let mut dtilde_c = vec![0.0; m];
            {
                let e = form.layout.identity();
                let mut ll = vec![0.0; m];
                for (sc, off, len) in per_cone(form, &scalings) {
                    sc.circ(
                        &lambda[off..off + len],
                        &lambda[off..off + len],
                        &mut ll[off..off + len],
                    );
                }
                let mut target = vec![0.0; m];
                for i in 0..m {
                    target[i] = -ll[i] + mu * e[i];
                }
                for (sc, off, len) in per_cone(form, &scalings) {
                    sc.lambda_circ_solve(&target[off..off + len], &mut dtilde_c[off..off + len]);
                }
            }
            let (ct, ck) = direction(
                &dtilde_c,
                -tau * kappa + mu,
                1.0,
                &mut dx,
                &mut dy,
                &mut dz,
                &mut ds,
                &mut wdz,
                &mut winvtds,
            );
            dtau = ct;
            dkappa = ck;
            alpha = (0.99 * max_alpha(&wdz, &winvtds, dtau, dkappa)).min(1.0);
            small_steps += 1;
        } else {
            small_steps = 0;
        }

        if trace_enabled() {
            let nbhz = -(dot(b, &y) + dot(&h, &z));
            let pinf = if nbhz > 0.0 {
                let mut aty = vec![0.0; n];
                form.at_mul_acc(&y, 1.0, &mut aty);
                form.gt_mul_acc(&z, 1.0, &mut aty);
                norm(&aty) / norm_c / nbhz
            } else {
                f64::INFINITY
            };
            eprintln!(
                "ipm iter {iter}: pres={pres:.3e} dres={dres:.3e} gap={gap:.3e} tau={tau:.3e} \
                 kappa={kappa:.3e} mu={mu:.3e} sigma={sigma:.3e} a_aff={alpha_aff:.3e} a={alpha:.3e} pinf={pinf:.3e}"
            );
        }
        if !alpha.is_finite() || alpha <= 1e-10 || small_steps >= 4 {
            // Frozen steps: the best iterate is all this instance yields.
            return RawOutcome {
                status: SolveStatus::MaxIterations,
                x: best_x,
                iterations: iter,
                residuals: best_report,
            };
        }

        // Step acceptance: backtrack until the candidate (a) does not
        // substantially worsen the progress merit and (b) stays in a wide
        // centrality neighborhood. Off-center iterates make the scaled
        // Newton directions blow up, which is how the endgame stalls.
        let cur_metric = metric;
        let mut cx = vec![0.0; n];
        let mut cy = vec![0.0; p];
        let mut cz = vec![0.0; m];
        let mut cs = vec![0.0; m];
        let mut committed = false;
        for _ in 0..16 {
            for i in 0..n {
                cx[i] = x[i] + alpha * dx[i];
            }
            for i in 0..p {
                cy[i] = y[i] + alpha * dy[i];
            }
            for i in 0..m {
                cz[i] = z[i] + alpha * dz[i];
                cs[i] = s[i] + alpha * ds[i];
            }
            form.project_embedding(&mut cz);
            form.project_embedding(&mut cs);
            let ctau = tau + alpha * dtau;
            let ckappa = kappa + alpha * dkappa;
            // ds comes from the third Newton equation rather than the
            // scaled complementarity form, so cone membership must be
            // verified on the actual candidate, not just the scaled step.
            let interior = form.layout.min_shift(&cs) < 0.0 && form.layout.min_shift(&cz) < 0.0;
            if interior && ctau > 0.0 && ckappa >= 0.0 && ctau.is_finite() {
                let nmetric =
                    progress_metric(form, &h, norm_b, norm_h, norm_c, &cx, &cy, &cz, &cs, ctau, ckappa);
                if nmetric <= 1.5 * cur_metric {
                    std::mem::swap(&mut x, &mut cx);
                    std::mem::swap(&mut y, &mut cy);
                    std::mem::swap(&mut z, &mut cz);
                    std::mem::swap(&mut s, &mut cs);
                    tau = ctau;
                    kappa = ckappa;
                    committed = true;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-10 {
                break;
            }
        }
        if !committed {
            small_steps += 1;
        }
    }

    RawOutcome {
        status: SolveStatus::MaxIterations,
        x: x.iter().map(|v| v / tau).collect(),
        iterations: cfg.max_iters_ipm,
        residuals: best_res,
    }
}
