//! First-order fallback: Douglas-Rachford splitting on the homogeneous
//! self-dual embedding (the operator-splitting scheme of SCS). One dense
//! LU factorization up front, then cheap iterations of linear solve plus
//! cone projection. Used when the interior-point path is inconclusive.

use nalgebra::{DMatrix, DVector};

use crate::cones::ConeLayout;
use crate::problem::StdForm;
use crate::{ResidualReport, SolveStatus, SolverConfig};

use crate::ipm::RawOutcome;

pub(crate) fn solve(form: &StdForm, cfg: &SolverConfig) -> RawOutcome {
    let n = form.n;
    let p = form.p();
    let m = form.m();
    let nn = n + p + m + 1;

    // Stacked constraint matrix [A; G] and right-hand side [b; h].
    let mut mat = DMatrix::zeros(p + m, n);
    for (i, row) in form.a_rows.iter().enumerate() {
        for &(c, v) in row {
            mat[(i, c)] += v;
        }
    }
    {
        let mut gcol = vec![0.0; m];
        let mut unit = vec![0.0; n];
        for j in 0..n {
            unit[j] = 1.0;
            form.g_mul(&unit, &mut gcol);
            unit[j] = 0.0;
            for i in 0..m {
                if gcol[i] != 0.0 {
                    mat[(p + i, j)] = gcol[i];
                }
            }
        }
    }
    let mut rhs = DVector::zeros(p + m);
    for i in 0..p {
        rhs[i] = form.b[i];
    }
    let h = form.h_vec();
    for i in 0..m {
        rhs[p + i] = h[i];
    }
    let c = DVector::from_column_slice(&form.c);

    // I + Q with Q the skew HSDE operator.
    let mut iq = DMatrix::identity(nn, nn);
    for i in 0..(p + m) {
        for j in 0..n {
            let v = mat[(i, j)];
            if v != 0.0 {
                iq[(j, n + i)] += v; // M^T in the x-row
                iq[(n + i, j)] -= v; // -M in the y-row
            }
        }
    }
    for j in 0..n {
        iq[(j, nn - 1)] += c[j];
        iq[(nn - 1, j)] -= c[j];
    }
    for i in 0..(p + m) {
        iq[(n + i, nn - 1)] += rhs[i];
        iq[(nn - 1, n + i)] -= rhs[i];
    }
    let lu = iq.lu();

    let mut u = DVector::zeros(nn);
    u[nn - 1] = 1.0;
    let mut v = DVector::zeros(nn);
    v[nn - 1] = 1.0;

    let project_dual = |w: &mut DVector<f64>, layout: &ConeLayout| {
        // y-block: zero-cone rows are free, the rest project onto K.
        let mut cone_part: Vec<f64> = (0..m).map(|i| w[n + p + i]).collect();
        layout.project(&mut cone_part);
        for i in 0..m {
            w[n + p + i] = cone_part[i];
        }
        if w[nn - 1] < 0.0 {
            w[nn - 1] = 0.0;
        }
    };

    let mut best = ResidualReport::default();
    let check_every = 50;
    let mut iter = 0;
    while iter < cfg.max_iters_admm {
        let util = lu.solve(&(&u + &v)).expect("I+Q is nonsingular");
        let mut unew = &util - &v;
        project_dual(&mut unew, &form.layout);
        v = &v - &util + &unew;
        u = unew;
        iter += 1;

        if iter % check_every != 0 {
            continue;
        }
        let tau = u[nn - 1];
        if tau > 1e-9 {
            let x: Vec<f64> = (0..n).map(|i| u[i] / tau).collect();
            let y: Vec<f64> = (0..(p + m)).map(|i| u[n + i] / tau).collect();
            let s: Vec<f64> = (0..(p + m)).map(|i| v[n + i] / tau).collect();
            let mut prim = DVector::zeros(p + m);
            for i in 0..(p + m) {
                prim[i] = s[i] - rhs[i];
            }
            let xv = DVector::from_column_slice(&x);
            prim += &mat * &xv;
            let yv = DVector::from_column_slice(&y);
            let dual = mat.transpose() * &yv + &c;
            let cx: f64 = form.c.iter().zip(&x).map(|(a, b)| a * b).sum();
            let by: f64 = (0..(p + m)).map(|i| rhs[i] * y[i]).sum();
            let pres = prim.norm() / (1.0 + rhs.norm());
            let dres = dual.norm() / (1.0 + c.norm());
            let gap = (cx + by).abs();
            let relgap = gap / (1.0 + cx.abs() + by.abs());
            best = ResidualReport {
                primal: pres,
                dual: dres,
                gap,
                rel_gap: relgap,
            };
            if pres <= cfg.rel_tol && dres <= cfg.rel_tol && relgap <= cfg.rel_tol.max(cfg.abs_tol)
            {
                return RawOutcome {
                    status: SolveStatus::Optimal,
                    x,
                    iterations: iter,
                    residuals: best,
                };
            }
        } else {
            // Certificate checks at vanishing tau.
            let y: Vec<f64> = (0..(p + m)).map(|i| u[n + i]).collect();
            let by: f64 = (0..(p + m)).map(|i| rhs[i] * y[i]).sum();
            if by < 0.0 {
                let yv = DVector::from_column_slice(&y);
                let aty = mat.transpose() * &yv;
                if aty.norm() / (-by) <= cfg.infeas_tol {
                    return RawOutcome {
                        status: SolveStatus::Infeasible,
                        x: vec![0.0; n],
                        iterations: iter,
                        residuals: best,
                    };
                }
            }
            let cx: f64 = (0..n).map(|i| form.c[i] * u[i]).sum();
            if cx < 0.0 {
                let xv = DVector::from_fn(n, |i, _| u[i]);
                let mx = &mat * &xv;
                let mut s_c: Vec<f64> = (0..m).map(|i| -mx[p + i]).collect();
                form.layout.project(&mut s_c);
                let mut res: f64 = (0..p).map(|i| mx[i] * mx[i]).sum();
                for i in 0..m {
                    res += (mx[p + i] + s_c[i]).powi(2);
                }
                if res.sqrt() / (-cx) <= cfg.infeas_tol {
                    return RawOutcome {
                        status: SolveStatus::Unbounded,
                        x: vec![0.0; n],
                        iterations: iter,
                        residuals: best,
                    };
                }
            }
        }
    }

    let tau = u[nn - 1].max(1e-300);
    RawOutcome {
        status: SolveStatus::MaxIterations,
        x: (0..n).map(|i| u[i] / tau).collect(),
        iterations: cfg.max_iters_admm,
        residuals: best,
    }
}
