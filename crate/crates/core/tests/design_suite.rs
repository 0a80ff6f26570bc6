//! Integration checks of the three designs on small and full-scale
//! instances: constraint satisfaction, extraction tightness, the ZF
//! factorization identities, and ordering between the designs.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use dfrc_core::design::{
    gamma_ii, radar_only, rank_one_extract, sdr_beamform, sdr_solve, zf_beamform,
    zf_construct_precoder, zf_solve, SolveOutcome,
};
use dfrc_core::metrics::{fairness, sinr_closed_form};
use dfrc_core::simulate::rayleigh_channel;
use dfrc_core::{
    angle_grid, build_radar_loss, eval_loss, ArrayGeometry, BeamSpec, Channel, DesignConfig,
    DesignStatus, HermitianCov, RadarObjective, SinrThresholds,
};

type CMat = DMatrix<Complex64>;

fn small_objective(m: usize) -> RadarObjective {
    let geom = ArrayGeometry::half_wavelength(m).unwrap();
    let grid = angle_grid(-90.0, 90.0, 2.0).unwrap();
    let spec = BeamSpec::new(vec![-40.0, 0.0, 40.0], 10.0, grid, 1.0).unwrap();
    build_radar_loss(&geom, &spec).unwrap()
}

fn config(gamma: f64) -> DesignConfig {
    DesignConfig::new(1.0, 0.01, SinrThresholds::Uniform(gamma)).unwrap()
}

#[test]
fn radar_only_single_antenna_is_determined() {
    let geom = ArrayGeometry::half_wavelength(1).unwrap();
    let grid = angle_grid(-90.0, 90.0, 5.0).unwrap();
    let spec = BeamSpec::new(vec![0.0], 10.0, grid, 1.0).unwrap();
    let obj = build_radar_loss(&geom, &spec).unwrap();
    let sol = radar_only(&obj, &config(0.0)).unwrap();
    assert!((sol.covariance.matrix()[(0, 0)].re - 1.0).abs() < 1e-6);
}

#[test]
fn radar_only_beats_uniform_covariance() {
    let m = 6;
    let obj = small_objective(m);
    let cfg = config(0.0);
    let sol = radar_only(&obj, &cfg).unwrap();
    for i in 0..m {
        assert!(
            (sol.covariance.matrix()[(i, i)].re - 1.0 / m as f64).abs() < 1e-6,
            "per-antenna power"
        );
    }
    let uniform = HermitianCov::new(
        DMatrix::identity(m, m).map(|x: f64| Complex64::new(x / m as f64, 0.0)),
    )
    .unwrap();
    let (_, uniform_loss) = dfrc_core::minimize_alpha(&obj, &uniform).unwrap();
    assert!(sol.loss <= uniform_loss + 1e-9);
    // Joint alpha optimization: the returned alpha is the closed-form
    // minimizer for the returned covariance.
    let (astar, lstar) = dfrc_core::minimize_alpha(&obj, &sol.covariance).unwrap();
    assert!((sol.loss - lstar).abs() <= 1e-6 * (1.0 + lstar));
    assert!((sol.alpha - astar).abs() <= 1e-4 * (1.0 + astar.abs()));
}

#[test]
fn sdr_meets_constraints_and_tightness() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for (k, gamma_db) in [(2usize, 8.0), (3, 12.0)] {
        let cfg = config(10f64.powf(gamma_db / 10.0));
        let h = rayleigh_channel(k, m, &mut rng).unwrap();
        let out = sdr_beamform(&obj, &cfg, &h).unwrap();
        assert_eq!(out.status, DesignStatus::Feasible);
        let fea = out.feasible.unwrap();
        let gamma = 10f64.powf(gamma_db / 10.0);
        for (kk, g) in fea.sinr.iter().enumerate() {
            assert!(*g >= gamma - 1e-6, "user {kk}: {g} < {gamma}");
        }
        // Per-antenna power of the extracted precoder.
        for i in 0..m {
            assert!(
                (fea.precoder.row_power(i) - 1.0 / m as f64).abs() <= 1e-6,
                "row {i} power {}",
                fea.precoder.row_power(i)
            );
        }
        // Tightness: the built W reproduces the relaxed covariance and loss.
        let ww = fea.precoder.covariance();
        let dev = (&ww - fea.covariance.matrix()).norm() / fea.covariance.matrix().norm();
        assert!(dev <= 1e-6, "covariance deviation {dev}");
        let rebuilt = HermitianCov::new(ww).unwrap();
        let loss_w = eval_loss(&obj, &rebuilt, fea.alpha).unwrap();
        assert!(
            (loss_w - fea.loss).abs() <= 1e-5 * (1.0 + fea.loss),
            "loss {loss_w} vs relaxed {fea_loss}",
            fea_loss = fea.loss
        );
    }
}

#[test]
fn sdr_gamma_to_zero_recovers_radar_only() {
    let m = 6;
    let obj = small_objective(m);
    let r0 = radar_only(&obj, &config(0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let cfg = config(1e-9);
    match sdr_solve(&obj, &cfg, &h).unwrap() {
        SolveOutcome::Solved(rel) => {
            assert!(
                (rel.loss - r0.loss).abs() <= 1e-4 * (1.0 + r0.loss),
                "{} vs {}",
                rel.loss,
                r0.loss
            );
        }
        other => panic!("expected solve, got {other:?}"),
    }
}

#[test]
fn sdr_enormous_threshold_is_infeasible() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let cfg = config(1e20);
    match sdr_solve(&obj, &cfg, &h).unwrap() {
        SolveOutcome::Infeasible(_) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
    match zf_solve(&obj, &cfg, &h).unwrap() {
        SolveOutcome::Infeasible(_) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn sdr_per_user_thresholds() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let g1 = 10f64.powf(0.4); // 4 dB
    let g2 = 10f64.powf(1.6); // 16 dB
    let cfg = DesignConfig::new(1.0, 0.01, SinrThresholds::PerUser(vec![g1, g2])).unwrap();
    let out = sdr_beamform(&obj, &cfg, &h).unwrap();
    assert_eq!(out.status, DesignStatus::Feasible);
    let fea = out.feasible.unwrap();
    assert!(fea.sinr[0] >= g1 - 1e-6);
    assert!(fea.sinr[1] >= g2 - 1e-6);
}

#[test]
fn rank_one_extraction_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = 5;
    for _ in 0..20 {
        let a = CMat::from_fn(m, m, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rk = HermitianCov::new(&a * a.adjoint()).unwrap();
        let h = DVector::from_fn(m, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let w = rank_one_extract(&rk, &h).unwrap();
        // Received power preserved exactly.
        let hw: Complex64 = h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
        let hrh = (h.adjoint() * rk.matrix() * &h)[(0, 0)].re;
        assert!((hw.norm_sqr() - hrh).abs() <= 1e-10 * (1.0 + hrh));
        // Residual PSD (Cauchy-Schwarz).
        let resid = rk.matrix() - &w * w.adjoint();
        let eig = SymmetricEigen::new(resid);
        let minev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        let maxev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        assert!(minev >= -1e-8 * maxev.max(1e-300), "minev {minev}");
    }

    // Rank-one input recovers the generating vector.
    let w0 = DVector::from_fn(m, |i, _| Complex64::new(1.0 + i as f64, -(i as f64)));
    let rk = HermitianCov::new(&w0 * w0.adjoint()).unwrap();
    let h = DVector::from_fn(m, |i, _| Complex64::new(0.3 * i as f64 + 0.1, 0.2));
    let w = rank_one_extract(&rk, &h).unwrap();
    let dev = (&w * w.adjoint() - rk.matrix()).norm() / rk.matrix().norm();
    assert!(dev < 1e-10);

    // Identity covariance projects onto h.
    let id = HermitianCov::new(CMat::identity(2, 2)).unwrap();
    let h = DVector::from_column_slice(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
    let w = rank_one_extract(&id, &h).unwrap();
    assert!((w[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    assert!(w[1].norm() < 1e-12);
}

#[test]
fn zf_construction_roundtrip_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (k, m) in [(1usize, 2usize), (2, 4), (4, 10)] {
        for _ in 0..25 {
            let a = CMat::from_fn(m, m, |_, _| {
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let r = HermitianCov::new(
                &a * a.adjoint() + CMat::identity(m, m) * Complex64::new(0.05, 0.0),
            )
            .unwrap();
            let h = rayleigh_channel(k, m, &mut rng).unwrap();
            let gram = h.matrix() * r.matrix() * h.matrix().adjoint();
            let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
            // F = [chol(Gram), 0] has a matching Gram by construction.
            let lg = gram.clone().cholesky().unwrap().l();
            let mut f = CMat::zeros(k, k + m);
            f.view_mut((0, 0), (k, k)).copy_from(&lg);
            let w = zf_construct_precoder(&r, &f, &h).unwrap();
            let werr = (&w * w.adjoint() - r.matrix()).norm() / r.matrix().norm();
            assert!(werr <= 1e-8, "WW^H error {werr} at ({k},{m})");
            let ferr = (h.matrix() * &w - &f).norm() / f.norm();
            assert!(ferr <= 1e-8, "HW error {ferr} at ({k},{m})");
        }
    }
}

#[test]
fn zf_construction_general_target() {
    // Non-diagonal F with matching Gram still reconstructs.
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let (k, m) = (3usize, 6usize);
    let a = CMat::from_fn(m, m, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let r = HermitianCov::new(&a * a.adjoint() + CMat::identity(m, m) * Complex64::new(0.05, 0.0))
        .unwrap();
    let h = rayleigh_channel(k, m, &mut rng).unwrap();
    let gram = h.matrix() * r.matrix() * h.matrix().adjoint();
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let lg = gram.clone().cholesky().unwrap().l();
    // Smear the Cholesky factor with a random unitary: F = [L U, 0-ish]
    // keeps F F^H = Gram while making F dense.
    let b = CMat::from_fn(k + m, k + m, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let qr = b.qr();
    let u = qr.q().columns(0, k + m).into_owned();
    let mut lpad = CMat::zeros(k, k + m);
    lpad.view_mut((0, 0), (k, k)).copy_from(&lg);
    let f = &lpad * u.adjoint();
    let w = zf_construct_precoder(&r, &f, &h).unwrap();
    let werr = (&w * w.adjoint() - r.matrix()).norm() / r.matrix().norm();
    let ferr = (h.matrix() * &w - &f).norm() / f.norm();
    assert!(werr <= 1e-8, "{werr}");
    assert!(ferr <= 1e-8, "{ferr}");

    // Gram mismatch is rejected.
    let f_bad = f * Complex64::new(1.01, 0.0);
    assert!(zf_construct_precoder(&r, &f_bad, &h).is_err());
}

#[test]
fn zf_design_nulls_interference() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let gamma = 10f64.powf(1.2);
    let cfg = config(gamma);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let out = zf_beamform(&obj, &cfg, &h).unwrap();
    assert_eq!(out.status, DesignStatus::Feasible);
    let fea = out.feasible.unwrap();
    // Interference power (inter-user + radar) is essentially zero.
    let fc = h.matrix() * fea.precoder.comm();
    let fr = h.matrix() * fea.precoder.radar();
    for kk in 0..2 {
        let signal = fc[(kk, kk)].norm_sqr();
        let mut interf: f64 = (0..2)
            .filter(|&i| i != kk)
            .map(|i| fc[(kk, i)].norm_sqr())
            .sum();
        interf += (0..m).map(|i| fr[(kk, i)].norm_sqr()).sum::<f64>();
        assert!(interf <= 1e-12 * signal, "interf {interf} signal {signal}");
    }
    assert!(fairness(&fea.sinr) >= gamma - 1e-6);
    // Off-diagonal of H R H^H vanishes to tolerance.
    let gram = h.matrix() * fea.covariance.matrix() * h.matrix().adjoint();
    let pmax = (0..2).map(|i| gram[(i, i)].re).fold(0.0_f64, f64::max);
    assert!(gram[(0, 1)].norm() <= 1e-7 * pmax);
}

#[test]
fn zf_plateau_below_gamma_ii() {
    let m = 6;
    let obj = small_objective(m);
    let cfg = config(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let g2 = gamma_ii(&obj, &cfg, &h).unwrap();
    assert!(g2.gamma > 0.0);
    let base_loss = g2.solution.loss;
    for frac in [0.25, 0.5, 1.0] {
        let cfg_f = config(frac * g2.gamma);
        match zf_solve(&obj, &cfg_f, &h).unwrap() {
            SolveOutcome::Solved(z) => {
                assert!(
                    (z.loss - base_loss).abs() <= 1e-5 * (1.0 + base_loss),
                    "frac {frac}: {} vs {base_loss}",
                    z.loss
                );
                let fair = z.powers.iter().cloned().fold(f64::INFINITY, f64::min)
                    / cfg.noise_power;
                assert!(
                    (fair - g2.gamma).abs() <= 1e-4 * (1.0 + g2.gamma),
                    "fairness {fair} vs {g2}",
                    g2 = g2.gamma
                );
            }
            other => panic!("expected solve at {frac} gamma_II, got {other:?}"),
        }
    }
    // Strictly above the plateau the loss increases.
    let cfg_hi = config(1.5 * g2.gamma);
    if let SolveOutcome::Solved(z) = zf_solve(&obj, &cfg_hi, &h).unwrap() {
        assert!(z.loss >= base_loss - 1e-8);
        let fair = z.powers.iter().cloned().fold(f64::INFINITY, f64::min) / cfg.noise_power;
        assert!(fair >= 1.5 * g2.gamma - 1e-6 * (1.0 + g2.gamma));
    } else {
        panic!("expected solve above gamma_II");
    }
}

#[test]
fn sdr_dominates_zf() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(271);
    let gamma = 10f64.powf(1.2);
    let cfg = config(gamma);
    for _ in 0..5 {
        let h = rayleigh_channel(2, m, &mut rng).unwrap();
        let s = sdr_beamform(&obj, &cfg, &h).unwrap();
        let z = zf_beamform(&obj, &cfg, &h).unwrap();
        if let (Some(sf), Some(zf)) = (s.feasible, z.feasible) {
            assert!(
                sf.loss <= zf.loss + 1e-5,
                "sdr {} should not exceed zf {}",
                sf.loss,
                zf.loss
            );
        }
    }
}

#[test]
fn sdr_loss_monotone_in_gamma() {
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let mut last = -1.0;
    for gamma_db in [4.0, 10.0, 16.0] {
        let cfg = config(10f64.powf(gamma_db / 10.0));
        match sdr_solve(&obj, &cfg, &h).unwrap() {
            SolveOutcome::Solved(rel) => {
                assert!(rel.loss >= last - 1e-6, "loss {idx} at {gamma_db} dB", idx = rel.loss);
                last = rel.loss;
            }
            other => panic!("expected solve at {gamma_db} dB, got {other:?}"),
        }
    }
}

#[test]
fn closed_form_sinr_matches_relaxed_constraint_values() {
    // The extracted precoder's SINR computed from F_c/F_r agrees with the
    // h R_k h quantities of the relaxed solution.
    let m = 6;
    let obj = small_objective(m);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    let h = rayleigh_channel(2, m, &mut rng).unwrap();
    let gamma = 10f64.powf(1.0);
    let cfg = config(gamma);
    if let SolveOutcome::Solved(rel) = sdr_solve(&obj, &cfg, &h).unwrap() {
        let out = sdr_beamform(&obj, &cfg, &h).unwrap();
        let fea = out.feasible.unwrap();
        for kk in 0..2 {
            let hv = h.user_vector(kk);
            let sig = (hv.adjoint() * rel.user_covariances[kk].matrix() * &hv)[(0, 0)].re;
            let tot = (hv.adjoint() * rel.covariance.matrix() * &hv)[(0, 0)].re;
            let expect = sig / (tot - sig + cfg.noise_power);
            let got = sinr_closed_form(&h, &fea.precoder, cfg.noise_power)[kk];
            assert!(
                (got - expect).abs() <= 1e-5 * (1.0 + expect),
                "user {kk}: {got} vs {expect}"
            );
        }
    } else {
        panic!("expected solve");
    }
}
