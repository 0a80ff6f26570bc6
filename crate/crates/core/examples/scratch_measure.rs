use dfrc_core::design::*;
use dfrc_core::metrics::from_db10;
use dfrc_core::simulate::rayleigh_channel;
use dfrc_core::*;
use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let geom = ArrayGeometry::half_wavelength(10).unwrap();
    let grid = angle_grid(-90.0, 90.0, 0.1).unwrap();
    let spec = BeamSpec::new(vec![-40.0, 0.0, 40.0], 10.0, grid, 1.0).unwrap();
    let obj = build_radar_loss(&geom, &spec).unwrap();
    let mut worst_gamma_shortfall: f64 = 0.0;
    let mut worst_delta_rel: f64 = 0.0;
    let mut worst_userres: f64 = 0.0;
    let mut worst_loss_dev: f64 = 0.0;
    let mut worst_power_dev: f64 = 0.0;
    let mut fails = 0;
    let mut trial = 0u64;
    let t0 = std::time::Instant::now();
    for k in [2usize, 4] {
        for gdb in [4.0, 12.0, 20.0] {
            let gamma = from_db10(gdb);
            let cfg = DesignConfig::new(1.0, 0.01, SinrThresholds::Uniform(gamma)).unwrap();
            for t in 0..8 {
                trial += 1;
                let mut rng = ChaCha8Rng::seed_from_u64(7);
                rng.set_stream(((k as u64) << 32) | t);
                let h = rayleigh_channel(k, 10, &mut rng).unwrap();
                let rel = match sdr_solve(&obj, &cfg, &h) {
                    Ok(SolveOutcome::Solved(r)) => r,
                    other => { println!("k={k} g={gdb} t={t}: not solved: {other:?}"); fails += 1; continue; }
                };
                let out = match sdr_beamform(&obj, &cfg, &h) {
                    Ok(o) => o,
                    Err(e) => { println!("k={k} g={gdb} t={t}: beamform err {e}"); fails += 1; continue; }
                };
                let fea = out.feasible.unwrap();
                for g in &fea.sinr {
                    worst_gamma_shortfall = worst_gamma_shortfall.max(gamma - *g);
                }
                // raw residual Delta-hat = R - sum w w^H (before clipping)
                let mut delta = rel.covariance.matrix().clone();
                for c in 0..k {
                    let w = fea.precoder.comm().column(c);
                    delta -= &w * w.adjoint();
                }
                let eig = SymmetricEigen::new((&delta + delta.adjoint()) * Complex64::new(0.5, 0.0));
                let dmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                let rmax = rel.covariance.eigenvalues()[0];
                worst_delta_rel = worst_delta_rel.max(-dmin / rmax);
                for c in 0..k {
                    let hv = h.user_vector(c);
                    let quad = (hv.adjoint() * rel.user_covariances[c].matrix() * &hv)[(0,0)].re;
                    let w = fea.precoder.comm().column(c);
                    let resid = rel.user_covariances[c].matrix() - &w * w.adjoint();
                    let e2 = SymmetricEigen::new((&resid + resid.adjoint()) * Complex64::new(0.5,0.0));
                    let m2 = e2.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
                    worst_userres = worst_userres.max(-m2 / rmax);
                    let _ = quad;
                }
                let ww = HermitianCov::new(fea.precoder.covariance()).unwrap();
                let lw = eval_loss(&obj, &ww, fea.alpha).unwrap();
                worst_loss_dev = worst_loss_dev.max((lw - fea.loss).abs() / (1.0 + fea.loss));
                for i in 0..10 {
                    worst_power_dev = worst_power_dev.max((fea.precoder.row_power(i) - 0.1).abs() / 0.1);
                }
            }
        }
    }
    println!("ran {trial} instances in {:?}, {fails} failures", t0.elapsed());
    println!("worst gamma shortfall (abs linear): {worst_gamma_shortfall:.3e}");
    println!("worst -lambda_min(Delta)/lambda_max(R): {worst_delta_rel:.3e}");
    println!("worst -lambda_min(Rk - ww)/lambda_max(R): {worst_userres:.3e}");
    println!("worst |loss(WW)-relaxed|/(1+loss): {worst_loss_dev:.3e}");
    println!("worst per-antenna power rel dev: {worst_power_dev:.3e}");
}
