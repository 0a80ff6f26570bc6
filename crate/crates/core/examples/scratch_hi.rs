use dfrc_core::design::*;
use dfrc_core::metrics::from_db10;
use dfrc_core::simulate::rayleigh_channel;
use dfrc_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let geom = ArrayGeometry::half_wavelength(10).unwrap();
    let grid = angle_grid(-90.0, 90.0, 0.1).unwrap();
    let spec = BeamSpec::new(vec![-40.0, 0.0, 40.0], 10.0, grid, 1.0).unwrap();
    let obj = build_radar_loss(&geom, &spec).unwrap();
    let cfg = DesignConfig::new(1.0, 0.01, SinrThresholds::Uniform(from_db10(24.0))).unwrap();
    let mut statuses = std::collections::BTreeMap::new();
    for t in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        rng.set_stream((2u64 << 32) | t);
        let h = rayleigh_channel(2, 10, &mut rng).unwrap();
        let tag = match sdr_solve(&obj, &cfg, &h) {
            Ok(SolveOutcome::Solved(_)) => "solved",
            Ok(SolveOutcome::Infeasible(_)) => "infeasible",
            Ok(SolveOutcome::Failed(d)) => { if t < 40 { eprintln!("t={t} failed: {:?} iters {} res {:?}", d.status, d.iterations, d.residuals); } "failed" }
            Err(_) => "error",
        };
        *statuses.entry(tag).or_insert(0usize) += 1;
    }
    println!("{statuses:?}");
}
