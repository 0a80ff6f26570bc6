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
    let mut worst_ratio: f64 = 0.0;
    let mut worst_power: f64 = 0.0;
    let mut worst_short: f64 = f64::NEG_INFINITY;
    let mut count = 0;
    for gdb in [4.0f64, 12.0, 20.0, 24.0] {
        let gamma = from_db10(gdb);
        let cfg = DesignConfig::new(1.0, 0.01, SinrThresholds::Uniform(gamma)).unwrap();
        for k in [2usize, 4] {
            for t in 0..8u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(2024);
                rng.set_stream(((k as u64) << 32) | (900 + t));
                let h = rayleigh_channel(k, 10, &mut rng).unwrap();
                let out = match zf_beamform(&obj, &cfg, &h) { Ok(o) => o, Err(e) => { println!("err {e}"); continue } };
                let fea = match out.feasible { Some(f) => f, None => continue };
                count += 1;
                let fc = h.matrix() * fea.precoder.comm();
                let fr = h.matrix() * fea.precoder.radar();
                for u in 0..k {
                    let sig = fc[(u, u)].norm_sqr();
                    let mut interf: f64 = (0..k).filter(|&i| i != u).map(|i| fc[(u, i)].norm_sqr()).sum();
                    interf += (0..10).map(|i| fr[(u, i)].norm_sqr()).sum::<f64>();
                    worst_ratio = worst_ratio.max(interf / sig);
                }
                for j in 0..10 {
                    worst_power = worst_power.max((fea.precoder.row_power(j) - 0.1).abs() / 0.1);
                }
                for g in &fea.sinr { worst_short = worst_short.max(gamma - g); }
            }
        }
    }
    println!("{count} feasible: worst interference/signal {worst_ratio:.3e}, worst power dev {worst_power:.3e}, worst sinr shortfall {worst_short:.3e}");
}
