//! Waveform-level verification: Rayleigh channels, QPSK waveform blocks,
//! transmit synthesis, communication and radar receive models, matched
//! filtering over delay, and the diagonally loaded Capon spatial spectrum.
//!
//! All randomness flows through a caller-provided generator, so trials are
//! reproducible from `(master seed, stream index)` pairs.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::array::{steering_vector, ArrayGeometry};
use crate::design::{Channel, Precoder};
use crate::error::{CoreError, Result};

type CMat = DMatrix<Complex64>;

/// Circularly-symmetric complex normal with unit variance (variance 1/2
/// per real component), via Box-Muller.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * phi.cos(), r * phi.sin()) / Complex64::new(std::f64::consts::SQRT_2, 0.0)
}

/// i.i.d. standard complex normal channel, `K x M`.
pub fn rayleigh_channel<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<Channel> {
    Channel::new(CMat::from_fn(k, m, |_, _| standard_complex(rng)))
}

/// Random QPSK block with unit-modulus entries `(+-1 +- j)/sqrt(2)`.
pub fn gen_qpsk<R: Rng + ?Sized>(rows: usize, n: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, n, |_, _| {
        let re = if rng.gen::<bool>() { s } else { -s };
        let im = if rng.gen::<bool>() { s } else { -s };
        Complex64::new(re, im)
    })
}

/// `X = W_r S + W_c C`.
pub fn transmit(w: &Precoder, radar: &CMat, comm: &CMat) -> Result<CMat> {
    let m = w.num_antennas();
    let k = w.num_users();
    if radar.nrows() != m || comm.nrows() != k || radar.ncols() != comm.ncols() {
        return Err(CoreError::Dimension(format!(
            "transmit shapes: S {}x{}, C {}x{} for M={m}, K={k}",
            radar.nrows(),
            radar.ncols(),
            comm.nrows(),
            comm.ncols()
        )));
    }
    Ok(w.radar() * radar + w.comm() * comm)
}

/// A generated transmit block with its constituent waveforms.
#[derive(Clone, Debug)]
pub struct WaveformBlock {
    pub radar: CMat,
    pub comm: CMat,
    pub transmit: CMat,
}

impl WaveformBlock {
    pub fn generate<R: Rng + ?Sized>(w: &Precoder, n: usize, rng: &mut R) -> Result<Self> {
        let radar = gen_qpsk(w.num_antennas(), n, rng);
        let comm = gen_qpsk(w.num_users(), n, rng);
        let x = transmit(w, &radar, &comm)?;
        Ok(WaveformBlock {
            radar,
            comm,
            transmit: x,
        })
    }

    pub fn block_len(&self) -> usize {
        self.transmit.ncols()
    }

    /// Empirical covariance `X X^H / N`.
    pub fn empirical_covariance(&self) -> CMat {
        let n = self.block_len() as f64;
        &self.transmit * self.transmit.adjoint() / Complex64::new(n, 0.0)
    }
}

/// Comm/radar noise levels (radar noise covariance is `sigma_r^2 I`).
#[derive(Clone, Copy, Debug)]
pub struct NoiseModel {
    pub comm_variance: f64,
    pub radar_variance: f64,
}

impl NoiseModel {
    pub fn new(comm_variance: f64, radar_variance: f64) -> Result<Self> {
        if !(comm_variance > 0.0 && radar_variance > 0.0) {
            return Err(CoreError::Domain("noise variances must be positive".into()));
        }
        Ok(NoiseModel {
            comm_variance,
            radar_variance,
        })
    }
}

/// Downlink receive block `r = H X + V`, `K x N`.
pub fn comm_receive<R: Rng + ?Sized>(
    channel: &Channel,
    x: &CMat,
    noise_variance: f64,
    rng: &mut R,
) -> Result<CMat> {
    if x.nrows() != channel.num_antennas() {
        return Err(CoreError::Dimension("receive shapes".into()));
    }
    let mut r = channel.matrix() * x;
    if noise_variance > 0.0 {
        let sd = noise_variance.sqrt();
        for v in r.iter_mut() {
            *v += standard_complex(rng) * Complex64::new(sd, 0.0);
        }
    }
    Ok(r)
}

/// A point scatterer: complex amplitude, discrete delay, angle.
#[derive(Clone, Copy, Debug)]
pub struct RadarTarget {
    pub amplitude: Complex64,
    pub delay: usize,
    pub angle_deg: f64,
}

/// Monostatic radar receive block: each target contributes
/// `beta a^c(theta) a^H(theta) x[n - delay]` (zero-padded delay, no
/// wraparound), plus white Gaussian noise.
pub fn radar_receive<R: Rng + ?Sized>(
    geom: &ArrayGeometry,
    targets: &[RadarTarget],
    x: &CMat,
    noise_variance: f64,
    rng: &mut R,
) -> Result<CMat> {
    let m = geom.num_elements();
    let n = x.ncols();
    if x.nrows() != m {
        return Err(CoreError::Dimension("radar receive shapes".into()));
    }
    let mut out = CMat::zeros(m, n);
    for t in targets {
        if t.delay >= n {
            return Err(CoreError::Domain(format!(
                "target delay {} exceeds block length {n}",
                t.delay
            )));
        }
        let a = steering_vector(geom, t.angle_deg)?;
        let ac = a.map(|z| z.conj());
        // y[n] = beta * a^c (a^H x[n - d]).
        for col in t.delay..n {
            let xs = x.column(col - t.delay);
            let proj: Complex64 = a.iter().zip(xs.iter()).map(|(ai, xi)| ai.conj() * xi).sum();
            let g = t.amplitude * proj;
            for row in 0..m {
                out[(row, col)] += g * ac[row];
            }
        }
    }
    if noise_variance > 0.0 {
        let sd = noise_variance.sqrt();
        for v in out.iter_mut() {
            *v += standard_complex(rng) * Complex64::new(sd, 0.0);
        }
    }
    Ok(out)
}

/// Matched-filter outputs `Y(d) = (1/N) sum_n r[n] x[n-d]^H` for every
/// delay hypothesis.
#[derive(Clone, Debug)]
pub struct RangeCompressed {
    bins: Vec<CMat>,
}

impl RangeCompressed {
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin(&self, d: usize) -> &CMat {
        &self.bins[d]
    }

    /// Scalar range profile toward a look direction: `||Y(d) a(theta)||^2`.
    pub fn profile(&self, geom: &ArrayGeometry, look_deg: f64) -> Result<Vec<f64>> {
        let a = steering_vector(geom, look_deg)?;
        Ok(self
            .bins
            .iter()
            .map(|y| {
                let v = y * &a;
                v.iter().map(|z| z.norm_sqr()).sum()
            })
            .collect())
    }

    /// Spatial covariance of one bin for angle scanning. The receive-side
    /// response is the conjugate steering vector, so the matched output is
    /// conjugated to scan with `a(theta)` directly.
    pub fn spatial_covariance(&self, d: usize) -> CMat {
        let y = self.bins[d].map(|z| z.conj());
        let m = y.nrows() as f64;
        &y * y.adjoint() / Complex64::new(m, 0.0)
    }
}

/// Correlate the received block against the known transmit block at every
/// delay.
pub fn range_compress(received: &CMat, x: &CMat) -> Result<RangeCompressed> {
    if received.ncols() != x.ncols() || received.nrows() != x.nrows() {
        return Err(CoreError::Dimension("range compression shapes".into()));
    }
    let n = x.ncols();
    let scale = Complex64::new(1.0 / n as f64, 0.0);
    let mut bins = Vec::with_capacity(n);
    for d in 0..n {
        let len = n - d;
        let r_slice = received.columns(d, len);
        let x_slice = x.columns(0, len);
        bins.push(&r_slice * x_slice.adjoint() * scale);
    }
    Ok(RangeCompressed { bins })
}

/// Diagonally loaded Capon spatial spectrum `1 / (a^H R^-1 a)` over a grid,
/// with loading `delta * tr(R) / M`.
pub fn capon_spectrum_with_loading(
    cov: &CMat,
    geom: &ArrayGeometry,
    grid: &[f64],
    delta: f64,
) -> Result<Vec<f64>> {
    let m = geom.num_elements();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(CoreError::Dimension("capon covariance shape".into()));
    }
    let trace: f64 = (0..m).map(|i| cov[(i, i)].re).sum();
    let load = delta * trace.max(f64::MIN_POSITIVE) / m as f64;
    let loaded = cov + CMat::identity(m, m) * Complex64::new(load, 0.0);
    let inv = loaded
        .lu()
        .try_inverse()
        .ok_or_else(|| CoreError::Domain("loaded covariance is singular".into()))?;
    grid.iter()
        .map(|&theta| {
            let a = steering_vector(geom, theta)?;
            let q: Complex64 = (a.adjoint() * &inv * &a)[(0, 0)];
            Ok(1.0 / q.re.max(f64::MIN_POSITIVE))
        })
        .collect()
}

/// Capon spectrum with the default loading `1e-3 * tr(R)/M`.
pub fn capon_spectrum(cov: &CMat, geom: &ArrayGeometry, grid: &[f64]) -> Result<Vec<f64>> {
    capon_spectrum_with_loading(cov, geom, grid, 1e-3)
}

/// Largest local maxima of a sampled spectrum, separated by at least
/// `min_sep` in grid units, strongest first.
pub fn peak_angles(spectrum: &[f64], grid: &[f64], count: usize, min_sep: f64) -> Vec<f64> {
    let mut candidates: Vec<(f64, f64)> = Vec::new(); // (value, angle)
    for i in 0..spectrum.len() {
        let left = if i > 0 { spectrum[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < spectrum.len() {
            spectrum[i + 1]
        } else {
            f64::NEG_INFINITY
        };
        if spectrum[i] >= left && spectrum[i] > right {
            candidates.push((spectrum[i], grid[i]));
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut picked: Vec<f64> = Vec::new();
    for (_, angle) in candidates {
        if picked.len() >= count {
            break;
        }
        if picked.iter().all(|p| (p - angle).abs() >= min_sep) {
            picked.push(angle);
        }
    }
    picked
}

/// Empirical per-user SINR from a received block and the known symbol
/// streams: least-squares projection onto the intended stream, residual
/// power as interference plus noise.
pub fn empirical_sinr(received: &CMat, comm: &CMat) -> Vec<f64> {
    let k = comm.nrows();
    let n = comm.ncols() as f64;
    (0..k)
        .map(|kk| {
            let r = received.row(kk);
            let c = comm.row(kk);
            let cc: f64 = c.iter().map(|z| z.norm_sqr()).sum();
            let rc: Complex64 = r.iter().zip(c.iter()).map(|(a, b)| a * b.conj()).sum();
            let coeff = rc / Complex64::new(cc, 0.0);
            let signal = coeff.norm_sqr() * cc / n;
            let mut resid = 0.0;
            for (a, b) in r.iter().zip(c.iter()) {
                resid += (a - coeff * b).norm_sqr();
            }
            signal / (resid / n).max(f64::MIN_POSITIVE)
        })
        .collect()
}

/// Empirical covariance error `||X X^H / N - R||_F`.
pub fn covariance_error(block: &WaveformBlock, r: &CMat) -> f64 {
    (block.empirical_covariance() - r).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rayleigh_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut acc = 0.0;
        let mut cross = 0.0;
        let total = 100_000;
        for _ in 0..total {
            let z = standard_complex(&mut rng);
            acc += z.norm_sqr();
            cross += z.re * z.im;
        }
        let var = acc / total as f64;
        assert!((0.98..1.02).contains(&var), "var={var}");
        assert!((cross / total as f64).abs() < 0.01);

        let h1 = rayleigh_channel(2, 4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let h2 = rayleigh_channel(2, 4, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(h1.matrix(), h2.matrix());
    }

    #[test]
    fn qpsk_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4096;
        let s = gen_qpsk(4, n, &mut rng);
        for z in s.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-12);
        }
        let mean: Complex64 = s.iter().sum::<Complex64>() / Complex64::new((4 * n) as f64, 0.0);
        assert!(mean.norm() <= 3.0 / ((4 * n) as f64).sqrt());
        let cov = &s * s.adjoint() / Complex64::new(n as f64, 0.0);
        let err = (&cov - CMat::identity(4, 4)).norm();
        assert!(err <= 5.0 * 2.0 / (n as f64).sqrt(), "err={err}");
    }

    #[test]
    fn transmit_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = 3;
        let k = 1;
        let s = gen_qpsk(m, 16, &mut rng);
        let c = gen_qpsk(k, 16, &mut rng);

        let wc = CMat::from_fn(m, k, |i, j| {
            if i == j {
                Complex64::new(0.7, 0.1)
            } else {
                Complex64::new(0.2, -0.3)
            }
        });
        let w = Precoder::new(wc.clone(), CMat::zeros(m, m)).unwrap();
        let x = transmit(&w, &s, &c).unwrap();
        assert!((&x - &wc * &c).norm() < 1e-14);

        let w = Precoder::new(CMat::zeros(m, k), CMat::identity(m, m)).unwrap();
        let x = transmit(&w, &s, &c).unwrap();
        assert!((&x - &s).norm() < 1e-14);
    }

    #[test]
    fn radar_receive_superposition() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = gen_qpsk(4, 32, &mut rng);
        let t1 = RadarTarget {
            amplitude: Complex64::new(1.0, 0.0),
            delay: 0,
            angle_deg: 10.0,
        };
        let t2 = RadarTarget {
            amplitude: Complex64::new(0.5, -0.5),
            delay: 5,
            angle_deg: -30.0,
        };
        let both = radar_receive(&geom, &[t1, t2], &x, 0.0, &mut rng).unwrap();
        let first = radar_receive(&geom, &[t1], &x, 0.0, &mut rng).unwrap();
        let second = radar_receive(&geom, &[t2], &x, 0.0, &mut rng).unwrap();
        assert!((&both - (&first + &second)).norm() < 1e-12);

        // Single target, zero delay, no noise: r[n] = a^c a^H x[n].
        let a = steering_vector(&geom, 10.0).unwrap();
        let expected = a.map(|z| z.conj()) * (a.adjoint() * &x);
        assert!((&first - &expected).norm() < 1e-12);
    }

    #[test]
    fn range_profile_peaks_at_target_delay() {
        let geom = ArrayGeometry::half_wavelength(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gen_qpsk(4, 256, &mut rng);
        let t = RadarTarget {
            amplitude: Complex64::new(1.0, 0.0),
            delay: 10,
            angle_deg: 0.0,
        };
        let rcv = radar_receive(&geom, &[t], &x, 0.0, &mut rng).unwrap();
        let rc = range_compress(&rcv, &x).unwrap();
        let prof = rc.profile(&geom, 0.0).unwrap();
        let best = prof
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 10);
    }

    #[test]
    fn capon_flat_for_white_noise() {
        let geom = ArrayGeometry::half_wavelength(6).unwrap();
        let grid: Vec<f64> = (-90..=90).map(|t| t as f64).collect();
        let cov = CMat::identity(6, 6);
        let spec = capon_spectrum(&cov, &geom, &grid).unwrap();
        let mx = spec.iter().cloned().fold(0.0_f64, f64::max);
        let mn = spec.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(mx / mn <= 1.5);
    }

    #[test]
    fn capon_single_source() {
        let geom = ArrayGeometry::half_wavelength(8).unwrap();
        let grid: Vec<f64> = (0..=1800).map(|t| -90.0 + 0.1 * t as f64).collect();
        let a = steering_vector(&geom, 0.0).unwrap();
        let cov = &a * a.adjoint() * Complex64::new(10.0, 0.0) + CMat::identity(8, 8) * Complex64::new(0.01, 0.0);
        let spec = capon_spectrum(&cov, &geom, &grid).unwrap();
        let peaks = peak_angles(&spec, &grid, 1, 5.0);
        assert!((peaks[0] - 0.0).abs() <= 0.5, "peak at {}", peaks[0]);
    }
}
