//! Uniform linear array geometry, steering vectors, transmit beam pattern
//! and cross-correlation pattern evaluation, ideal-pattern synthesis and
//! angle grids.
//!
//! Angles are degrees at every API boundary and radians internally. The
//! steering phase convention is `a_m(theta) = exp(+j 2 pi d m sin theta)`
//! with element index `m` starting at 0 and `d` the element spacing in
//! carrier wavelengths; beam patterns are invariant to this choice.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::cov::HermitianCov;
use crate::error::{CoreError, Result};

#[derive(Clone, Copy, Debug)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_elements: usize, spacing: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(CoreError::Domain("array needs at least one element".into()));
        }
        if !(spacing > 0.0) {
            return Err(CoreError::Domain(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(ArrayGeometry {
            num_elements,
            spacing,
        })
    }

    /// Half-wavelength spaced array.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        ArrayGeometry::new(num_elements, 0.5)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Desired multi-beam pattern specification and evaluation grid.
#[derive(Clone, Debug)]
pub struct BeamSpec {
    pub target_directions: Vec<f64>,
    pub beam_width: f64,
    pub grid: Vec<f64>,
    pub cross_weight: f64,
}

impl BeamSpec {
    pub fn new(
        target_directions: Vec<f64>,
        beam_width: f64,
        grid: Vec<f64>,
        cross_weight: f64,
    ) -> Result<Self> {
        if target_directions.is_empty() {
            return Err(CoreError::Domain("at least one target direction".into()));
        }
        if !(beam_width > 0.0) {
            return Err(CoreError::Domain("beam width must be positive".into()));
        }
        if cross_weight < 0.0 {
            return Err(CoreError::Domain("cross weight must be nonnegative".into()));
        }
        for &t in target_directions.iter().chain(grid.iter()) {
            check_angle(t)?;
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Domain("grid must be strictly increasing".into()));
        }
        if grid.is_empty() {
            return Err(CoreError::Domain("grid must be nonempty".into()));
        }
        Ok(BeamSpec {
            target_directions,
            beam_width,
            grid,
            cross_weight,
        })
    }

    pub fn num_targets(&self) -> usize {
        self.target_directions.len()
    }
}

fn check_angle(theta_deg: f64) -> Result<()> {
    if !(theta_deg >= -90.0 && theta_deg <= 90.0) {
        return Err(CoreError::Domain(format!(
            "angle {theta_deg} outside [-90, 90] degrees"
        )));
    }
    Ok(())
}

/// Steering vector of the array toward `theta_deg`.
pub fn steering_vector(geom: &ArrayGeometry, theta_deg: f64) -> Result<DVector<Complex64>> {
    check_angle(theta_deg)?;
    let s = theta_deg.to_radians().sin();
    let phase = 2.0 * std::f64::consts::PI * geom.spacing * s;
    Ok(DVector::from_fn(geom.num_elements, |m, _| {
        Complex64::from_polar(1.0, phase * m as f64)
    }))
}

/// Transmit power radiated toward `theta_deg`: `a^H R a`.
pub fn beam_pattern(geom: &ArrayGeometry, cov: &HermitianCov, theta_deg: f64) -> Result<f64> {
    let a = steering_vector(geom, theta_deg)?;
    let v = quad_form(cov.matrix(), &a);
    debug_assert!(v.im.abs() <= 1e-10 * v.re.abs() + 1e-12);
    Ok(v.re)
}

/// Cross correlation of the signals radiated toward two directions:
/// `a(theta2)^H R a(theta1)`.
pub fn cross_correlation(
    geom: &ArrayGeometry,
    cov: &HermitianCov,
    theta1_deg: f64,
    theta2_deg: f64,
) -> Result<Complex64> {
    let a1 = steering_vector(geom, theta1_deg)?;
    let a2 = steering_vector(geom, theta2_deg)?;
    Ok(bilinear_form(cov.matrix(), &a2, &a1))
}

/// Ideal beam pattern: 1 on each `[target - width/2, target + width/2]`
/// interval (boundaries inclusive), 0 elsewhere.
pub fn desired_pattern(spec: &BeamSpec, theta_deg: f64) -> f64 {
    let half = spec.beam_width / 2.0;
    for &t in &spec.target_directions {
        if theta_deg >= t - half && theta_deg <= t + half {
            return 1.0;
        }
    }
    0.0
}

/// Uniform angle grid starting at `lo` with the given resolution; the last
/// point does not exceed `hi`.
pub fn angle_grid(lo: f64, hi: f64, resolution: f64) -> Result<Vec<f64>> {
    if !(resolution > 0.0) {
        return Err(CoreError::Domain("resolution must be positive".into()));
    }
    if lo >= hi {
        return Err(CoreError::Domain("lo must be below hi".into()));
    }
    let count = (((hi - lo) / resolution) * (1.0 + 1e-12)).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * resolution).collect())
}

pub(crate) fn quad_form(r: &DMatrix<Complex64>, a: &DVector<Complex64>) -> Complex64 {
    bilinear_form(r, a, a)
}

/// `left^H R right`.
pub(crate) fn bilinear_form(
    r: &DMatrix<Complex64>,
    left: &DVector<Complex64>,
    right: &DVector<Complex64>,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..r.nrows() {
        let li = left[i].conj();
        for j in 0..r.ncols() {
            acc += li * r[(i, j)] * right[j];
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_psd(m: usize, rng: &mut ChaCha8Rng) -> HermitianCov {
        let a = DMatrix::from_fn(m, m, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        HermitianCov::new(&a * a.adjoint()).unwrap()
    }

    #[test]
    fn steering_basics() {
        let g = ArrayGeometry::half_wavelength(10).unwrap();
        let a = steering_vector(&g, 0.0).unwrap();
        for m in 0..10 {
            assert!((a[m] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }

        let g2 = ArrayGeometry::half_wavelength(2).unwrap();
        let a = steering_vector(&g2, 30.0).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((a[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);

        // Odd symmetry of sine: a(-t) is the conjugate of a(t).
        let g4 = ArrayGeometry::half_wavelength(4).unwrap();
        let ap = steering_vector(&g4, 37.0).unwrap();
        let an = steering_vector(&g4, -37.0).unwrap();
        for m in 0..4 {
            assert!((an[m] - ap[m].conj()).norm() < 1e-12);
        }

        assert!(steering_vector(&g, 90.5).is_err());
    }

    #[test]
    fn unit_modulus_property() {
        let g = ArrayGeometry::new(16, 0.37).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t = rng.gen_range(-90.0..90.0);
            let a = steering_vector(&g, t).unwrap();
            for m in 0..16 {
                assert!((a[m].norm() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn beam_pattern_uniform_covariance() {
        let m = 10;
        let pt = 3.0;
        let g = ArrayGeometry::half_wavelength(m).unwrap();
        let r = HermitianCov::new(DMatrix::identity(m, m).map(|x: f64| Complex64::new(x * pt / m as f64, 0.0)))
            .unwrap();
        for t in [-60.0, 0.0, 33.3] {
            assert!((beam_pattern(&g, &r, t).unwrap() - pt).abs() < 1e-10);
        }
    }

    #[test]
    fn beam_pattern_rank_one_peak() {
        let m = 10;
        let pt = 1.0;
        let g = ArrayGeometry::half_wavelength(m).unwrap();
        let theta0 = 25.0;
        let a = steering_vector(&g, theta0).unwrap();
        let r = HermitianCov::new(&a * a.adjoint() * Complex64::new(pt / m as f64, 0.0)).unwrap();
        let v = beam_pattern(&g, &r, theta0).unwrap();
        assert!((v - pt * m as f64).abs() < 1e-9);
    }

    #[test]
    fn beam_pattern_matches_triple_sum_oracle() {
        let g = ArrayGeometry::half_wavelength(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let r = random_psd(3, &mut rng);
        let theta = 17.0;
        let a = steering_vector(&g, theta).unwrap();
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                oracle += a[i].conj() * r.matrix()[(i, j)] * a[j];
            }
        }
        let v = beam_pattern(&g, &r, theta).unwrap();
        assert!((v - oracle.re).abs() < 1e-12 * (1.0 + oracle.re.abs()));
        assert!(v >= -1e-10);
    }

    #[test]
    fn cross_correlation_properties() {
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let r = random_psd(4, &mut rng);
            let t1 = rng.gen_range(-90.0..90.0);
            let t2 = rng.gen_range(-90.0..90.0);
            let c12 = cross_correlation(&g, &r, t1, t2).unwrap();
            let c21 = cross_correlation(&g, &r, t2, t1).unwrap();
            assert!((c12 - c21.conj()).norm() < 1e-10 * (1.0 + c12.norm()));
            let same = cross_correlation(&g, &r, t1, t1).unwrap();
            let bp = beam_pattern(&g, &r, t1).unwrap();
            assert!((same.re - bp).abs() < 1e-10 * (1.0 + bp.abs()));
        }

        // M=2 identity covariance: a(30)^H a(0) = 1 - j.
        let g2 = ArrayGeometry::half_wavelength(2).unwrap();
        let id = HermitianCov::new(DMatrix::identity(2, 2).map(|x: f64| Complex64::new(x, 0.0))).unwrap();
        let c = cross_correlation(&g2, &id, 0.0, 30.0).unwrap();
        assert!((c - Complex64::new(1.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn desired_pattern_paper_layout() {
        let grid = angle_grid(-90.0, 90.0, 0.1).unwrap();
        let spec = BeamSpec::new(vec![-40.0, 0.0, 40.0], 10.0, grid.clone(), 1.0).unwrap();
        assert_eq!(desired_pattern(&spec, 0.0), 1.0);
        assert_eq!(desired_pattern(&spec, 45.0), 1.0); // inclusive boundary
        assert_eq!(desired_pattern(&spec, 20.0), 0.0);

        // Summing d over the grid approximates P * width per beam.
        let total: f64 = grid.iter().map(|&t| desired_pattern(&spec, t) * 0.1).sum();
        assert!((total - 3.0 * 10.0).abs() <= 3.0 * 0.1 + 1e-9);
    }

    #[test]
    fn angle_grid_counts() {
        assert_eq!(angle_grid(-90.0, 90.0, 0.1).unwrap().len(), 1801);
        let g = angle_grid(0.0, 1.0, 0.5).unwrap();
        assert_eq!(g, vec![0.0, 0.5, 1.0]);
        let g = angle_grid(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g[3] - 0.9).abs() < 1e-12);
        assert!(angle_grid(0.0, 1.0, 0.0).is_err());
    }
}
