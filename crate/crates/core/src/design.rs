//! Joint transmit beamformer designs: the radar-only covariance problem,
//! the SDR design with rank-one extraction and Cholesky completion, and the
//! zero-forcing design with its QR/Cholesky precoder construction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use dfrc_conic::svec::herm_diag;
use dfrc_conic::{
    ConicProblem, ConicSolution, PsdBlock, QuadraticFactor, ResidualReport, SolveStatus,
    SolverConfig, SolverMethod,
};

use crate::cov::HermitianCov;
use crate::error::{CoreError, Result};
use crate::linalg::{cholesky_psd, row_qr};
use crate::metrics::sinr_closed_form;
use crate::objective::{eval_loss, svec, RadarObjective};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

/// SINR requirement: one threshold broadcast to every user, or per-user
/// values. Linear scale; zero means unconstrained.
#[derive(Clone, Debug)]
pub enum SinrThresholds {
    Uniform(f64),
    PerUser(Vec<f64>),
}

impl SinrThresholds {
    pub fn resolve(&self, num_users: usize) -> Result<Vec<f64>> {
        let v = match self {
            SinrThresholds::Uniform(g) => vec![*g; num_users],
            SinrThresholds::PerUser(v) => {
                if v.len() != num_users {
                    return Err(CoreError::Dimension(format!(
                        "{} thresholds for {} users",
                        v.len(),
                        num_users
                    )));
                }
                v.clone()
            }
        };
        if v.iter().any(|g| !(*g >= 0.0)) {
            return Err(CoreError::Domain("SINR thresholds must be >= 0".into()));
        }
        Ok(v)
    }
}

/// Power budget, receiver noise and communication quality target.
#[derive(Clone, Debug)]
pub struct DesignConfig {
    pub total_power: f64,
    pub noise_power: f64,
    pub thresholds: SinrThresholds,
    /// Opt-in: a user whose relaxed covariance carries no power toward its
    /// channel gets a zero precoding column instead of an error. Only
    /// possible when that user's threshold is zero.
    pub allow_zero_power_users: bool,
}

impl DesignConfig {
    pub fn new(total_power: f64, noise_power: f64, thresholds: SinrThresholds) -> Result<Self> {
        if !(total_power > 0.0) {
            return Err(CoreError::Domain("total power must be positive".into()));
        }
        if !(noise_power > 0.0) {
            return Err(CoreError::Domain("noise power must be positive".into()));
        }
        Ok(DesignConfig {
            total_power,
            noise_power,
            thresholds,
            allow_zero_power_users: false,
        })
    }
}

/// Downlink channel: `K x M` with rows `h_k^H`, `K < M`.
#[derive(Clone, Debug)]
pub struct Channel {
    mat: CMat,
}

impl Channel {
    pub fn new(mat: CMat) -> Result<Self> {
        let (k, m) = (mat.nrows(), mat.ncols());
        if k == 0 {
            return Err(CoreError::Dimension("channel needs at least one user".into()));
        }
        if k >= m {
            return Err(CoreError::Dimension(format!(
                "channel assumes fewer users than antennas (K={k}, M={m})"
            )));
        }
        Ok(Channel { mat })
    }

    pub fn num_users(&self) -> usize {
        self.mat.nrows()
    }

    pub fn num_antennas(&self) -> usize {
        self.mat.ncols()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// `h_k` as a column vector (row `k` of the matrix is `h_k^H`).
    pub fn user_vector(&self, k: usize) -> CVec {
        self.mat.row(k).adjoint()
    }
}

/// The precoder pair `(W_c: M x K, W_r: M x M)`.
#[derive(Clone, Debug)]
pub struct Precoder {
    wc: CMat,
    wr: CMat,
}

impl Precoder {
    pub fn new(wc: CMat, wr: CMat) -> Result<Self> {
        if wr.nrows() != wr.ncols() || wc.nrows() != wr.nrows() {
            return Err(CoreError::Dimension(format!(
                "precoder shapes W_c {}x{}, W_r {}x{}",
                wc.nrows(),
                wc.ncols(),
                wr.nrows(),
                wr.ncols()
            )));
        }
        Ok(Precoder { wc, wr })
    }

    pub fn comm(&self) -> &CMat {
        &self.wc
    }

    pub fn radar(&self) -> &CMat {
        &self.wr
    }

    pub fn num_antennas(&self) -> usize {
        self.wr.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.wc.ncols()
    }

    /// Stacked `W = [W_c, W_r]`, `M x (K+M)`.
    pub fn stacked(&self) -> CMat {
        let m = self.num_antennas();
        let k = self.num_users();
        let mut w = CMat::zeros(m, k + m);
        w.view_mut((0, 0), (m, k)).copy_from(&self.wc);
        w.view_mut((0, k), (m, m)).copy_from(&self.wr);
        w
    }

    pub fn from_stacked(w: &CMat, num_users: usize) -> Result<Self> {
        let m = w.nrows();
        if w.ncols() != num_users + m {
            return Err(CoreError::Dimension(format!(
                "stacked precoder must be M x (K+M), got {}x{} for K={num_users}",
                w.nrows(),
                w.ncols()
            )));
        }
        Ok(Precoder {
            wc: w.view((0, 0), (m, num_users)).into_owned(),
            wr: w.view((0, num_users), (m, m)).into_owned(),
        })
    }

    /// `W W^H`.
    pub fn covariance(&self) -> CMat {
        &self.wc * self.wc.adjoint() + &self.wr * self.wr.adjoint()
    }

    /// Squared norm of antenna row `m`.
    pub fn row_power(&self, m: usize) -> f64 {
        self.wc.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self.wr.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignStatus {
    Feasible,
    Infeasible,
    SolverFailure,
}

#[derive(Clone, Copy, Debug)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub residuals: ResidualReport,
}

impl SolverDiagnostics {
    fn from_solution(s: &ConicSolution) -> Self {
        SolverDiagnostics {
            status: s.status,
            iterations: s.iterations,
            residuals: s.residuals,
        }
    }
}

/// A solved design with its certificates.
#[derive(Clone, Debug)]
pub struct FeasibleDesign {
    pub covariance: HermitianCov,
    pub precoder: Precoder,
    pub alpha: f64,
    pub loss: f64,
    /// Closed-form per-user SINR of the built precoder.
    pub sinr: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DesignOutcome {
    pub status: DesignStatus,
    pub feasible: Option<FeasibleDesign>,
    pub diagnostics: SolverDiagnostics,
}

/// Result of a conic solve that distinguishes certified infeasibility from
/// numerical failure.
#[derive(Clone, Debug)]
pub enum SolveOutcome<T> {
    Solved(T),
    Infeasible(SolverDiagnostics),
    Failed(SolverDiagnostics),
}

/// Internal guard band on SINR thresholds: constraints are enforced at
/// `Gamma (1 + GUARD)` so the built precoder meets the requested threshold
/// despite finite solver accuracy. Small enough to leave every reported
/// metric within its tolerance.
const SINR_GUARD: f64 = 5e-4;

/// Accept a solve for design purposes: converged to the configured
/// tolerance, or a stalled best iterate that still meets a relaxed
/// accuracy bar. Tight instances near the feasibility boundary can freeze
/// an order of magnitude short of the target; their iterates are still
/// far more accurate than any downstream tolerance requires.
fn solve_usable(sol: &ConicSolution) -> bool {
    match sol.status {
        SolveStatus::Optimal => true,
        SolveStatus::MaxIterations | SolveStatus::NumericalFailure => {
            let r = &sol.residuals;
            r.primal <= 5e-5 && r.dual <= 5e-5 && (r.gap <= 5e-5 || r.rel_gap <= 5e-5)
        }
        _ => false,
    }
}

fn design_solver_config() -> SolverConfig {
    SolverConfig {
        abs_tol: 5e-6,
        rel_tol: 5e-6,
        max_iters_ipm: 200,
        max_iters_admm: 50_000,
        infeas_tol: 1e-6,
        method: SolverMethod::InteriorPoint,
    }
}

/// Accept a solver-produced covariance: symmetrize and verify PSD against a
/// tolerance consistent with the solve accuracy.
fn cov_from_solver(mat: CMat) -> Result<HermitianCov> {
    let sym = (&mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym.clone());
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let min_ev = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min_ev < -3e-6 * max_ev.max(1e-300) {
        return Err(CoreError::NotPsd { min_eig: min_ev });
    }
    Ok(HermitianCov::new(sym).unwrap_or_else(|_| {
        // Within solver tolerance but past the strict constructor bound:
        // clip the offending eigenvalues.
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let d = CMat::from_fn(vals.len(), vals.len(), |i, j| {
            if i == j {
                Complex64::new(vals[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rec = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
        HermitianCov::new(rec).expect("clipped matrix is PSD")
    }))
}

/// Expand an objective factor over `[svec(R); alpha]` to a wider variable
/// vector, given the offset of `alpha`.
fn expand_factor(obj: &RadarObjective, n: usize, alpha_col: usize) -> QuadraticFactor {
    let hl = obj.dim() - 1;
    let src = &obj.factor().rows;
    let mut rows = DMatrix::zeros(src.nrows(), n);
    for r in 0..src.nrows() {
        for c in 0..hl {
            rows[(r, c)] = src[(r, c)];
        }
        rows[(r, alpha_col)] = src[(r, hl)];
    }
    QuadraticFactor { rows }
}

fn sparse_from_herm(offset: usize, coeffs: &[f64], scale: f64) -> Vec<(usize, f64)> {
    coeffs
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (offset + i, v * scale))
        .collect()
}

/// Radar-only covariance design: minimize the loss subject to the PSD and
/// per-antenna power constraints.
#[derive(Clone, Debug)]
pub struct RadarOnlyDesign {
    pub covariance: HermitianCov,
    pub alpha: f64,
    pub loss: f64,
    pub diagnostics: SolverDiagnostics,
}

pub fn radar_only(obj: &RadarObjective, cfg: &DesignConfig) -> Result<RadarOnlyDesign> {
    let m = obj.matrix_dim();
    let hl = m * m;
    let n = hl + 1;
    let mut p = ConicProblem::new(n);
    p.set_quadratic_factor(expand_factor(obj, n, hl), &vec![0.0; n], 0.0)?;
    for i in 0..m {
        p.add_equality(&[(herm_diag(i), 1.0)], cfg.total_power / m as f64)?;
    }
    let mut blk = PsdBlock::new(m);
    for r in 0..hl {
        blk.push(r, r, 1.0);
    }
    p.add_psd_block(blk)?;
    let sol = p.solve(&design_solver_config())?;
    let diag = SolverDiagnostics::from_solution(&sol);
    if !solve_usable(&sol) {
        return Err(CoreError::SolverFailure {
            status: sol.status,
            iterations: sol.iterations,
        });
    }
    let cov = cov_from_solver(crate::objective::smat(&sol.primal[..hl], m))?;
    let alpha = sol.primal[hl];
    let loss = eval_loss(obj, &cov, alpha)?;
    Ok(RadarOnlyDesign {
        covariance: cov,
        alpha,
        loss,
        diagnostics: diag,
    })
}

/// Solution of the relaxed SDR problem.
#[derive(Clone, Debug)]
pub struct SdrRelaxed {
    pub covariance: HermitianCov,
    pub user_covariances: Vec<HermitianCov>,
    pub alpha: f64,
    pub loss: f64,
}

/// Solve the semidefinite relaxation: minimize the loss over `R`, per-user
/// `R_k` and `alpha` subject to the per-antenna power, the split
/// `R - sum R_k` PSD, and the linearized SINR constraints
/// `(1 + 1/Gamma_k) h_k^H R_k h_k >= h_k^H R h_k + sigma^2`.
pub fn sdr_solve(
    obj: &RadarObjective,
    cfg: &DesignConfig,
    channel: &Channel,
) -> Result<SolveOutcome<SdrRelaxed>> {
    let m = obj.matrix_dim();
    if channel.num_antennas() != m {
        return Err(CoreError::Dimension(format!(
            "channel has {} antennas, objective {}",
            channel.num_antennas(),
            m
        )));
    }
    let k = channel.num_users();
    let gammas = cfg.thresholds.resolve(k)?;
    let hl = m * m;
    let alpha_col = hl * (k + 1);
    let n = alpha_col + 1;

    let mut p = ConicProblem::new(n);
    // A vanishing trace penalty on the user covariances removes the flat
    // optimal face that appears when SINR constraints are slack (any split
    // of the user power is then optimal); the minimum-power split is
    // selected instead. The loss perturbation is O(1e-7 P_t^2).
    let mut lin = vec![0.0; n];
    for kk in 0..k {
        for i in 0..m {
            lin[hl * (1 + kk) + herm_diag(i)] = 1e-7 * cfg.total_power;
        }
    }
    p.set_quadratic_factor(expand_factor(obj, n, alpha_col), &lin, 0.0)?;
    for i in 0..m {
        p.add_equality(&[(herm_diag(i), 1.0)], cfg.total_power / m as f64)?;
    }
    for (kk, gamma) in gammas.iter().enumerate() {
        if *gamma <= 0.0 {
            continue;
        }
        let guarded = gamma * (1.0 + SINR_GUARD);
        let h = channel.user_vector(kk);
        let quad = svec(&(&h * h.adjoint()))?;
        let mut row = sparse_from_herm(0, &quad, 1.0);
        row.extend(sparse_from_herm(hl * (1 + kk), &quad, -(1.0 + 1.0 / guarded)));
        p.add_inequality(&row, -cfg.noise_power)?;
    }
    // R_k PSD.
    for kk in 0..k {
        let mut blk = PsdBlock::new(m);
        for r in 0..hl {
            blk.push(r, hl * (1 + kk) + r, 1.0);
        }
        p.add_psd_block(blk)?;
    }
    // R - sum R_k PSD (implies R PSD when K >= 1).
    let mut blk = PsdBlock::new(m);
    for r in 0..hl {
        blk.push(r, r, 1.0);
        for kk in 0..k {
            blk.push(r, hl * (1 + kk) + r, -1.0);
        }
    }
    p.add_psd_block(blk)?;

    let sol = p.solve(&design_solver_config())?;
    let diag = SolverDiagnostics::from_solution(&sol);
    if !solve_usable(&sol) {
        if sol.status == SolveStatus::Infeasible {
            return Ok(SolveOutcome::Infeasible(diag));
        }
        return Ok(SolveOutcome::Failed(diag));
    }
    let cov = cov_from_solver(crate::objective::smat(&sol.primal[..hl], m))?;
    let mut user_covs = Vec::with_capacity(k);
    for kk in 0..k {
        let lo = hl * (1 + kk);
        user_covs.push(cov_from_solver(crate::objective::smat(
            &sol.primal[lo..lo + hl],
            m,
        ))?);
    }
    let alpha = sol.primal[alpha_col];
    let loss = eval_loss(obj, &cov, alpha)?;
    Ok(SolveOutcome::Solved(SdrRelaxed {
        covariance: cov,
        user_covariances: user_covs,
        alpha,
        loss,
    }))
}

/// Rank-one extraction: `w_k = (h^H R_k h)^{-1/2} R_k h`. The extracted
/// rank-one matrix preserves the received power exactly, and
/// `R_k - w w^H` stays PSD by Cauchy-Schwarz.
pub fn rank_one_extract(rk: &HermitianCov, h: &CVec) -> Result<CVec> {
    if rk.dim() != h.len() {
        return Err(CoreError::Dimension("extraction dims".into()));
    }
    let rh = rk.matrix() * h;
    let power = h
        .iter()
        .zip(rh.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>();
    let floor = 1e-12 * rk.frobenius() * h.norm_squared();
    if power <= floor {
        return Err(CoreError::DegenerateExtraction { user: 0, power });
    }
    Ok(rh / Complex64::new(power.sqrt(), 0.0))
}

/// Complete the radar precoder: lower-triangular `W_r` with
/// `W_r W_r^H = R - sum_k w_k w_k^H`.
///
/// Eigenvalues of the residual below `1e-9 lambda_max` (solver roundoff)
/// are clipped to zero before factorization. A genuinely indefinite
/// residual means the relaxation did not extract cleanly and is an error;
/// the trigger scale is the covariance itself, since a real violation is
/// of the order of a user's received power.
pub fn radar_precoder_completion(r: &HermitianCov, user_cols: &[CVec]) -> Result<CMat> {
    let m = r.dim();
    let mut delta = r.matrix().clone();
    for w in user_cols {
        if w.len() != m {
            return Err(CoreError::Dimension("completion column length".into()));
        }
        delta -= w * w.adjoint();
    }
    let delta = (&delta + delta.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(delta.clone());
    let min_ev = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let scale = r.eigenvalues()[0].max(1e-300);
    if min_ev < -1e-4 * scale {
        return Err(CoreError::TightnessViolation { min_eig: min_ev });
    }
    Ok(cholesky_psd(&delta, 1e-9))
}

/// The full SDR design: relaxed solve, rank-one extraction, Cholesky
/// completion, and closed-form SINR verification.
pub fn sdr_beamform(
    obj: &RadarObjective,
    cfg: &DesignConfig,
    channel: &Channel,
) -> Result<DesignOutcome> {
    let relaxed = match sdr_solve(obj, cfg, channel)? {
        SolveOutcome::Solved(r) => r,
        SolveOutcome::Infeasible(diag) => {
            return Ok(DesignOutcome {
                status: DesignStatus::Infeasible,
                feasible: None,
                diagnostics: diag,
            })
        }
        SolveOutcome::Failed(diag) => {
            return Ok(DesignOutcome {
                status: DesignStatus::SolverFailure,
                feasible: None,
                diagnostics: diag,
            })
        }
    };
    let diag = SolverDiagnostics {
        status: SolveStatus::Optimal,
        iterations: 0,
        residuals: ResidualReport::default(),
    };
    let gammas = cfg.thresholds.resolve(channel.num_users())?;
    let m = obj.matrix_dim();
    let k = channel.num_users();
    let mut cols: Vec<CVec> = Vec::with_capacity(k);
    for kk in 0..k {
        let h = channel.user_vector(kk);
        match rank_one_extract(&relaxed.user_covariances[kk], &h) {
            Ok(w) => cols.push(w),
            Err(CoreError::DegenerateExtraction { power, .. }) => {
                if cfg.allow_zero_power_users && gammas[kk] == 0.0 {
                    cols.push(CVec::zeros(m));
                } else {
                    return Err(CoreError::DegenerateExtraction { user: kk, power });
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mut wr = radar_precoder_completion(&relaxed.covariance, &cols)?;
    let mut wc = CMat::zeros(m, k);
    for (kk, w) in cols.iter().enumerate() {
        wc.column_mut(kk).copy_from(w);
    }
    // The clipped completion leaves the antenna powers off by the solver
    // roundoff; rescaling the radar rows restores them exactly while
    // leaving the communication columns (and their extraction identities)
    // untouched.
    let per_antenna = cfg.total_power / m as f64;
    for j in 0..m {
        let comm_p: f64 = wc.row(j).iter().map(|z| z.norm_sqr()).sum();
        let radar_p: f64 = wr.row(j).iter().map(|z| z.norm_sqr()).sum();
        if radar_p > 0.0 {
            let want = (per_antenna - comm_p).max(0.0);
            let scale = (want / radar_p).sqrt();
            for v in wr.row_mut(j).iter_mut() {
                *v *= Complex64::new(scale, 0.0);
            }
        }
    }
    let precoder = Precoder::new(wc, wr)?;
    let sinr = sinr_closed_form(channel, &precoder, cfg.noise_power);
    // Report the covariance the precoder actually radiates: W W^H equals
    // the relaxed covariance up to the clipped solver roundoff, and its
    // completion residual is PSD by construction.
    let covariance = cov_from_solver(precoder.covariance())?;
    let loss = eval_loss(obj, &covariance, relaxed.alpha)?;
    Ok(DesignOutcome {
        status: DesignStatus::Feasible,
        feasible: Some(FeasibleDesign {
            covariance,
            precoder,
            alpha: relaxed.alpha,
            loss,
            sinr,
        }),
        diagnostics: SolverDiagnostics { ..diag },
    })
}

/// Solution of the zero-forcing covariance problem.
#[derive(Clone, Debug)]
pub struct ZfSolution {
    pub covariance: HermitianCov,
    pub powers: Vec<f64>,
    pub alpha: f64,
    pub loss: f64,
}

/// Solve the ZF covariance problem: minimize the loss subject to the
/// per-antenna power, `H R H^H = diag(p)` and `p_k >= Gamma_k sigma^2`.
pub fn zf_solve(
    obj: &RadarObjective,
    cfg: &DesignConfig,
    channel: &Channel,
) -> Result<SolveOutcome<ZfSolution>> {
    let gammas = cfg.thresholds.resolve(channel.num_users())?;
    // Below the plateau the SINR constraints are slack at the
    // unconstrained optimum, which is then optimal for the constrained
    // problem as well (the feasible sets are nested). Solving the
    // unconstrained problem first and reusing its solution makes the
    // plateau exact instead of subject to solver wobble on a flat face.
    if gammas.iter().any(|g| *g > 0.0) {
        let zero_cfg = DesignConfig {
            thresholds: SinrThresholds::Uniform(0.0),
            ..cfg.clone()
        };
        if let SolveOutcome::Solved(base) = zf_solve_direct(obj, &zero_cfg, channel, &vec![0.0; channel.num_users()])? {
            let covered = base
                .powers
                .iter()
                .zip(&gammas)
                .all(|(p, g)| *p >= g * cfg.noise_power * (1.0 - 1e-9));
            if covered {
                return Ok(SolveOutcome::Solved(base));
            }
        }
    }
    zf_solve_direct(obj, cfg, channel, &gammas)
}

fn zf_solve_direct(
    obj: &RadarObjective,
    cfg: &DesignConfig,
    channel: &Channel,
    gammas: &[f64],
) -> Result<SolveOutcome<ZfSolution>> {
    let m = obj.matrix_dim();
    if channel.num_antennas() != m {
        return Err(CoreError::Dimension(format!(
            "channel has {} antennas, objective {}",
            channel.num_antennas(),
            m
        )));
    }
    let k = channel.num_users();
    let hl = m * m;
    let p_col = hl;
    let alpha_col = hl + k;
    let n = alpha_col + 1;

    let mut p = ConicProblem::new(n);
    p.set_quadratic_factor(expand_factor(obj, n, alpha_col), &vec![0.0; n], 0.0)?;
    for i in 0..m {
        p.add_equality(&[(herm_diag(i), 1.0)], cfg.total_power / m as f64)?;
    }
    // Diagonal entries of H R H^H are the user powers.
    for kk in 0..k {
        let h = channel.user_vector(kk);
        let quad = svec(&(&h * h.adjoint()))?;
        let mut row = sparse_from_herm(0, &quad, 1.0);
        row.push((p_col + kk, -1.0));
        p.add_equality(&row, 0.0)?;
    }
    // Off-diagonal entries vanish: real and imaginary parts separately.
    for i in 0..k {
        for j in (i + 1)..k {
            let hi = channel.user_vector(i);
            let hj = channel.user_vector(j);
            let b = &hj * hi.adjoint();
            let re_part = (&b + b.adjoint()) * Complex64::new(0.5, 0.0);
            let im_part = (&b - b.adjoint()) * Complex64::new(0.0, -0.5);
            for part in [re_part, im_part] {
                let row = sparse_from_herm(0, &svec(&part)?, 1.0);
                p.add_equality(&row, 0.0)?;
            }
        }
    }
    for (kk, gamma) in gammas.iter().enumerate() {
        let guarded = gamma * (1.0 + SINR_GUARD);
        p.add_inequality(&[(p_col + kk, -1.0)], -guarded * cfg.noise_power)?;
    }
    let mut blk = PsdBlock::new(m);
    for r in 0..hl {
        blk.push(r, r, 1.0);
    }
    p.add_psd_block(blk)?;

    let sol = p.solve(&design_solver_config())?;
    let diag = SolverDiagnostics::from_solution(&sol);
    if !solve_usable(&sol) {
        if sol.status == SolveStatus::Infeasible {
            return Ok(SolveOutcome::Infeasible(diag));
        }
        return Ok(SolveOutcome::Failed(diag));
    }
    let raw = cov_from_solver(crate::objective::smat(&sol.primal[..hl], m))?;
    let polished = polish_zf_covariance(raw.matrix(), channel, cfg.total_power / m as f64)?;
    let cov = cov_from_solver(polished)?;
    // User powers re-read from the polished covariance.
    let powers: Vec<f64> = (0..k)
        .map(|kk| {
            let h = channel.user_vector(kk);
            (h.adjoint() * cov.matrix() * &h)[(0, 0)].re
        })
        .collect();
    let alpha = sol.primal[alpha_col];
    let loss = eval_loss(obj, &cov, alpha)?;
    Ok(SolveOutcome::Solved(ZfSolution {
        covariance: cov,
        powers,
        alpha,
        loss,
    }))
}

/// Project a near-feasible ZF covariance onto the exact constraint set
/// (unit per-antenna power, diagonal user-side Gram, PSD) by alternating
/// projections. The solver satisfies these only to its tolerance; after
/// the projection the factorization theorem applies to machine precision,
/// so the built precoder nulls interference exactly.
fn polish_zf_covariance(r: &CMat, channel: &Channel, per_antenna: f64) -> Result<CMat> {
    let m = channel.num_antennas();
    let k = channel.num_users();
    let hl = m * m;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; hl];
        row[herm_diag(i)] = 1.0;
        rows.push(row);
        rhs.push(per_antenna);
    }
    for i in 0..k {
        for j in (i + 1)..k {
            let hi = channel.user_vector(i);
            let hj = channel.user_vector(j);
            let b = &hj * hi.adjoint();
            let re_part = (&b + b.adjoint()) * Complex64::new(0.5, 0.0);
            let im_part = (&b - b.adjoint()) * Complex64::new(0.0, -0.5);
            for part in [re_part, im_part] {
                rows.push(svec(&part)?);
                rhs.push(0.0);
            }
        }
    }
    let nc = rows.len();
    let cmat = DMatrix::from_fn(nc, hl, |i, j| rows[i][j]);
    let rhs = DVector::from_vec(rhs);
    let gram = &cmat * cmat.transpose();
    let chol = match gram.cholesky() {
        Some(c) => c,
        None => return Ok(r.clone()), // dependent constraints; keep the input
    };

    let mut x = DVector::from_vec(svec(r)?);
    for _ in 0..300 {
        // Affine projection.
        let viol = &cmat * &x - &rhs;
        let w = chol.solve(&viol);
        x -= cmat.transpose() * w;
        // PSD projection.
        let mat = crate::objective::smat(x.as_slice(), m);
        let eig = SymmetricEigen::new(mat);
        let minev = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if minev >= -1e-13 {
            break;
        }
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let d = CMat::from_fn(m, m, |i, j| {
            if i == j {
                Complex64::new(vals[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let rec = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
        x = DVector::from_vec(svec(&rec)?);
    }
    // End on the affine projection so the power and Gram constraints hold
    // exactly; the PSD violation left behind is at roundoff level.
    let viol = &cmat * &x - &rhs;
    let w = chol.solve(&viol);
    x -= cmat.transpose() * w;
    Ok(crate::objective::smat(x.as_slice(), m))
}

/// Construct `W` with `W W^H = R` and `H W = F` from a covariance whose
/// user-side Gram matrix matches `F F^H` (the constructive direction of
/// the ZF factorization theorem).
pub fn zf_construct_precoder(r: &HermitianCov, f: &CMat, channel: &Channel) -> Result<CMat> {
    let m = channel.num_antennas();
    let k = channel.num_users();
    if r.dim() != m || f.nrows() != k || f.ncols() != k + m {
        return Err(CoreError::Dimension(format!(
            "construction shapes: R {}x{}, F {}x{}",
            r.dim(),
            r.dim(),
            f.nrows(),
            f.ncols()
        )));
    }
    let gram = channel.matrix() * r.matrix() * channel.matrix().adjoint();
    let fgram = f * f.adjoint();
    let dev = (&gram - &fgram).norm();
    if dev > 1e-8 * fgram.norm().max(1e-300) {
        return Err(CoreError::PreconditionViolation(format!(
            "H R H^H and F F^H differ by {dev:.3e} (relative {:.3e})",
            dev / fgram.norm().max(1e-300)
        )));
    }

    let l_r = cholesky_psd(r.matrix(), 1e-12);
    let hl = channel.matrix() * &l_r;
    let (l_h, q_h) = row_qr(&hl);
    let (l_f, q_f) = row_qr(f);
    // Full row rank of F is required for the Cholesky uniqueness step.
    for kk in 0..k {
        let d = l_f[(kk, kk)].re;
        if d <= 1e-10 * l_f[(0, 0)].re.max(1e-300) {
            return Err(CoreError::DegenerateUser { user: kk });
        }
    }
    let _ = l_h; // equals l_f up to the Gram tolerance
    let qf_top = q_f.rows(0, m).into_owned();
    Ok(l_r * q_h.adjoint() * qf_top)
}

/// The full ZF design: covariance solve, then precoder construction with a
/// diagonal user-side target.
pub fn zf_beamform(
    obj: &RadarObjective,
    cfg: &DesignConfig,
    channel: &Channel,
) -> Result<DesignOutcome> {
    let solved = match zf_solve(obj, cfg, channel)? {
        SolveOutcome::Solved(z) => z,
        SolveOutcome::Infeasible(diag) => {
            return Ok(DesignOutcome {
                status: DesignStatus::Infeasible,
                feasible: None,
                diagnostics: diag,
            })
        }
        SolveOutcome::Failed(diag) => {
            return Ok(DesignOutcome {
                status: DesignStatus::SolverFailure,
                feasible: None,
                diagnostics: diag,
            })
        }
    };
    let m = channel.num_antennas();
    let k = channel.num_users();
    // Build the target from the measured Gram matrix so the construction
    // precondition holds to machine precision; its Cholesky factor is
    // diagonal up to the solver tolerance.
    let gram = channel.matrix() * solved.covariance.matrix() * channel.matrix().adjoint();
    let gram = (&gram + gram.adjoint()) * Complex64::new(0.5, 0.0);
    let lg = cholesky_psd(&gram, 1e-14);
    for kk in 0..k {
        if lg[(kk, kk)].re <= 1e-10 * lg[(0, 0)].re.max(1e-300) {
            return Err(CoreError::DegenerateUser { user: kk });
        }
    }
    let mut f = CMat::zeros(k, k + m);
    f.view_mut((0, 0), (k, k)).copy_from(&lg);
    let w = zf_construct_precoder(&solved.covariance, &f, channel)?;
    let precoder = Precoder::from_stacked(&w, k)?;
    let sinr = sinr_closed_form(channel, &precoder, cfg.noise_power);
    Ok(DesignOutcome {
        status: DesignStatus::Feasible,
        feasible: Some(FeasibleDesign {
            covariance: solved.covariance.clone(),
            precoder,
            alpha: solved.alpha,
            loss: solved.loss,
            sinr,
        }),
        diagnostics: SolverDiagnostics {
            status: SolveStatus::Optimal,
            iterations: 0,
            residuals: ResidualReport::default(),
        },
    })
}

/// The fairness SINR the ZF design attains when its SINR constraint is
/// slack: solve the specialization with `p >= 0` only and return
/// `min_k p_k / sigma^2` together with that solution.
pub struct GammaTwo {
    pub gamma: f64,
    pub solution: ZfSolution,
}

pub fn gamma_ii(obj: &RadarObjective, cfg: &DesignConfig, channel: &Channel) -> Result<GammaTwo> {
    let zero_cfg = DesignConfig {
        thresholds: SinrThresholds::Uniform(0.0),
        ..cfg.clone()
    };
    match zf_solve(obj, &zero_cfg, channel)? {
        SolveOutcome::Solved(z) => {
            let pmin = z.powers.iter().cloned().fold(f64::INFINITY, f64::min);
            Ok(GammaTwo {
                gamma: pmin / cfg.noise_power,
                solution: z,
            })
        }
        SolveOutcome::Infeasible(_) => Err(CoreError::Domain(
            "unconstrained ZF problem infeasible; channel is degenerate".into(),
        )),
        SolveOutcome::Failed(d) => Err(CoreError::SolverFailure {
            status: d.status,
            iterations: d.iterations,
        }),
    }
}
