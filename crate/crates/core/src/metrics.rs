//! Closed-form communication and radar performance metrics plus
//! sweep-level aggregates.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::ArrayGeometry;
use crate::cov::HermitianCov;
use crate::design::{Channel, DesignStatus, Precoder};
use crate::error::Result;

/// Per-user SINR of a precoder through the equivalent channels
/// `F_c = H W_c`, `F_r = H W_r`:
/// signal `|[F_c]_kk|^2` over inter-user plus radar interference plus noise.
pub fn sinr_closed_form(channel: &Channel, w: &Precoder, noise_power: f64) -> Vec<f64> {
    let fc = channel.matrix() * w.comm();
    let fr = channel.matrix() * w.radar();
    let k = channel.num_users();
    (0..k)
        .map(|kk| {
            let signal = fc[(kk, kk)].norm_sqr();
            let inter: f64 = (0..k)
                .filter(|&i| i != kk)
                .map(|i| fc[(kk, i)].norm_sqr())
                .sum();
            let radar: f64 = (0..w.num_antennas()).map(|i| fr[(kk, i)].norm_sqr()).sum();
            signal / (inter + radar + noise_power)
        })
        .collect()
}

/// Achievable sum rate in bits per symbol.
pub fn sum_rate(gamma: &[f64]) -> f64 {
    gamma.iter().map(|g| (1.0 + g).log2()).sum()
}

/// Fairness SINR: the minimum over users.
pub fn fairness(gamma: &[f64]) -> f64 {
    gamma.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Mean squared difference of two beam patterns over a grid.
pub fn beampattern_mse(
    geom: &ArrayGeometry,
    grid: &[f64],
    r: &HermitianCov,
    r0: &HermitianCov,
) -> Result<f64> {
    let mut acc = 0.0;
    for &theta in grid {
        let p = crate::array::beam_pattern(geom, r, theta)?;
        let p0 = crate::array::beam_pattern(geom, r0, theta)?;
        acc += (p0 - p).powi(2);
    }
    Ok(acc / grid.len() as f64)
}

/// Radar-interference-to-noise ratio at user `k`.
pub fn radar_inr(channel: &Channel, wr: &DMatrix<Complex64>, noise_power: f64, k: usize) -> f64 {
    let fr = channel.matrix() * wr;
    let p: f64 = (0..wr.ncols()).map(|i| fr[(k, i)].norm_sqr()).sum();
    p / noise_power
}

/// Angle-estimation RMSE with nearest-neighbor matching inside a gate.
#[derive(Clone, Copy, Debug)]
pub struct RmseOutcome {
    pub rmse_deg: f64,
    pub matched_trials: usize,
    pub missed_trials: usize,
}

/// Match each true angle to the nearest unused estimate within
/// `gate_deg`; trials that cannot match every target are flagged as missed
/// detections and excluded from the average.
pub fn angle_rmse(estimates_per_trial: &[Vec<f64>], truths: &[f64], gate_deg: f64) -> RmseOutcome {
    let mut sq_sum = 0.0;
    let mut matched_trials = 0;
    let mut missed_trials = 0;
    for est in estimates_per_trial {
        let mut used = vec![false; est.len()];
        let mut trial_sq = 0.0;
        let mut ok = true;
        for &t in truths {
            let mut best: Option<(usize, f64)> = None;
            for (i, &e) in est.iter().enumerate() {
                if used[i] {
                    continue;
                }
                let d = (e - t).abs();
                if d <= gate_deg && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((i, d));
                }
            }
            match best {
                Some((i, d)) => {
                    used[i] = true;
                    trial_sq += d * d;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            matched_trials += 1;
            sq_sum += trial_sq / truths.len() as f64;
        } else {
            missed_trials += 1;
        }
    }
    let rmse = if matched_trials > 0 {
        (sq_sum / matched_trials as f64).sqrt()
    } else {
        f64::NAN
    };
    RmseOutcome {
        rmse_deg: rmse,
        matched_trials,
        missed_trials,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FeasibilityStats {
    pub trials: usize,
    pub feasible: usize,
    pub infeasible: usize,
    pub failures: usize,
    /// Feasible fraction over all trials; numerical failures are counted
    /// in the denominator but reported separately.
    pub fraction: f64,
}

pub fn feasibility_probability(statuses: &[DesignStatus]) -> FeasibilityStats {
    let trials = statuses.len();
    let feasible = statuses
        .iter()
        .filter(|s| **s == DesignStatus::Feasible)
        .count();
    let infeasible = statuses
        .iter()
        .filter(|s| **s == DesignStatus::Infeasible)
        .count();
    let failures = trials - feasible - infeasible;
    FeasibilityStats {
        trials,
        feasible,
        infeasible,
        failures,
        fraction: if trials > 0 {
            feasible as f64 / trials as f64
        } else {
            0.0
        },
    }
}

pub fn db10(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db10(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One solved design instance summarized for reporting.
#[derive(Clone, Debug)]
pub struct TrialReport {
    pub status: DesignStatus,
    pub loss: f64,
    pub alpha: f64,
    pub gamma: Vec<f64>,
    pub fairness: f64,
    pub sum_rate: f64,
    pub mse: f64,
    /// Radar INR per user, linear.
    pub inr: Vec<f64>,
    pub wall_ms: f64,
}

impl TrialReport {
    pub fn csv_header() -> &'static str {
        "status,k,loss,alpha,fairness_db,sum_rate,mse,inr_db,wall_ms,gammas"
    }

    /// One CSV row matching [`TrialReport::csv_header`]; metric fields are
    /// empty for unsolved instances, `inr_db` is the first user's.
    pub fn to_csv_row(&self) -> String {
        let status = match self.status {
            DesignStatus::Feasible => "feasible",
            DesignStatus::Infeasible => "infeasible",
            DesignStatus::SolverFailure => "solver_failure",
        };
        if self.status != DesignStatus::Feasible {
            return format!("{status},{},,,,,,,{:.3},", self.gamma.len(), self.wall_ms);
        }
        if self.gamma.is_empty() {
            // No communication users: the rate/SINR columns are not defined.
            return format!(
                "{status},0,{:.9e},{:.9e},,,{:.9e},,{:.3},",
                self.loss, self.alpha, self.mse, self.wall_ms
            );
        }
        let gammas = self
            .gamma
            .iter()
            .map(|g| format!("{g:.9e}"))
            .collect::<Vec<_>>()
            .join(";");
        format!(
            "{status},{},{:.9e},{:.9e},{:.6},{:.6},{:.9e},{:.6},{:.3},{gammas}",
            self.gamma.len(),
            self.loss,
            self.alpha,
            db10(self.fairness),
            self.sum_rate,
            self.mse,
            db10(self.inr.first().copied().unwrap_or(0.0).max(1e-300)),
            self.wall_ms,
        )
    }
}
