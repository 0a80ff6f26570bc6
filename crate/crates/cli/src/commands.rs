//! The three subcommands: single design, Monte Carlo sweep, waveform-level
//! verification. All outputs are deterministic CSV/text artifacts keyed by
//! the master seed (timing columns excepted).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dfrc_core::design::{
    radar_only, sdr_beamform, zf_beamform, Channel, DesignOutcome, DesignStatus, Precoder,
    RadarOnlyDesign,
};
use dfrc_core::metrics::{
    self, beampattern_mse, db10, fairness, feasibility_probability, radar_inr, sum_rate,
    TrialReport,
};
use dfrc_core::simulate::{
    capon_spectrum, comm_receive, empirical_sinr, radar_receive, range_compress, rayleigh_channel,
    RadarTarget, WaveformBlock,
};
use dfrc_core::{
    beam_pattern, build_radar_loss, desired_pattern, CoreError, HermitianCov, RadarObjective,
};

use crate::config::{ExperimentConfig, Method};

pub enum CmdError {
    Config(String),
    Infeasible,
    SolverFailure,
    Other(String),
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        CmdError::Other(e.to_string())
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Other(e.to_string())
    }
}

pub fn exit_code(e: &CmdError) -> i32 {
    match e {
        CmdError::Config(_) => 4,
        CmdError::Infeasible => 2,
        CmdError::SolverFailure => 3,
        CmdError::Other(_) => 1,
    }
}

pub fn describe(e: &CmdError) -> String {
    match e {
        CmdError::Config(m) => format!("configuration error: {m}"),
        CmdError::Infeasible => "design infeasible at the requested threshold".into(),
        CmdError::SolverFailure => "solver failed to reach the requested accuracy".into(),
        CmdError::Other(m) => m.clone(),
    }
}

fn csv_writer(dir: &Path, name: &str) -> Result<BufWriter<File>, CmdError> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Channel stream id: one channel per (user-count, trial), shared across
/// thresholds and methods so comparisons see identical fading.
fn channel_stream(k_index: usize, trial: usize) -> u64 {
    ((k_index as u64) << 32) | trial as u64
}

fn channel_for(cfg: &ExperimentConfig, k: usize, k_index: usize, trial: usize) -> Channel {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(channel_stream(k_index, trial));
    rayleigh_channel(k, cfg.num_antennas, &mut rng).expect("channel dimensions validated")
}

struct Prepared {
    objective: RadarObjective,
    baseline: RadarOnlyDesign,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, CmdError> {
    let geom = cfg.geometry().map_err(|e| CmdError::Config(e.to_string()))?;
    let spec = cfg.beam_spec().map_err(|e| CmdError::Config(e.to_string()))?;
    let objective = build_radar_loss(&geom, &spec)?;
    let design_cfg = cfg
        .design_config(0.0)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let baseline = radar_only(&objective, &design_cfg).map_err(|_| CmdError::SolverFailure)?;
    Ok(Prepared {
        objective,
        baseline,
    })
}

fn report_from_outcome(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    channel: &Channel,
    outcome: &DesignOutcome,
    wall_ms: f64,
) -> Result<TrialReport, CmdError> {
    let geom = prep.objective.geometry();
    let grid = &prep.objective.spec().grid;
    Ok(match (&outcome.status, &outcome.feasible) {
        (DesignStatus::Feasible, Some(fea)) => {
            let mse = beampattern_mse(geom, grid, &fea.covariance, &prep.baseline.covariance)?;
            let inr: Vec<f64> = (0..channel.num_users())
                .map(|k| radar_inr(channel, fea.precoder.radar(), cfg.noise, k))
                .collect();
            TrialReport {
                status: DesignStatus::Feasible,
                loss: fea.loss,
                alpha: fea.alpha,
                gamma: fea.sinr.clone(),
                fairness: fairness(&fea.sinr),
                sum_rate: sum_rate(&fea.sinr),
                mse,
                inr,
                wall_ms,
            }
        }
        (status, _) => TrialReport {
            status: *status,
            loss: f64::NAN,
            alpha: f64::NAN,
            gamma: vec![0.0; channel.num_users()],
            fairness: f64::NAN,
            sum_rate: f64::NAN,
            mse: f64::NAN,
            inr: Vec::new(),
            wall_ms,
        },
    })
}

pub fn cmd_design(cfg: &ExperimentConfig) -> Result<(), CmdError> {
    cfg.validate().map_err(CmdError::Config)?;
    if cfg.users.len() != 1 || cfg.gamma_db.len() != 1 {
        return Err(CmdError::Config(
            "design expects a single user count and a single gamma_db".into(),
        ));
    }
    let prep = prepare(cfg)?;
    let geom = prep.objective.geometry();
    let spec = prep.objective.spec();
    let k = cfg.users[0];
    let gamma_db = cfg.gamma_db[0];
    let design_cfg = cfg
        .design_config(gamma_db)
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let started = Instant::now();
    let (report, cov, precoder): (TrialReport, HermitianCov, Option<Precoder>) = match cfg.method {
        Method::RadarOnly => {
            let base = &prep.baseline;
            let report = TrialReport {
                status: DesignStatus::Feasible,
                loss: base.loss,
                alpha: base.alpha,
                gamma: Vec::new(),
                fairness: f64::INFINITY,
                sum_rate: 0.0,
                mse: 0.0,
                inr: Vec::new(),
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            };
            (report, base.covariance.clone(), None)
        }
        Method::Sdr | Method::Zf => {
            let channel = channel_for(cfg, k, 0, 0);
            let outcome = if cfg.method == Method::Sdr {
                sdr_beamform(&prep.objective, &design_cfg, &channel)?
            } else {
                zf_beamform(&prep.objective, &design_cfg, &channel)?
            };
            let wall = started.elapsed().as_secs_f64() * 1e3;
            let report = report_from_outcome(&prep, cfg, &channel, &outcome, wall)?;
            match outcome.feasible {
                Some(fea) => (report, fea.covariance, Some(fea.precoder)),
                None => {
                    // Record the status row before signalling the failure.
                    let mut w = csv_writer(&cfg.outdir, "report.csv")?;
                    writeln!(w, "{}", TrialReport::csv_header())?;
                    writeln!(w, "{}", report.to_csv_row())?;
                    return Err(match report.status {
                        DesignStatus::Infeasible => CmdError::Infeasible,
                        _ => CmdError::SolverFailure,
                    });
                }
            }
        }
        Method::Both => {
            return Err(CmdError::Config(
                "design expects method=radar_only|sdr|zf".into(),
            ))
        }
    };

    let mut w = csv_writer(&cfg.outdir, "report.csv")?;
    writeln!(w, "{}", TrialReport::csv_header())?;
    writeln!(w, "{}", report.to_csv_row())?;

    dfrc_core::io::write_matrix_file(cfg.outdir.join("covariance.txt"), cov.matrix())?;
    if let Some(p) = &precoder {
        dfrc_core::io::write_matrix_file(cfg.outdir.join("precoder.txt"), &p.stacked())?;
    }

    let mut w = csv_writer(&cfg.outdir, "pattern.csv")?;
    writeln!(w, "theta_deg,power,desired,radar_only_power")?;
    for &theta in &spec.grid {
        writeln!(
            w,
            "{theta:.4},{:.9e},{},{:.9e}",
            beam_pattern(geom, &cov, theta)?,
            desired_pattern(spec, theta),
            beam_pattern(geom, &prep.baseline.covariance, theta)?,
        )?;
    }
    Ok(())
}

struct SweepRow {
    method: &'static str,
    k: usize,
    gamma_db: f64,
    trial: usize,
    stream: u64,
    report: TrialReport,
}

const SWEEP_HEADER: &str = "method,k,gamma_db,trial,seed,status,loss,mse,fairness_db,sumrate,inr_db,wall_ms";
const AGG_HEADER: &str = "method,k,gamma_db,trials,feasible,infeasible,failures,feasibility,mean_loss,mean_mse,mean_fairness_db,mean_sumrate,mean_inr_db";

fn status_name(s: DesignStatus) -> &'static str {
    match s {
        DesignStatus::Feasible => "feasible",
        DesignStatus::Infeasible => "infeasible",
        DesignStatus::SolverFailure => "solver_failure",
    }
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), CmdError> {
    cfg.validate().map_err(CmdError::Config)?;
    let prep = prepare(cfg)?;
    let methods: Vec<Method> = match cfg.method {
        Method::Both => vec![Method::Sdr, Method::Zf],
        Method::RadarOnly => {
            return Err(CmdError::Config("sweep expects method=sdr|zf|both".into()))
        }
        m => vec![m],
    };

    let mut cells: Vec<(Method, usize, usize, f64, usize)> = Vec::new();
    for method in &methods {
        for (ki, &k) in cfg.users.iter().enumerate() {
            for &gamma_db in &cfg.gamma_db {
                for trial in 0..cfg.trials {
                    cells.push((*method, ki, k, gamma_db, trial));
                }
            }
        }
    }

    let rows: Vec<SweepRow> = cells
        .par_iter()
        .map(|&(method, ki, k, gamma_db, trial)| {
            let channel = channel_for(cfg, k, ki, trial);
            let design_cfg = cfg.design_config(gamma_db).expect("validated");
            let started = Instant::now();
            let outcome = match method {
                Method::Sdr => sdr_beamform(&prep.objective, &design_cfg, &channel),
                Method::Zf => zf_beamform(&prep.objective, &design_cfg, &channel),
                _ => unreachable!(),
            };
            let wall = started.elapsed().as_secs_f64() * 1e3;
            let report = match outcome {
                Ok(out) => report_from_outcome(&prep, cfg, &channel, &out, wall)
                    .unwrap_or_else(|_| failure_report(&channel, wall)),
                Err(_) => failure_report(&channel, wall),
            };
            SweepRow {
                method: method.name(),
                k,
                gamma_db,
                trial,
                stream: channel_stream(ki, trial),
                report,
            }
        })
        .collect();

    let mut rows = rows;
    rows.sort_by(|a, b| {
        (a.method, a.k, a.gamma_db.to_bits(), a.trial).cmp(&(
            b.method,
            b.k,
            b.gamma_db.to_bits(),
            b.trial,
        ))
    });

    let mut w = csv_writer(&cfg.outdir, "sweep.csv")?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in &rows {
        let t = &r.report;
        if t.status == DesignStatus::Feasible {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.9e},{:.9e},{:.6},{:.6},{:.6},{:.3}",
                r.method,
                r.k,
                r.gamma_db,
                r.trial,
                r.stream,
                status_name(t.status),
                t.loss,
                t.mse,
                db10(t.fairness),
                t.sum_rate,
                db10(t.inr.first().copied().unwrap_or(0.0).max(1e-300)),
                t.wall_ms,
            )?;
        } else {
            writeln!(
                w,
                "{},{},{},{},{},{},,,,,,{:.3}",
                r.method,
                r.k,
                r.gamma_db,
                r.trial,
                r.stream,
                status_name(t.status),
                t.wall_ms,
            )?;
        }
    }

    let mut w = csv_writer(&cfg.outdir, "aggregate.csv")?;
    writeln!(w, "{AGG_HEADER}")?;
    for method in &methods {
        for &k in &cfg.users {
            for &gamma_db in &cfg.gamma_db {
                let cell: Vec<&SweepRow> = rows
                    .iter()
                    .filter(|r| r.method == method.name() && r.k == k && r.gamma_db == gamma_db)
                    .collect();
                let statuses: Vec<DesignStatus> =
                    cell.iter().map(|r| r.report.status).collect();
                let stats = feasibility_probability(&statuses);
                let feas: Vec<&&SweepRow> = cell
                    .iter()
                    .filter(|r| r.report.status == DesignStatus::Feasible)
                    .collect();
                let mean = |f: &dyn Fn(&TrialReport) -> f64| -> f64 {
                    if feas.is_empty() {
                        f64::NAN
                    } else {
                        feas.iter().map(|r| f(&r.report)).sum::<f64>() / feas.len() as f64
                    }
                };
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{:.6},{:.9e},{:.9e},{:.6},{:.6},{:.6}",
                    method.name(),
                    k,
                    gamma_db,
                    stats.trials,
                    stats.feasible,
                    stats.infeasible,
                    stats.failures,
                    stats.fraction,
                    mean(&|t| t.loss),
                    mean(&|t| t.mse),
                    mean(&|t| db10(t.fairness)),
                    mean(&|t| t.sum_rate),
                    mean(&|t| db10(t.inr.first().copied().unwrap_or(0.0).max(1e-300))),
                )?;
            }
        }
    }
    Ok(())
}

fn failure_report(channel: &Channel, wall_ms: f64) -> TrialReport {
    TrialReport {
        status: DesignStatus::SolverFailure,
        loss: f64::NAN,
        alpha: f64::NAN,
        gamma: vec![0.0; channel.num_users()],
        fairness: f64::NAN,
        sum_rate: f64::NAN,
        mse: f64::NAN,
        inr: Vec::new(),
        wall_ms,
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig, precoder_path: Option<&str>) -> Result<(), CmdError> {
    cfg.validate().map_err(CmdError::Config)?;
    if cfg.users.len() != 1 || cfg.gamma_db.len() != 1 {
        return Err(CmdError::Config(
            "simulate expects a single user count and a single gamma_db".into(),
        ));
    }
    let k = cfg.users[0];
    let geom = cfg.geometry().map_err(|e| CmdError::Config(e.to_string()))?;
    let path = precoder_path
        .ok_or_else(|| CmdError::Config("simulate needs --precoder=FILE".into()))?;
    let stacked = dfrc_core::io::read_matrix_file(path)?;
    if stacked.nrows() != cfg.num_antennas || stacked.ncols() != cfg.num_antennas + k {
        return Err(CmdError::Config(format!(
            "precoder {}x{} does not match m={}, users={k}",
            stacked.nrows(),
            stacked.ncols(),
            cfg.num_antennas
        )));
    }
    let precoder = Precoder::from_stacked(&stacked, k)?;
    let cov = precoder.covariance();
    let channel = channel_for(cfg, k, 0, 0);
    let n = cfg.block_len;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX); // waveform stream, distinct from channels
    let block = WaveformBlock::generate(&precoder, n, &mut rng)?;
    let cov_err = dfrc_core::simulate::covariance_error(&block, &cov);
    let cov_bound = 5.0 * cov.norm() / (n as f64).sqrt();
    let received = comm_receive(&channel, &block.transmit, cfg.noise, &mut rng)?;
    let emp = empirical_sinr(&received, &block.comm);
    let closed = metrics::sinr_closed_form(&channel, &precoder, cfg.noise);

    let mut w = csv_writer(&cfg.outdir, "verify.csv")?;
    writeln!(w, "metric,user,value")?;
    writeln!(w, "cov_err_frobenius,,{cov_err:.9e}")?;
    writeln!(w, "cov_err_bound,,{cov_bound:.9e}")?;
    for (i, (e, c)) in emp.iter().zip(&closed).enumerate() {
        writeln!(w, "sinr_closed_db,{i},{:.6}", db10(*c))?;
        writeln!(w, "sinr_empirical_db,{i},{:.6}", db10(*e))?;
    }

    // Radar scene: receive, range-compress, scan the configured bin.
    let targets: Vec<RadarTarget> = cfg
        .targets
        .iter()
        .map(|&(delay, angle)| RadarTarget {
            amplitude: num_complex::Complex64::new(1.0, 0.0),
            delay,
            angle_deg: angle,
        })
        .collect();
    for t in &targets {
        if t.delay >= n {
            return Err(CmdError::Config(format!(
                "target delay {} outside block of length {n}",
                t.delay
            )));
        }
    }
    let echo = radar_receive(&geom, &targets, &block.transmit, cfg.radar_noise, &mut rng)?;
    let compressed = range_compress(&echo, &block.transmit)?;
    let profile = compressed.profile(&geom, 0.0)?;
    let scan_bin = cfg.targets.iter().map(|t| t.0).max().unwrap_or(0).min(n - 1);
    let spatial = compressed.spatial_covariance(20.min(n - 1));
    let grid = dfrc_core::angle_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_res)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let spectrum = capon_spectrum(&spatial, &geom, &grid)?;

    let mut w = csv_writer(&cfg.outdir, "spectrum.csv")?;
    writeln!(w, "kind,coord,value")?;
    for (d, v) in profile.iter().enumerate().take(2 * scan_bin + 20) {
        writeln!(w, "range,{d},{v:.9e}")?;
    }
    for (theta, v) in grid.iter().zip(&spectrum) {
        writeln!(w, "capon,{theta:.4},{v:.9e}")?;
    }
    Ok(())
}
