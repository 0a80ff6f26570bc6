//! End-to-end checks of the command-line interface: artifact schemas,
//! deterministic reproduction, config validation and exit codes.

use std::path::Path;
use std::process::Command;

fn dfrc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dfrc"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

/// Drop the volatile timing column so outputs can be compared bytewise.
fn strip_wall_ms(csv: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if i == 0 {
            let idx = cols.iter().position(|c| *c == "wall_ms");
            assert!(idx.is_some(), "wall_ms column missing");
        }
        let keep: Vec<&str> = cols
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                // wall_ms is always the second-to-last column in sweep.csv.
                *j != cols.len() - 1
            })
            .map(|(_, c)| *c)
            .collect();
        out.push_str(&keep.join(","));
        out.push('\n');
    }
    out
}

#[test]
fn sweep_is_reproducible_and_has_documented_schema() {
    let dir_a = tempdir("sweep_a");
    let dir_b = tempdir("sweep_b");
    for dir in [&dir_a, &dir_b] {
        let status = dfrc()
            .args([
                "sweep",
                "--users=2",
                "--gamma_db=8",
                "--trials=3",
                "--method=both",
                "--grid_res=0.5",
                "--seed=42",
                &format!("--outdir={}", dir.display()),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = read(&dir_a.join("sweep.csv"));
    let b = read(&dir_b.join("sweep.csv"));
    assert!(a.starts_with(
        "method,k,gamma_db,trial,seed,status,loss,mse,fairness_db,sumrate,inr_db,wall_ms"
    ));
    assert_eq!(strip_wall_ms(&a), strip_wall_ms(&b), "sweep rows must be identical");
    let agg = read(&dir_a.join("aggregate.csv"));
    assert!(agg.starts_with(
        "method,k,gamma_db,trials,feasible,infeasible,failures,feasibility,mean_loss,mean_mse,mean_fairness_db,mean_sumrate,mean_inr_db"
    ));
    // 2 methods x 1 gamma x 3 trials rows.
    assert_eq!(a.lines().count(), 1 + 6);
}

#[test]
fn design_writes_all_artifacts() {
    let dir = tempdir("design");
    let status = dfrc()
        .args([
            "design",
            "--method=sdr",
            "--users=2",
            "--gamma_db=12",
            "--grid_res=0.5",
            &format!("--outdir={}", dir.display()),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let pattern = read(&dir.join("pattern.csv"));
    assert!(pattern.starts_with("theta_deg,power,desired,radar_only_power"));
    assert_eq!(pattern.lines().count(), 1 + 361); // 0.5 degree grid
    let report = read(&dir.join("report.csv"));
    assert!(report.starts_with(
        "status,k,loss,alpha,fairness_db,sum_rate,mse,inr_db,wall_ms,gammas"
    ));
    assert!(report.lines().nth(1).unwrap().starts_with("feasible,2,"));
    // The precoder file parses back with the documented shape.
    let w = dfrc_core::io::read_matrix_file(dir.join("precoder.txt")).unwrap();
    assert_eq!((w.nrows(), w.ncols()), (10, 12));
    let r = dfrc_core::io::read_matrix_file(dir.join("covariance.txt")).unwrap();
    assert_eq!((r.nrows(), r.ncols()), (10, 10));
}

#[test]
fn simulate_consumes_design_output() {
    let dir = tempdir("simulate");
    assert!(dfrc()
        .args([
            "design",
            "--method=zf",
            "--users=2",
            "--gamma_db=12",
            "--grid_res=0.5",
            &format!("--outdir={}", dir.display()),
        ])
        .status()
        .unwrap()
        .success());
    assert!(dfrc()
        .args([
            "simulate",
            "--users=2",
            "--gamma_db=12",
            "--grid_res=0.5",
            "--block_len=256",
            "--targets=10:0,20:-40,20:0,20:40,30:0",
            &format!("--precoder={}", dir.join("precoder.txt").display()),
            &format!("--outdir={}", dir.display()),
        ])
        .status()
        .unwrap()
        .success());
    let verify = read(&dir.join("verify.csv"));
    assert!(verify.starts_with("metric,user,value"));
    assert!(verify.contains("cov_err_frobenius"));
    assert!(verify.contains("sinr_empirical_db,1,"));
    let spectrum = read(&dir.join("spectrum.csv"));
    assert!(spectrum.starts_with("kind,coord,value"));
    assert!(spectrum.contains("range,10,"));
    assert!(spectrum.contains("capon,"));
}

#[test]
fn exit_codes() {
    // Config error: zero trials.
    let st = dfrc()
        .args(["sweep", "--trials=0", "--outdir=/tmp/dfrc_never"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(4));

    // Config error: more users than antennas, caught before any solve.
    let st = dfrc()
        .args(["design", "--method=sdr", "--users=12", "--outdir=/tmp/dfrc_never"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(4));

    // Infeasible design: absurd SINR demand.
    let dir = tempdir("infeasible");
    let st = dfrc()
        .args([
            "design",
            "--method=sdr",
            "--users=2",
            "--gamma_db=200",
            "--grid_res=0.5",
            &format!("--outdir={}", dir.display()),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    // The status row is still written.
    let report = read(&dir.join("report.csv"));
    assert!(report.lines().nth(1).unwrap().starts_with("infeasible"));

    // Unknown key.
    let st = dfrc().args(["design", "--wat=1"]).status().unwrap();
    assert_eq!(st.code(), Some(4));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempdir("config");
    let cfg_path = dir.join("run.cfg");
    std::fs::write(
        &cfg_path,
        "m = 10\nusers = 2\ngamma_db = 12\ngrid_res = 0.5\nmethod = zf\ntrials = 1\n# comment\n",
    )
    .unwrap();
    let st = dfrc()
        .args([
            "design",
            &format!("--config={}", cfg_path.display()),
            "--gamma_db=8", // flag overrides the file
            &format!("--outdir={}", dir.display()),
        ])
        .status()
        .unwrap();
    assert!(st.success());
    let report = read(&dir.join("report.csv"));
    // Fairness of a feasible ZF design is at least the 8 dB threshold.
    let row = report.lines().nth(1).unwrap();
    let fairness: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!(fairness >= 8.0 - 1e-3, "fairness {fairness}");
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("dfrc_cli_{tag}_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
