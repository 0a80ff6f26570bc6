//! Command-line front end: single designs, Monte Carlo sweeps and
//! waveform-level verification, emitting deterministic CSV artifacts.
//!
//! Exit codes: 0 success, 2 infeasible, 3 solver failure, 4 configuration
//! error, 1 other errors. `DFRC_THREADS` caps the worker pool.

mod commands;
mod config;

use commands::{cmd_design, cmd_simulate, cmd_sweep, describe, exit_code};

fn main() {
    if let Ok(threads) = std::env::var("DFRC_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
        }
    }
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (command, cfg, extra) = match config::parse_args(&args) {
        Ok(parsed) => parsed,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(4);
        }
    };
    let result = match command.as_str() {
        "design" => cmd_design(&cfg),
        "sweep" => cmd_sweep(&cfg),
        "simulate" => cmd_simulate(&cfg, extra.get("precoder").map(|s| s.as_str())),
        other => {
            eprintln!("unknown command `{other}` (expected design|sweep|simulate)");
            std::process::exit(4);
        }
    };
    if let Err(e) = result {
        eprintln!("{}", describe(&e));
        std::process::exit(exit_code(&e));
    }
}
