//! Experiment configuration: a plain-text `key = value` file, overridable
//! by `--key=value` command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dfrc_core::{angle_grid, ArrayGeometry, BeamSpec, CoreError, DesignConfig, SinrThresholds};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    RadarOnly,
    Sdr,
    Zf,
    Both,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method, String> {
        match s {
            "radar_only" => Ok(Method::RadarOnly),
            "sdr" => Ok(Method::Sdr),
            "zf" => Ok(Method::Zf),
            "both" => Ok(Method::Both),
            other => Err(format!(
                "unknown method `{other}` (expected radar_only|sdr|zf|both)"
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::RadarOnly => "radar_only",
            Method::Sdr => "sdr",
            Method::Zf => "zf",
            Method::Both => "both",
        }
    }
}

/// All knobs of a run. Defaults reproduce the reference scenario:
/// a half-wavelength 10-element array, three beams at -40/0/40 degrees of
/// width 10, a 0.1-degree grid, unit power, -20 dBW noise.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub num_antennas: usize,
    pub spacing: f64,
    pub beams: Vec<f64>,
    pub beam_width: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_res: f64,
    pub cross_weight: f64,
    pub power: f64,
    pub noise: f64,
    /// SINR thresholds in dB (sweeps iterate over all of them).
    pub gamma_db: Vec<f64>,
    /// User counts (sweeps iterate over all of them).
    pub users: Vec<usize>,
    pub method: Method,
    pub trials: usize,
    pub seed: u64,
    pub block_len: usize,
    pub outdir: PathBuf,
    /// Radar scene for `simulate`: (delay, angle-degrees) pairs.
    pub targets: Vec<(usize, f64)>,
    pub radar_noise: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_antennas: 10,
            spacing: 0.5,
            beams: vec![-40.0, 0.0, 40.0],
            beam_width: 10.0,
            grid_lo: -90.0,
            grid_hi: 90.0,
            grid_res: 0.1,
            cross_weight: 1.0,
            power: 1.0,
            noise: 0.01,
            gamma_db: vec![12.0],
            users: vec![2],
            method: Method::Both,
            trials: 50,
            seed: 1,
            block_len: 1024,
            outdir: PathBuf::from("out"),
            targets: vec![(10, 0.0), (20, -40.0), (20, 0.0), (20, 40.0), (30, 0.0)],
            radar_noise: 1.0,
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| format!("bad value `{t}` for {key}"))
        })
        .collect()
}

fn parse_targets(s: &str) -> Result<Vec<(usize, f64)>, String> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (d, a) = t
                .split_once(':')
                .ok_or_else(|| format!("target `{t}` must be delay:angle"))?;
            Ok((
                d.trim()
                    .parse()
                    .map_err(|_| format!("bad delay in `{t}`"))?,
                a.trim()
                    .parse()
                    .map_err(|_| format!("bad angle in `{t}`"))?,
            ))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |k: &str| format!("bad value for {k}");
        match key {
            "m" | "antennas" => self.num_antennas = value.parse().map_err(|_| bad(key))?,
            "spacing" => self.spacing = value.parse().map_err(|_| bad(key))?,
            "beams" => self.beams = parse_list(value, key)?,
            "beam_width" => self.beam_width = value.parse().map_err(|_| bad(key))?,
            "grid_lo" => self.grid_lo = value.parse().map_err(|_| bad(key))?,
            "grid_hi" => self.grid_hi = value.parse().map_err(|_| bad(key))?,
            "grid_res" => self.grid_res = value.parse().map_err(|_| bad(key))?,
            "cross_weight" => self.cross_weight = value.parse().map_err(|_| bad(key))?,
            "power" => self.power = value.parse().map_err(|_| bad(key))?,
            "noise" => self.noise = value.parse().map_err(|_| bad(key))?,
            "gamma_db" => self.gamma_db = parse_list(value, key)?,
            "users" | "k" => self.users = parse_list(value, key)?,
            "method" => self.method = Method::parse(value)?,
            "trials" => self.trials = value.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "block_len" | "n" => self.block_len = value.parse().map_err(|_| bad(key))?,
            "outdir" => self.outdir = PathBuf::from(value),
            "targets" => self.targets = parse_targets(value)?,
            "radar_noise" => self.radar_noise = value.parse().map_err(|_| bad(key))?,
            other => return Err(format!("unknown configuration key `{other}`")),
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &str) -> Result<(), String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("{path}:{}: expected `key = value`", lineno + 1))?;
            self.apply(k.trim(), v.trim())
                .map_err(|e| format!("{path}:{}: {e}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.gamma_db.is_empty() {
            return Err("gamma_db list must be nonempty".into());
        }
        if self.users.is_empty() {
            return Err("users list must be nonempty".into());
        }
        if self.trials == 0 {
            return Err("trials must be positive".into());
        }
        if self.block_len == 0 {
            return Err("block_len must be positive".into());
        }
        for &k in &self.users {
            if k >= self.num_antennas {
                return Err(format!(
                    "users ({k}) must be fewer than antennas ({})",
                    self.num_antennas
                ));
            }
        }
        // Module-level invariants surface early.
        self.geometry().map_err(|e| e.to_string())?;
        self.beam_spec().map_err(|e| e.to_string())?;
        self.design_config(self.gamma_db[0])
            .map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, CoreError> {
        ArrayGeometry::new(self.num_antennas, self.spacing)
    }

    pub fn beam_spec(&self) -> Result<BeamSpec, CoreError> {
        let grid = angle_grid(self.grid_lo, self.grid_hi, self.grid_res)?;
        BeamSpec::new(self.beams.clone(), self.beam_width, grid, self.cross_weight)
    }

    pub fn design_config(&self, gamma_db: f64) -> Result<DesignConfig, CoreError> {
        DesignConfig::new(
            self.power,
            self.noise,
            SinrThresholds::Uniform(dfrc_core::metrics::from_db10(gamma_db)),
        )
    }
}

/// Parse `argv` into a config plus the subcommand. Flags are
/// `--key=value`; `--config=FILE` loads a file first (in argument order).
pub fn parse_args(args: &[String]) -> Result<(String, ExperimentConfig, BTreeMap<String, String>), String> {
    if args.is_empty() {
        return Err("usage: dfrc <design|sweep|simulate> [--config=FILE] [--key=value ...]".into());
    }
    let command = args[0].clone();
    let mut cfg = ExperimentConfig::default();
    let mut extra = BTreeMap::new();
    for arg in &args[1..] {
        let stripped = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument `{arg}`"))?;
        let (k, v) = stripped
            .split_once('=')
            .ok_or_else(|| format!("flag `{arg}` must be --key=value"))?;
        match k {
            "config" => cfg.load_file(v)?,
            "precoder" => {
                extra.insert("precoder".to_string(), v.to_string());
            }
            _ => cfg.apply(k, v)?,
        }
    }
    Ok((command, cfg, extra))
}
