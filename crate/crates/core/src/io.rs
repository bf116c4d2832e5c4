//! Configuration files, field snapshots, run manifests and the simulation
//! driver that ties them to `energy.csv`.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::{certificate, CertificateReport, ComparisonError};
use crate::diagnostics::{record, EnergyRecord, CSV_HEADER};
use crate::dynamics::{random_initial_state, Dynamics, DynamicsError, SimConfig, State};
use crate::spectral::Grid;
use crate::tensor::n_components;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cli_io: parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cli_io: validation failed: {0}")]
    Validation(String),
    #[error("cli_io: corrupt file: {0}")]
    CorruptFile(String),
    #[error("cli_io: grid mismatch: {0}")]
    GridMismatch(String),
    #[error("cli_io: {0}")]
    Io(#[from] std::io::Error),
    #[error("cli_io: manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Dynamics(#[from] DynamicsError),
    #[error("{0}")]
    Comparison(#[from] ComparisonError),
}

const REQUIRED: [&str; 9] = ["gamma", "L", "theta", "kappa", "nu", "lambda", "n", "dt", "T"];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_str(text: &str) -> Result<SimConfig, IoError> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut cfg = SimConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| IoError::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(IoError::Parse {
                line,
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        let bad = |what: &str| IoError::Parse {
            line,
            message: format!("`{key}` expects {what}, got `{value}`"),
        };
        let real = || value.parse::<f64>().map_err(|_| bad("a number"));
        let int = || value.parse::<usize>().map_err(|_| bad("a nonnegative integer"));
        match key {
            "gamma" => cfg.gamma = real()?,
            "L" => cfg.l = real()?,
            "theta" => cfg.theta = real()?,
            "kappa" => cfg.kappa = real()?,
            "nu" => cfg.nu = real()?,
            "xi" => cfg.xi = real()?,
            "lambda" => cfg.lambda = real()?,
            "n" => cfg.n = int()?,
            "dt" => cfg.dt = real()?,
            "T" => cfg.t_final = real()?,
            "N" => cfg.n_reg = int()?,
            "M" => cfg.m_galerkin = int()?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("an unsigned integer"))?,
            "output_dir" => cfg.output_dir = value.trim_matches('"').to_string(),
            "snapshot_every" => cfg.snapshot_every = int()?,
            "record_every" => cfg.record_every = int()?,
            "dim" => cfg.dim = int()?,
            "init_margin" => cfg.init_margin = real()?,
            "u_amplitude" => cfg.u_amplitude = real()?,
            _ => {
                return Err(IoError::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    if let Some(k) = REQUIRED.iter().find(|k| !seen.contains_key(**k)) {
        return Err(IoError::Validation(format!("missing key {k}")));
    }
    cfg.validate().map_err(IoError::Validation)?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<SimConfig, IoError> {
    parse_config_str(&fs::read_to_string(path)?)
}

const MAGIC: &[u8; 4] = b"NMQ1";

/// Grid values of `Q` components followed by `u` components.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub n: usize,
    pub lambda: f64,
    pub t: f64,
    pub channels: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_state(grid: &Grid, state: &State) -> Self {
        Self {
            dim: grid.dim(),
            n: grid.n(),
            lambda: grid.lambda(),
            t: state.t,
            channels: state.q.iter().chain(&state.u).cloned().collect(),
        }
    }

    pub fn to_state(&self, grid: &Grid) -> Result<State, IoError> {
        if self.dim != grid.dim() || self.n != grid.n() || self.lambda != grid.lambda() {
            return Err(IoError::GridMismatch(format!(
                "snapshot is d={} n={} lambda={}, run is d={} n={} lambda={}",
                self.dim,
                self.n,
                self.lambda,
                grid.dim(),
                grid.n(),
                grid.lambda()
            )));
        }
        let nc = n_components(self.dim);
        if self.channels.len() != nc + self.dim {
            return Err(IoError::GridMismatch(format!(
                "expected {} channels, found {}",
                nc + self.dim,
                self.channels.len()
            )));
        }
        Ok(State {
            t: self.t,
            q: self.channels[..nc].to_vec(),
            u: self.channels[nc..].to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(self.dim as u8);
        for _ in 0..self.dim {
            out.extend_from_slice(&(self.n as u32).to_le_bytes());
        }
        out.push(self.channels.len() as u8);
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&self.t.to_le_bytes());
        let start = out.len();
        for ch in &self.channels {
            for v in ch {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let corrupt = |m: &str| IoError::CorruptFile(m.to_string());
        let mut pos = 0usize;
        let mut take = |k: usize| -> Result<&[u8], IoError> {
            let s = bytes.get(pos..pos + k).ok_or_else(|| corrupt("truncated"))?;
            pos += k;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let dim = take(1)?[0] as usize;
        if dim != 2 && dim != 3 {
            return Err(corrupt("bad dimension"));
        }
        let mut sizes = Vec::with_capacity(dim);
        for _ in 0..dim {
            sizes.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        if sizes.iter().any(|&s| s != sizes[0]) {
            return Err(IoError::GridMismatch(format!("non-cubic grid {sizes:?}")));
        }
        let n = sizes[0];
        let n_ch = take(1)?[0] as usize;
        let lambda = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let t = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let len = n.pow(dim as u32);
        let payload = take(8 * len * n_ch)?;
        let crc = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("checksum mismatch"));
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        let channels = payload
            .chunks_exact(8 * len)
            .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
            .collect();
        Ok(Self {
            dim,
            n,
            lambda,
            t,
            channels,
        })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<(), IoError> {
    fs::write(path, snap.to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    Snapshot::from_bytes(&fs::read(path)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: SimConfig,
    pub code_version: String,
    pub start_time: f64,
    pub end_time: Option<f64>,
    /// Snapshot file names relative to the run directory, in time order.
    pub checkpoints: Vec<String>,
    pub status: String,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn write_manifest(dir: &Path, m: &RunManifest) -> Result<(), IoError> {
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(m)?)?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<RunManifest, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?)
}

/// Rows of an `energy.csv` file after the header check.
pub fn read_energy_csv(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(IoError::CorruptFile("energy.csv header".into()));
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| IoError::Parse {
                    line: i + 2,
                    message: "bad number".into(),
                })
        })
        .collect()
}

pub struct RunOutput {
    pub records: Vec<EnergyRecord>,
    pub final_state: State,
    pub dir: PathBuf,
}

fn snapshot_name(step: usize) -> String {
    format!("snap_{step:08}.nmq")
}

/// Where a run starts from.
#[derive(Clone, Debug)]
pub enum Start {
    /// Seeded random data.
    Random,
    /// User data; `u` is Leray-projected on ingestion.
    Initial(State),
    /// A checkpoint, used verbatim so the remaining steps are bit-exact.
    Restart(State),
}

/// Runs `config` into `dir`: `manifest.json` first, then `energy.csv` rows
/// and snapshots as they are produced.
pub fn simulate(config: &SimConfig, dir: &Path, start: Start) -> Result<RunOutput, IoError> {
    config.validate().map_err(IoError::Validation)?;
    fs::create_dir_all(dir)?;
    let mut manifest = RunManifest {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        start_time: now(),
        end_time: None,
        checkpoints: Vec::new(),
        status: "running".into(),
    };
    write_manifest(dir, &manifest)?;

    let result = drive(config, dir, start, &mut manifest);
    manifest.end_time = Some(now());
    manifest.status = match &result {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    };
    write_manifest(dir, &manifest)?;
    result
}

fn drive(
    config: &SimConfig,
    dir: &Path,
    start: Start,
    manifest: &mut RunManifest,
) -> Result<RunOutput, IoError> {
    let dynm = Dynamics::new(config.clone())?;
    let grid = &dynm.grid;
    let state = match start {
        Start::Random => random_initial_state(config, grid),
        Start::Initial(mut s) => {
            Snapshot::from_state(grid, &s).to_state(grid)?;
            s.project(grid, config.m_galerkin);
            s
        }
        Start::Restart(s) => {
            Snapshot::from_state(grid, &s).to_state(grid)?;
            s
        }
    };
    let mut csv = BufWriter::new(File::create(dir.join("energy.csv"))?);
    writeln!(csv, "{CSV_HEADER}")?;
    csv.flush()?;

    let total = config.n_steps();
    let start = (state.t / config.dt).round() as usize;
    let mut records: Vec<EnergyRecord> = Vec::new();
    let mut io_err: Option<IoError> = None;
    let result = dynm.run(state, |s, k| {
        let io = (|| -> Result<(), IoError> {
            if k == start || k % config.record_every == 0 || k == total {
                let mut rec = record(&dynm, s)?;
                if let Some(prev) = records.last() {
                    let dt = rec.t - prev.t;
                    let diss = 0.5 * (prev.dissipation + rec.dissipation);
                    rec.residual = ((rec.e - prev.e) / dt + diss).abs() / diss.max(1.0);
                }
                writeln!(csv, "{}", rec.csv_row())?;
                csv.flush()?;
                records.push(rec);
            }
            if k == start || (config.snapshot_every > 0 && k % config.snapshot_every == 0) || k == total {
                let name = snapshot_name(k);
                write_snapshot(&dir.join(&name), &Snapshot::from_state(&dynm.grid, s))?;
                manifest.checkpoints.push(name);
                write_manifest(dir, manifest)?;
            }
            Ok(())
        })();
        io.map_err(|e| match e {
            IoError::Dynamics(d) => d,
            other => {
                io_err = Some(other);
                DynamicsError::InvalidConfig("output failure".into())
            }
        })
    });
    match (result, io_err) {
        (_, Some(e)) => Err(e),
        (Err(e), None) => Err(e.into()),
        (Ok(final_state), None) => Ok(RunOutput {
            records,
            final_state,
            dir: dir.to_path_buf(),
        }),
    }
}

/// Loads every checkpoint of a run directory, in time order.
pub fn load_trajectory(dir: &Path) -> Result<(SimConfig, Grid, Vec<State>), IoError> {
    let manifest = read_manifest(dir)?;
    let cfg = manifest.config;
    let grid = Grid::new(cfg.dim, cfg.n, cfg.lambda).map_err(|e| IoError::Validation(e.to_string()))?;
    let mut states: Vec<State> = Vec::new();
    for name in &manifest.checkpoints {
        let s = read_snapshot(&dir.join(name))?.to_state(&grid)?;
        if states.last().is_some_and(|p| p.t >= s.t) {
            continue;
        }
        states.push(s);
    }
    Ok((cfg, grid, states))
}

/// Certificate along a stored run, stepping between checkpoints.
pub fn certify_trajectory(dir: &Path, n_reg: usize) -> Result<CertificateReport, IoError> {
    let (cfg, grid, states) = load_trajectory(dir)?;
    Ok(certificate(&cfg, &grid, &states, n_reg)?)
}
