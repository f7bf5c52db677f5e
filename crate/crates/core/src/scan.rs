//! Loss scans: configuration, orchestration and CSV output.
//!
//! A scan optimizes the intensities at every `(M, loss)` point and emits one
//! row per point, sorted by `M` and then loss. Points run on the rayon pool;
//! the output order and content do not depend on scheduling.
//!
//! Configuration files are TOML with flat keys:
//!
//! ```toml
//! m_list = [4, 6, 8, 10, 12]
//! loss_start = 0.0
//! loss_end = 60.0
//! loss_step = 1.0
//! det_eff = 0.2
//! dark = 1e-8
//! misalign = 0.015
//! f = 1.1
//! mu_min = 1e-4
//! mu_max = 1.0
//! nu_min = 1e-4
//! nu_max = 1.0
//! grid = 16
//! rounds = 3
//! validate_mc = false
//! mc_trials = 1000000
//! seed = 0
//! out = "scan.csv"
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::channel::{observed_stats, ChannelParams};
use crate::error::Error;
use crate::key_rate::plob_bound;
use crate::param_opt::{optimize_intensities, SearchSpec};
use crate::params::ProtocolParams;
use crate::protocol_mc::run_trials;

/// Environment variable holding the default worker-thread count.
pub const THREADS_ENV: &str = "TFQKD_THREADS";

pub const CSV_HEADER: &str = "m,loss_db,mu,nu,q_mu,e_mu,i_ae,rate,plob";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config field `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
    #[error("config file {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure at M = {m}, loss = {loss_db} dB: {source}")]
    Numerical {
        m: usize,
        loss_db: f64,
        source: Error,
    },
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m_list: Vec<usize>,
    pub loss_start: f64,
    pub loss_end: f64,
    pub loss_step: f64,
    pub det_eff: f64,
    pub dark: f64,
    pub misalign: f64,
    pub f: f64,
    pub search: SearchSpec,
    pub validate_mc: bool,
    pub mc_trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            m_list: vec![4, 6, 8, 10, 12],
            loss_start: 0.0,
            loss_end: 60.0,
            loss_step: 1.0,
            det_eff: 0.2,
            dark: 1e-8,
            misalign: 0.015,
            f: 1.1,
            search: SearchSpec::default(),
            validate_mc: false,
            mc_trials: 1_000_000,
            seed: 0,
            out: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    m_list: Option<Vec<usize>>,
    loss_start: Option<f64>,
    loss_end: Option<f64>,
    loss_step: Option<f64>,
    det_eff: Option<f64>,
    dark: Option<f64>,
    misalign: Option<f64>,
    f: Option<f64>,
    mu_min: Option<f64>,
    mu_max: Option<f64>,
    nu_min: Option<f64>,
    nu_max: Option<f64>,
    grid: Option<usize>,
    rounds: Option<usize>,
    validate_mc: Option<bool>,
    mc_trials: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses a TOML configuration on top of the defaults and validates it.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut cfg = RunConfig::default();
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = file.$field { cfg.$field = v; } )* };
        }
        take!(
            m_list,
            loss_start,
            loss_end,
            loss_step,
            det_eff,
            dark,
            misalign,
            f,
            validate_mc,
            mc_trials,
            seed
        );
        if let Some(v) = file.mu_min {
            cfg.search.mu_range.0 = v;
        }
        if let Some(v) = file.mu_max {
            cfg.search.mu_range.1 = v;
        }
        if let Some(v) = file.nu_min {
            cfg.search.nu_range.0 = v;
        }
        if let Some(v) = file.nu_max {
            cfg.search.nu_range.1 = v;
        }
        if let Some(v) = file.grid {
            cfg.search.grid = v;
        }
        if let Some(v) = file.rounds {
            cfg.search.rounds = v;
        }
        cfg.out = file.out;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m_list.is_empty() {
            return Err(invalid("m_list", "at least one phase count is required"));
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m < 2 || m % 2 != 0) {
            return Err(invalid(
                "m_list",
                format!("phase counts must be even and >= 2, got {m}"),
            ));
        }
        if !(self.loss_step.is_finite() && self.loss_step > 0.0) {
            return Err(invalid(
                "loss_step",
                format!("must be > 0, got {}", self.loss_step),
            ));
        }
        if !(self.loss_start.is_finite() && self.loss_start >= 0.0) {
            return Err(invalid(
                "loss_start",
                format!("must be >= 0, got {}", self.loss_start),
            ));
        }
        if !(self.loss_end.is_finite() && self.loss_end >= self.loss_start) {
            return Err(invalid(
                "loss_end",
                format!("must be >= loss_start, got {}", self.loss_end),
            ));
        }
        if !(0.0..=1.0).contains(&self.det_eff) {
            return Err(invalid(
                "det_eff",
                format!("must lie in [0, 1], got {}", self.det_eff),
            ));
        }
        if !(0.0..=1.0).contains(&self.dark) {
            return Err(invalid(
                "dark",
                format!("must lie in [0, 1], got {}", self.dark),
            ));
        }
        if !(0.0..=0.5).contains(&self.misalign) {
            return Err(invalid(
                "misalign",
                format!("must lie in [0, 0.5], got {}", self.misalign),
            ));
        }
        if !(self.f.is_finite() && self.f >= 1.0) {
            return Err(invalid("f", format!("must be >= 1, got {}", self.f)));
        }
        if let Err(e) = self.search.validate() {
            return Err(invalid("search", e.to_string()));
        }
        if self.validate_mc && self.mc_trials == 0 {
            return Err(invalid("mc_trials", "must be >= 1 when validate_mc is set"));
        }
        Ok(())
    }

    /// Loss values of the scan, inclusive of `loss_end` up to rounding.
    pub fn loss_points(&self) -> Vec<f64> {
        let span = (self.loss_end - self.loss_start) / self.loss_step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.loss_start + i as f64 * self.loss_step)
            .collect()
    }

    fn channel(&self) -> Result<ChannelParams, Error> {
        ChannelParams::new(self.loss_start, self.det_eff, self.dark, self.misalign)
    }

    fn protocol(&self, m: usize) -> Result<ProtocolParams, Error> {
        // Intensities are placeholders; the search replaces them.
        ProtocolParams::new(m, 0.1, 0.01, 0.0, self.f)
    }
}

/// One line of the scan output. Numeric fields are `NaN` when no feasible
/// intensity pair exists at the point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub m: usize,
    pub loss_db: f64,
    pub mu: f64,
    pub nu: f64,
    pub q_mu: f64,
    pub e_mu: f64,
    pub i_ae: f64,
    pub rate: f64,
    pub plob: f64,
}

impl ScanRow {
    pub fn is_feasible(&self) -> bool {
        !self.rate.is_nan()
    }

    fn infeasible(m: usize, loss_db: f64) -> Self {
        ScanRow {
            m,
            loss_db,
            mu: f64::NAN,
            nu: f64::NAN,
            q_mu: f64::NAN,
            e_mu: f64::NAN,
            i_ae: f64::NAN,
            rate: f64::NAN,
            plob: plob_bound(loss_db),
        }
    }
}

/// Largest z-score between the Monte Carlo run and the analytic statistics
/// at one scan point.
#[derive(Debug, Clone, PartialEq)]
pub struct McCheck {
    pub m: usize,
    pub loss_db: f64,
    pub trials: u64,
    pub z_scores: Vec<(&'static str, f64)>,
}

impl McCheck {
    pub fn max_z(&self) -> f64 {
        self.z_scores.iter().map(|(_, z)| *z).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub mc_checks: Vec<McCheck>,
}

/// Optimizes one `(M, loss)` point.
pub fn scan_point(cfg: &RunConfig, m: usize, loss_db: f64) -> Result<ScanRow, Error> {
    let p = cfg.protocol(m)?;
    let ch = cfg.channel()?;
    match optimize_intensities(loss_db, &p, &ch, &cfg.search) {
        Ok(best) => {
            let r = best.point;
            Ok(ScanRow {
                m,
                loss_db,
                mu: r.mu,
                nu: r.nu,
                q_mu: r.q_mu,
                e_mu: r.e_mu,
                i_ae: r.i_ae,
                rate: r.rate,
                plob: r.plob,
            })
        }
        Err(Error::InfeasibleStatistics) => Ok(ScanRow::infeasible(m, loss_db)),
        Err(e) => Err(e),
    }
}

fn mc_check(cfg: &RunConfig, row: &ScanRow, seed: u64) -> Result<McCheck, Error> {
    let p = ProtocolParams::new(row.m, row.mu, row.nu, 0.0, cfg.f)?;
    let ch = cfg.channel()?.with_loss(row.loss_db)?;
    let est = run_trials(&p, &ch, cfg.mc_trials, seed)?;
    let analytic = observed_stats(&p, &ch);
    Ok(McCheck {
        m: row.m,
        loss_db: row.loss_db,
        trials: cfg.mc_trials,
        z_scores: est
            .compare(&analytic)
            .into_iter()
            .map(|(name, prop, expected)| (name, prop.z_score(expected)))
            .collect(),
    })
}

/// Runs the configured scan; writes the CSV to `cfg.out` when set.
pub fn run_scan(cfg: &RunConfig) -> Result<ScanResult, ScanError> {
    cfg.validate()?;
    let mut ms = cfg.m_list.clone();
    ms.sort_unstable();
    ms.dedup();
    let losses = cfg.loss_points();
    let tasks: Vec<(usize, f64)> = ms
        .iter()
        .flat_map(|&m| losses.iter().map(move |&l| (m, l)))
        .collect();

    let rows = tasks
        .par_iter()
        .map(|&(m, loss_db)| {
            scan_point(cfg, m, loss_db).map_err(|source| ScanError::Numerical {
                m,
                loss_db,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mc_checks = if cfg.validate_mc {
        rows.par_iter()
            .enumerate()
            .filter(|(_, r)| r.is_feasible())
            .map(|(i, r)| {
                mc_check(cfg, r, cfg.seed.wrapping_add(i as u64)).map_err(|source| {
                    ScanError::Numerical {
                        m: r.m,
                        loss_db: r.loss_db,
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    if let Some(path) = &cfg.out {
        let mut file = io::BufWriter::new(std::fs::File::create(path)?);
        write_csv(&rows, &mut file)?;
        file.flush()?;
    }
    Ok(ScanResult { rows, mc_checks })
}

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

const CSV_COLUMNS: [&str; 9] = [
    "m", "loss_db", "mu", "nu", "q_mu", "e_mu", "i_ae", "rate", "plob",
];

pub fn write_csv(rows: &[ScanRow], out: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        let mut record = vec![r.m.to_string()];
        record.extend(
            [
                r.loss_db, r.mu, r.nu, r.q_mu, r.e_mu, r.i_ae, r.rate, r.plob,
            ]
            .map(format_float),
        );
        w.write_record(&record)?;
    }
    w.flush()
}

/// Parses output written by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<ScanRow>, String> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| e.to_string())?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(format!("unexpected header {header:?}"));
    }
    reader
        .records()
        .map(|record| {
            let record = record.map_err(|e| e.to_string())?;
            let line = record.position().map_or(0, |p| p.line());
            let num = |k: usize| {
                record[k]
                    .parse::<f64>()
                    .map_err(|e| format!("line {line}: {}: {e}", CSV_COLUMNS[k]))
            };
            Ok(ScanRow {
                m: record[0]
                    .parse()
                    .map_err(|e| format!("line {line}: m: {e}"))?,
                loss_db: num(1)?,
                mu: num(2)?,
                nu: num(3)?,
                q_mu: num(4)?,
                e_mu: num(5)?,
                i_ae: num(6)?,
                rate: num(7)?,
                plob: num(8)?,
            })
        })
        .collect()
}
