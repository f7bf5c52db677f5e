//! `tfqkd`: key rate versus channel loss for discrete-phase twin-field QKD.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 on a numerical
//! failure, 1 on an I/O error.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tfqkd::scan::{write_csv, ConfigError, ScanError, THREADS_ENV};
use tfqkd::{run_scan, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "tfqkd",
    version,
    about = "Scan the asymptotic secret-key rate against channel loss"
)]
struct Args {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated phase counts, e.g. 4,6,8.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    m_list: Option<Vec<usize>>,
    #[arg(long)]
    loss_start: Option<f64>,
    #[arg(long)]
    loss_end: Option<f64>,
    #[arg(long)]
    loss_step: Option<f64>,
    /// Dark-count probability per pulse per detector.
    #[arg(long)]
    dark: Option<f64>,
    #[arg(long)]
    det_eff: Option<f64>,
    #[arg(long)]
    misalign: Option<f64>,
    /// Error-correction inefficiency.
    #[arg(long)]
    f: Option<f64>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cross-check every optimized point against the Monte Carlo simulator.
    #[arg(long)]
    validate_mc: bool,
    #[arg(long)]
    mc_trials: Option<u64>,
}

impl Args {
    fn into_config(self) -> Result<RunConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { cfg.$field = v; } )* };
        }
        set!(m_list, loss_start, loss_end, loss_step, dark, det_eff, misalign, f, seed, mc_trials);
        if self.out.is_some() {
            cfg.out = self.out;
        }
        cfg.validate_mc |= self.validate_mc;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn run(cfg: &RunConfig) -> Result<(), ScanError> {
    let result = run_scan(cfg)?;
    if cfg.out.is_none() {
        let stdout = io::stdout();
        let mut lock = stdout.lock();
        write_csv(&result.rows, &mut lock)?;
        lock.flush()?;
    }
    let infeasible = result.rows.iter().filter(|r| !r.is_feasible()).count();
    if infeasible > 0 {
        eprintln!(
            "warning: {infeasible} point(s) had no feasible intensity pair; their fields are NaN"
        );
    }
    for check in &result.mc_checks {
        let (name, z) =
            check
                .z_scores
                .iter()
                .copied()
                .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
        eprintln!(
            "mc: M={} loss={} dB trials={} max |z| = {z:.2} ({name})",
            check.m, check.loss_db, check.trials
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let cfg = match args.into_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                ScanError::Config(_) => 2,
                ScanError::Numerical { .. } => 3,
                ScanError::Io(_) => 1,
            })
        }
    }
}
