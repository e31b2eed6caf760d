//! Batch experiment runner: configuration, subcommands and artifact emission.

pub mod config;
pub mod output;
pub mod run;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{parse_config, parse_hurst, parse_n_range, ConfigError, ExperimentConfig, ValidatedConfig};
pub use output::{emit_plot_data, read_results_csv, CliError, Table};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FRONTIER_OUT_DIR";
/// Output directory used when neither flag, file nor environment set one.
pub const DEFAULT_OUT_DIR: &str = "frontier-out";

#[derive(Debug, Parser)]
#[command(
    name = "frontier",
    version,
    about = "Moment and divergence experiments for fractional-noise wave equations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the regime of a Hurst vector.
    Classify(Overrides),
    /// Second moments of the renormalized Levy area over a range of n.
    LevyScan(Overrides),
    /// Wave moment functionals (ia, ib, kh or probe; see `wave.quantity`).
    WaveMoment(Overrides),
    /// Divergence functional over a range of n with a growth fit.
    Diverge(Overrides),
    /// Divergence fits over a grid of Hurst vectors.
    ThresholdScan(Overrides),
    /// Monte Carlo second moment of the pairing with a test function.
    Simulate(Overrides),
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Spatial dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Comma-separated Hurst vector H0,H1,...,Hd.
    #[arg(long, allow_hyphen_values = true)]
    pub hurst: Option<String>,
    /// Inclusive range A..B of cutoff levels.
    #[arg(long = "n", value_name = "A..B")]
    pub n_range: Option<String>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Monte Carlo points per integral.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Command {
    pub fn parts(&self) -> (config::ExperimentKind, &Overrides) {
        use config::ExperimentKind as K;
        match self {
            Command::Classify(o) => (K::Classify, o),
            Command::LevyScan(o) => (K::LevyScan, o),
            Command::WaveMoment(o) => (K::WaveMoment, o),
            Command::Diverge(o) => (K::Diverge, o),
            Command::ThresholdScan(o) => (K::ThresholdScan, o),
            Command::Simulate(o) => (K::Simulate, o),
        }
    }
}

/// Loads the config file if given and applies flag overrides.
pub fn load_config(o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut c = match &o.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            parse_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = o.d {
        c.d = Some(v);
    }
    if let Some(v) = &o.hurst {
        c.hurst = Some(config::HurstInput::Text(v.clone()));
    }
    if let Some(v) = &o.n_range {
        c.n_range = Some(v.clone());
    }
    if let Some(v) = o.replicas {
        c.replicas = Some(v);
    }
    if let Some(v) = o.seed {
        c.seed = Some(v);
    }
    if let Some(v) = o.tol {
        c.tol = Some(v);
    }
    if let Some(v) = o.samples {
        c.samples = Some(v);
    }
    if let Some(v) = &o.out {
        c.out = Some(v.clone());
    }
    if let Some(v) = o.threads {
        c.threads = Some(v);
    }
    Ok(c)
}

/// Flag, then file, then environment, then the built-in default.
pub fn resolve_out_dir(c: &ExperimentConfig) -> PathBuf {
    c.out
        .clone()
        .or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn report_error(e: &CliError, out: Option<&Path>, stderr: &mut dyn Write) {
    let record = e.record();
    let json = serde_json::to_string(&record).expect("error records serialize");
    let _ = writeln!(stderr, "{json}");
    if let Some(dir) = out {
        if output::ensure_dir(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), json + "\n");
        }
    }
}

/// Runs a parsed command, printing to the given streams; returns the exit code.
///
/// Exit codes: 0 success, 1 computation failure, 2 configuration error, 3 I/O error.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let (kind, o) = cli.command.parts();
    let raw = match load_config(o) {
        Ok(c) => c,
        Err(e) => {
            report_error(&e, o.out.as_deref(), stderr);
            return exit_code(&e);
        }
    };
    let out = resolve_out_dir(&raw);
    if let Some(k) = raw.experiment {
        if k != kind {
            let e = CliError::Config(ConfigError::new(
                "experiment",
                format!("config is for `{}` but `{}` was requested", k.as_str(), kind.as_str()),
            ));
            report_error(&e, Some(&out), stderr);
            return exit_code(&e);
        }
    }
    let cfg = match raw.validate(kind) {
        Ok(c) => c,
        Err(e) => {
            let e = CliError::Config(e);
            report_error(&e, Some(&out), stderr);
            return exit_code(&e);
        }
    };
    let threads = raw.threads.unwrap_or_else(default_threads);
    match run::run(&cfg, &out, threads) {
        Ok(report) => {
            let _ = writeln!(stdout, "{}", report.summary);
            match report.failure {
                Some(f) => {
                    let e = CliError::Compute(f);
                    report_error(&e, Some(&out), stderr);
                    exit_code(&e)
                }
                None => 0,
            }
        }
        Err(e) => {
            report_error(&e, Some(&out), stderr);
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Config(_) => 2,
        CliError::Io { .. } => 3,
        CliError::Compute(_) | CliError::Table(_) => 1,
    }
}
