//! Command-line front end for the subband-adapt library.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 runtime
//! (numerical or output I/O) error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use subband_adapt::config::{self, ConfigError};
use subband_adapt::filterbank::{validate_bank, AnalysisBank};
use subband_adapt::presets::{self, PresetError, PresetName, PresetOptions};
use subband_adapt::signals;
use subband_adapt::sim::{self, SimError};
use subband_adapt::adaptive::Weighting;

#[derive(Parser)]
#[command(name = "subband-adapt", version, about = "Proportionate subband adaptive filter experiments")]
struct Cli {
    /// Worker threads for ensemble runs; falls back to the
    /// SUBBAND_ADAPT_THREADS environment variable, then to all cores.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its MSE curve as CSV.
    Run {
        /// Sectioned key=value config file; optional if --set covers
        /// everything needed.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Config override, e.g. --set filter.p=1.2 (repeatable).
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
        /// Output CSV path.
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Regenerate the data behind one of the study figures.
    Preset {
        /// fig4-grid, fig5-best-p, or fig6-comparison.
        name: String,
        /// Run-count factor: round(1000*scale) runs per curve, in (0, 1].
        #[arg(long, default_value_t = 0.1)]
        scale: f64,
        /// Directory for the emitted CSV files (created if missing).
        #[arg(long, value_name = "DIR")]
        output_dir: PathBuf,
        /// Master seed shared by every curve of the preset.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Samples per run.
        #[arg(long, default_value_t = 20000)]
        samples: usize,
    },
    /// Design an analysis bank and write its impulse responses as CSV
    /// (one row per tap, one column per band).
    DesignBank {
        /// Number of bands M.
        #[arg(short = 'M', long)]
        bands: usize,
        /// Analysis filter length N.
        #[arg(short = 'N', long)]
        len: usize,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Generate a target impulse response as a single-column CSV.
    GenTarget {
        /// sparse, quasi-sparse, or dispersive.
        #[arg(long)]
        kind: String,
        /// Impulse response length.
        #[arg(short = 'L', long, default_value_t = 256)]
        len: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Check a config without running it; prints the resolved settings
    /// and the analysis-bank report.
    Validate {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
        set: Vec<String>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: String) -> Self {
        Failure { code: 1, message }
    }

    fn runtime(message: String) -> Self {
        Failure { code: 2, message }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            // Bad experiment shapes are configuration mistakes; anything
            // that surfaces mid-run is a numerical failure.
            SimError::InvalidExperiment { .. } | SimError::Signal(_) => {
                Failure::invalid(e.to_string())
            }
            _ => Failure::runtime(e.to_string()),
        }
    }
}

impl From<PresetError> for Failure {
    fn from(e: PresetError) -> Self {
        match e {
            PresetError::InvalidScale { .. } | PresetError::Bank(_) => {
                Failure::invalid(e.to_string())
            }
            PresetError::Sim(e) => e.into(),
            PresetError::Io { .. } => Failure::runtime(e.to_string()),
        }
    }
}

fn write_failure(path: &Path, source: std::io::Error) -> Failure {
    Failure::runtime(format!("{}: {source}", path.display()))
}

fn init_threads(cli_threads: Option<usize>) -> Result<(), Failure> {
    let threads = match cli_threads {
        Some(n) => Some(n),
        None => match std::env::var("SUBBAND_ADAPT_THREADS") {
            Ok(v) => Some(v.parse::<usize>().map_err(|_| {
                Failure::invalid(format!("SUBBAND_ADAPT_THREADS must be a positive integer, got '{v}'"))
            })?),
            Err(_) => None,
        },
    };
    let Some(threads) = threads else { return Ok(()) };
    if threads == 0 {
        return Err(Failure::invalid("thread count must be at least 1".to_string()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::runtime(format!("thread pool setup failed: {e}")))
}

fn float_csv(v: f64) -> String {
    format!("{v:?}")
}

fn cmd_run(config: Option<&Path>, set: &[String], output: &Path) -> Result<(), Failure> {
    let cfg = config::parse_config(config, set)?;
    let curve = sim::run_ensemble(&cfg)?;
    sim::write_curve_csv(output, &curve).map_err(|e| write_failure(output, e))?;
    let m = sim::convergence_metrics(&curve, -20.0);
    let reached = match m.samples_to_threshold {
        Some(n) => format!("{n}"),
        None => "never".to_string(),
    };
    println!(
        "wrote {} ({} samples); floor {:.2} dB, terminal {:.2} dB, -20 dB at {reached}",
        output.display(),
        curve.values_db.len(),
        curve.floor_db,
        m.terminal_db,
    );
    Ok(())
}

fn cmd_preset(
    name: &str,
    scale: f64,
    output_dir: &Path,
    seed: u64,
    samples: usize,
) -> Result<(), Failure> {
    let name: PresetName = name.parse().map_err(Failure::invalid)?;
    let opts = PresetOptions { scale, master_seed: seed, num_samples: samples };
    let files = presets::run_preset(name, &opts, output_dir)?;
    for f in &files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_design_bank(bands: usize, len: usize, output: &Path) -> Result<(), Failure> {
    let bank = AnalysisBank::design(bands, len).map_err(|e| Failure::invalid(e.to_string()))?;
    let report = validate_bank(&bank);
    let mut csv = String::new();
    for k in 0..bank.filter_len() {
        let row: Vec<String> = (0..bank.num_bands()).map(|i| float_csv(bank.filter(i)[k])).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    std::fs::write(output, csv).map_err(|e| write_failure(output, e))?;
    println!("wrote {} ({}x{} bank)", output.display(), bank.filter_len(), bank.num_bands());
    println!("power complementarity residual = {:.6}", report.power_complementarity_residual);
    let peaks: Vec<String> =
        report.band_peak_frequencies.iter().map(|w| format!("{w:.4}")).collect();
    println!("band peaks (rad) = [{}]", peaks.join(", "));
    Ok(())
}

fn cmd_gen_target(kind: &str, len: usize, seed: u64, output: &Path) -> Result<(), Failure> {
    let kind = config::parse_target_kind(kind).ok_or_else(|| {
        Failure::invalid(format!(
            "target kind must be sparse, quasi-sparse, or dispersive, got '{kind}'"
        ))
    })?;
    if len == 0 {
        return Err(Failure::invalid("target length must be at least 1".to_string()));
    }
    let target = signals::gen_target(kind, len, seed);
    let mut csv = String::with_capacity(20 * len);
    for t in &target.taps {
        csv.push_str(&float_csv(*t));
        csv.push('\n');
    }
    std::fs::write(output, csv).map_err(|e| write_failure(output, e))?;
    let nonzeros = target.taps.iter().filter(|t| **t != 0.0).count();
    println!("wrote {} ({len} taps, {nonzeros} nonzero, energy {:.3})", output.display(), target.energy);
    Ok(())
}

fn cmd_validate(config: Option<&Path>, set: &[String]) -> Result<(), Failure> {
    let cfg = config::parse_config(config, set)?;
    let f = &cfg.filter;
    println!("config ok");
    println!(
        "filter: variant={:?} L={} M={} N={}",
        f.variant,
        f.num_taps,
        f.bank.num_bands(),
        f.bank.filter_len()
    );
    match f.weighting {
        Weighting::PNorm { p, c } => println!("weighting: p={p} c={c}"),
        Weighting::Identity => println!("weighting: identity"),
    }
    println!("params: mu={} delta={} tau={}", f.params.mu, f.params.delta, f.params.tau);
    println!(
        "run: runs={} samples={} seed={} rho={} burn_in={} noise_variance={}",
        cfg.num_runs, cfg.num_samples, cfg.master_seed, cfg.input.rho, cfg.input.burn_in,
        cfg.noise.variance
    );
    let report = validate_bank(&f.bank);
    println!("bank residual = {:.6}", report.power_complementarity_residual);
    let peaks: Vec<String> =
        report.band_peak_frequencies.iter().map(|w| format!("{w:.4}")).collect();
    println!("band peaks (rad) = [{}]", peaks.join(", "));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Keep the documented code space: help/version are success,
            // every argument mistake is a validation error.
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = init_threads(cli.threads).and_then(|()| match &cli.command {
        Command::Run { config, set, output } => cmd_run(config.as_deref(), set, output),
        Command::Preset { name, scale, output_dir, seed, samples } => {
            cmd_preset(name, *scale, output_dir, *seed, *samples)
        }
        Command::DesignBank { bands, len, output } => cmd_design_bank(*bands, *len, output),
        Command::GenTarget { kind, len, seed, output } => cmd_gen_target(kind, *len, *seed, output),
        Command::Validate { config, set } => cmd_validate(config.as_deref(), set),
    });

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
