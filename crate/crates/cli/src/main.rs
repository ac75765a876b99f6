use std::path::PathBuf;
use std::process::ExitCode;

use alphadpp_cli::{
    emit_report, init_threads, parse_window, run, thread_count, CliError, Command, Experiment, ExperimentConfig, Format,
};
use clap::{Parser, Subcommand};

/// Projection, Parseval and lift experiments for α-determinantal point
/// processes on dyadic Haar trees.
///
/// Settings come from a JSON config (--config); flags override its fields.
/// Exit status: 0 checks passed, 1 a check failed, 2 configuration error,
/// 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "alphadpp", version)]
struct Cli {
    /// JSON experiment config. Without it the built-in defaults apply.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// α as an integer or fraction: 2/m or -1/m [default: -1]
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Tree level ℓ [default: 1]
    #[arg(long, global = true)]
    level: Option<u32>,
    /// Rank truncation R [default: 4]
    #[arg(long, global = true)]
    rank: Option<u32>,
    /// Window as "a,b", aligned to level-ℓ cells [default: 0,1]
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_window)]
    window: Option<[f64; 2]>,
    /// Number of Monte Carlo samples [default: 1000]
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; falls back to ALPHADPP_THREADS, then all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file [default: stdout]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format [default: json]
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Evaluate det_α of a square matrix read from a JSON file
    AlphaDet {
        /// Matrix file: rows of numbers or [re, im] pairs
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Emit the projected kernel matrix and its spectral check
    Project,
    /// Compare projected and Nyström spectra
    Spectrum,
    /// Compare continuum and tree correlation integrals for each query
    Parseval,
    /// Dump lifted samples as JSON lines
    Sample,
    /// Check sampled factorial moments against the continuum values
    VerifyLift,
}

fn configure(cli: &Cli) -> Result<(Command, ExperimentConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(a) = &cli.alpha {
        cfg.alpha = a.clone();
    }
    if let Some(l) = cli.level {
        cfg.level = l;
    }
    if let Some(r) = cli.rank {
        cfg.rank = Some(r);
        cfg.tail_threshold = None;
    }
    if let Some(w) = cli.window {
        cfg.window = w;
    }
    if let Some(n) = cli.samples {
        cfg.sampler.n_samples = n;
    }
    if let Some(s) = cli.seed {
        cfg.sampler.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    let cmd = match &cli.command {
        Sub::AlphaDet { matrix } => {
            if let Some(m) = matrix {
                cfg.matrix_file = Some(m.clone());
            }
            Command::AlphaDet
        }
        Sub::Project => Command::Project,
        Sub::Spectrum => Command::Spectrum,
        Sub::Parseval => Command::Parseval,
        Sub::Sample => Command::Sample,
        Sub::VerifyLift => Command::VerifyLift,
    };
    Ok((cmd, cfg))
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    init_threads(thread_count(cli.threads)?)?;
    let (cmd, cfg) = configure(cli)?;
    let ex = Experiment::prepare(&cfg)?;
    let outcome = run(cmd, &ex)?;
    emit_report(&outcome.artifact, ex.format, ex.out.as_deref())?;
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("alphadpp: check failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("alphadpp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
