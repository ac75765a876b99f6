//! Batch pipelines behind the `alphadpp` binary.
//!
//! Exit codes: 0 all checks passed, 1 a check failed, 2 configuration
//! error, 3 I/O error.

pub mod config;
pub mod report;

use std::fmt;
use std::path::Path;

use alphadpp::alpha_det::det_alpha_dp;
use alphadpp::correlation::verify_parseval;
use alphadpp::kernel::A1Report;
use alphadpp::linalg::hermitian_eigenvalues;
use alphadpp::projection::{project_kernel, spectrum_check};
use alphadpp::sampler::{lift_samples, verify_lift, SampleRecord};
use alphadpp::{AlphaParam, CMatrix, Error};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use config::{Experiment, ExperimentConfig, Format};
pub use report::{emit_report, Artifact};

#[derive(Clone, Debug, PartialEq)]
pub enum CliError {
    /// A check ran and failed.
    Check(String),
    Config(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Check(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Check(m) => write!(f, "check failed: {m}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Spectral violations are failed checks; everything else the library
/// rejects traces back to the configuration.
impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Spectral { .. } => CliError::Check(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    AlphaDet,
    Project,
    Spectrum,
    Parseval,
    Sample,
    VerifyLift,
}

/// Result of a pipeline: what to write and whether its checks passed.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub artifact: Artifact,
    pub passed: bool,
}

pub fn run(cmd: Command, ex: &Experiment) -> Result<Outcome, CliError> {
    match cmd {
        Command::AlphaDet => run_alpha_det(ex),
        Command::Project => run_project(ex),
        Command::Spectrum => run_spectrum(ex),
        Command::Parseval => run_parseval(ex),
        Command::Sample => run_sample(ex),
        Command::VerifyLift => run_verify_lift(ex),
    }
}

/// Matrix entry in a file: a real number or `[re, im]`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

pub fn read_matrix(path: &Path) -> Result<CMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse_matrix(text: &str) -> Result<CMatrix, String> {
    let rows: Vec<Vec<Entry>> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(format!("row {i} has {} entries, expected {n}", r.len()));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| match rows[i][j] {
        Entry::Real(x) => Complex64::new(x, 0.0),
        Entry::Complex([re, im]) => Complex64::new(re, im),
    }))
}

#[derive(Clone, Debug, Serialize)]
struct AlphaDetReport {
    alpha: String,
    dim: usize,
    re: f64,
    im: f64,
}

fn run_alpha_det(ex: &Experiment) -> Result<Outcome, CliError> {
    let path = ex
        .matrix_file
        .as_deref()
        .ok_or_else(|| CliError::Config("matrix_file: alpha-det needs a matrix file (--matrix)".into()))?;
    let a = read_matrix(path)?;
    let d = det_alpha_dp(&a, ex.alpha)?;
    let rep = AlphaDetReport {
        alpha: ex.alpha.to_string(),
        dim: a.nrows(),
        re: d.re,
        im: d.im,
    };
    let row = vec![
        rep.alpha.clone(),
        rep.dim.to_string(),
        report::num(rep.re),
        report::num(rep.im),
    ];
    Ok(Outcome {
        artifact: Artifact::table(&rep, &["alpha", "dim", "re", "im"], vec![row])?,
        passed: true,
    })
}

#[derive(Clone, Debug, Serialize)]
struct ProjectReport {
    kernel: String,
    projection: alphadpp::projection::ProjectedKernelExport,
    a1: A1Report,
}

fn run_project(ex: &Experiment) -> Result<Outcome, CliError> {
    let p = project_kernel(&ex.kernel, ex.level, ex.rank, &ex.window, &ex.quad)?;
    let a1 = A1Report::from_eigenvalues(hermitian_eigenvalues(&p.matrix), ex.alpha);
    let passed = a1.passed;
    let export = p.export();
    let labels: Vec<String> = export.indices.clone();
    let rows = (0..p.dim())
        .flat_map(|i| (0..p.dim()).map(move |j| (i, j)))
        .map(|(i, j)| {
            let z = p.matrix[(i, j)];
            vec![
                labels[i].clone(),
                labels[j].clone(),
                report::num(z.re),
                report::num(z.im),
            ]
        })
        .collect();
    let rep = ProjectReport {
        kernel: ex.kernel.kind_name().into(),
        projection: export,
        a1,
    };
    Ok(Outcome {
        artifact: Artifact::table(&rep, &["row", "col", "re", "im"], rows)?,
        passed,
    })
}

fn run_spectrum(ex: &Experiment) -> Result<Outcome, CliError> {
    let p = project_kernel(&ex.kernel, ex.level, ex.rank, &ex.window, &ex.quad)?;
    let rep = spectrum_check(&ex.kernel, &p, ex.grid_n, ex.leading)?;
    let rows = rep
        .projected
        .iter()
        .zip(&rep.nystrom)
        .enumerate()
        .map(|(k, (a, b))| vec![k.to_string(), report::num(*a), report::num(*b)])
        .collect();
    Ok(Outcome {
        passed: rep.passed,
        artifact: Artifact::table(&rep, &["k", "projected", "nystrom"], rows)?,
    })
}

#[derive(Clone, Debug, Serialize)]
struct ParsevalSummary {
    alpha: String,
    slack: f64,
    passed: bool,
    reports: Vec<alphadpp::correlation::ParsevalReport>,
}

fn run_parseval(ex: &Experiment) -> Result<Outcome, CliError> {
    let reports = ex
        .queries
        .iter()
        .map(|q| verify_parseval(&ex.kernel, q, ex.rank, &ex.quad))
        .collect::<alphadpp::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.within_bound(ex.parseval_slack));
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                r.m.to_string(),
                r.level.to_string(),
                r.rank.to_string(),
                report::num(r.lhs),
                report::num(r.rhs),
                report::num(r.gap),
                report::num(r.tail_bound),
            ]
        })
        .collect();
    let summary = ParsevalSummary {
        alpha: ex.alpha.to_string(),
        slack: ex.parseval_slack,
        passed,
        reports,
    };
    Ok(Outcome {
        artifact: Artifact::table(
            &summary,
            &["m", "level", "rank", "lhs", "rhs", "gap", "tail_bound"],
            rows,
        )?,
        passed,
    })
}

fn run_sample(ex: &Experiment) -> Result<Outcome, CliError> {
    let p = project_kernel(&ex.kernel, ex.level, ex.rank, &ex.window, &ex.quad)?;
    let samples = lift_samples(&p, ex.alpha, ex.n_samples, ex.seed)?;
    let records: Vec<SampleRecord> = samples.iter().map(SampleRecord::from).collect();
    let rows = records
        .iter()
        .enumerate()
        .flat_map(|(n, r)| {
            r.indices
                .iter()
                .zip(&r.points)
                .map(move |(i, x)| vec![n.to_string(), i.clone(), report::num(*x)])
        })
        .collect();
    Ok(Outcome {
        artifact: Artifact::lines(&records, &["sample", "index", "point"], rows)?,
        passed: true,
    })
}

fn run_verify_lift(ex: &Experiment) -> Result<Outcome, CliError> {
    if ex.queries.is_empty() {
        return Err(CliError::Config("queries: verify-lift needs at least one query".into()));
    }
    let rep = verify_lift(
        &ex.kernel,
        ex.alpha,
        ex.level,
        ex.rank,
        &ex.window,
        &ex.queries,
        ex.n_samples,
        ex.seed,
    )?;
    let rows = rep
        .queries
        .iter()
        .map(|q| {
            vec![
                q.cells.join(" "),
                q.m.to_string(),
                report::num(q.empirical),
                report::num(q.stderr),
                report::num(q.analytic),
                report::num(q.truncation_bound),
                report::num(q.difference),
                q.passed.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        passed: rep.passed,
        artifact: Artifact::table(
            &rep,
            &[
                "cells",
                "m",
                "empirical",
                "stderr",
                "analytic",
                "truncation_bound",
                "difference",
                "passed",
            ],
            rows,
        )?,
    })
}

/// Worker count from the flag, else `ALPHADPP_THREADS`, else rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return match n {
            0 => Err(CliError::Config("threads: must be at least 1".into())),
            n => Ok(Some(n)),
        };
    }
    match std::env::var("ALPHADPP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "ALPHADPP_THREADS: expected a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

pub fn init_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    Ok(())
}

/// Parses `"a,b"`.
pub fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b, got {s:?}"))?;
    let a = a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}"))?;
    let b = b.trim().parse::<f64>().map_err(|e| format!("{b:?}: {e}"))?;
    Ok([a, b])
}

/// Checks an α string without building an experiment.
pub fn parse_alpha(s: &str) -> Result<AlphaParam, CliError> {
    s.parse().map_err(|e: Error| CliError::Config(format!("alpha: {e}")))
}
