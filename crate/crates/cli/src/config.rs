//! Experiment configuration: one JSON document, with command-line overrides.

use std::path::{Path, PathBuf};

use alphadpp::correlation::CorrelationQuery;
use alphadpp::kernel::trace_on_window;
use alphadpp::projection::project_kernel;
use alphadpp::tree::{check_window, level_cells};
use alphadpp::{AlphaParam, BasisIndex, Eigenpair, Interval, KernelSpec, QuadratureSpec, TreeIndex};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest rank tried when the rank is chosen from a tail threshold.
pub const MAX_AUTO_RANK: u32 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelConfig {
    RankOneIndicator {
        support: [f64; 2],
        #[serde(default = "unit_weight")]
        weight: f64,
    },
    FiniteRank {
        level: u32,
        terms: Vec<TermConfig>,
    },
    Gaussian {
        scale: f64,
        amplitude: f64,
    },
    SineWindow {
        band: f64,
    },
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub eigenvalue: f64,
    pub coefficients: Vec<CoefficientConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub index: String,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl KernelConfig {
    pub fn build(&self) -> Result<KernelSpec, CliError> {
        let field = |e: alphadpp::Error| CliError::Config(format!("kernel: {e}"));
        match self {
            KernelConfig::RankOneIndicator { support, weight } => {
                let iv = Interval::new(support[0], support[1]).map_err(field)?;
                KernelSpec::rank_one_indicator(iv, *weight).map_err(field)
            }
            KernelConfig::FiniteRank { level, terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        let coefficients = t
                            .coefficients
                            .iter()
                            .map(|c| Ok((BasisIndex::parse(*level, &c.index)?, Complex64::new(c.re, c.im))))
                            .collect::<alphadpp::Result<Vec<_>>>()?;
                        Ok(Eigenpair {
                            eigenvalue: t.eigenvalue,
                            coefficients,
                        })
                    })
                    .collect::<alphadpp::Result<Vec<_>>>()
                    .map_err(field)?;
                KernelSpec::finite_rank(*level, terms).map_err(field)
            }
            KernelConfig::Gaussian { scale, amplitude } => KernelSpec::gaussian(*scale, *amplitude).map_err(field),
            KernelConfig::SineWindow { band } => KernelSpec::sine_window(*band).map_err(field),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub order: usize,
    pub refinement_level: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = QuadratureSpec::default();
        Self {
            order: q.order,
            refinement_level: q.refinement_level,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub grid_n: usize,
    pub leading: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            grid_n: 512,
            leading: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything a run needs. Missing fields take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub alpha: String,
    pub level: u32,
    /// Rank truncation `R`; exclusive with `tail_threshold`.
    pub rank: Option<u32>,
    /// Smallest rank whose neglected trace is at most this value.
    pub tail_threshold: Option<f64>,
    pub window: [f64; 2],
    /// Each query is a list of cells, repeated cells allowed. Defaults to
    /// the leftmost level-`ℓ` cell of the window.
    pub queries: Option<Vec<Vec<String>>>,
    pub quadrature: QuadratureConfig,
    pub sampler: SamplerConfig,
    pub spectrum: SpectrumConfig,
    /// Absolute slack added to the truncation bound in `parseval`.
    pub parseval_slack: f64,
    /// Matrix for `alpha-det`: rows of numbers or `[re, im]` pairs.
    pub matrix_file: Option<PathBuf>,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::RankOneIndicator {
                support: [0.0, 1.0],
                weight: 1.0,
            },
            alpha: "-1".into(),
            level: 1,
            rank: None,
            tail_threshold: None,
            window: [0.0, 1.0],
            queries: None,
            quadrature: QuadratureConfig::default(),
            sampler: SamplerConfig::default(),
            spectrum: SpectrumConfig::default(),
            parseval_slack: 1e-10,
            matrix_file: None,
            output: OutputConfig::default(),
        }
    }
}

/// Default rank when neither `rank` nor `tail_threshold` is given.
pub const DEFAULT_RANK: u32 = 4;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub kernel: KernelSpec,
    pub alpha: AlphaParam,
    pub level: u32,
    pub rank: u32,
    pub window: Interval,
    pub queries: Vec<CorrelationQuery>,
    pub quad: QuadratureSpec,
    pub n_samples: usize,
    pub seed: u64,
    pub grid_n: usize,
    pub leading: usize,
    pub parseval_slack: f64,
    pub matrix_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Experiment {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let alpha: AlphaParam = cfg.alpha.parse().map_err(|e| CliError::Config(format!("alpha: {e}")))?;
        if cfg.level == 0 {
            return Err(CliError::Config("level: must be at least 1".into()));
        }
        let window =
            Interval::new(cfg.window[0], cfg.window[1]).map_err(|e| CliError::Config(format!("window: {e}")))?;
        check_window(cfg.level, &window).map_err(|e| CliError::Config(format!("window: {e}")))?;
        let kernel = cfg.kernel.build()?;
        let base_quad = QuadratureSpec::new(cfg.quadrature.order, cfg.quadrature.refinement_level)
            .map_err(|e| CliError::Config(format!("quadrature: {e}")))?;

        let rank = match (cfg.rank, cfg.tail_threshold) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "rank: give either rank or tail_threshold, not both".into(),
                ))
            }
            (Some(0), None) => return Err(CliError::Config("rank: must be at least 1".into())),
            (Some(r), None) => r,
            (None, Some(t)) => auto_rank(&kernel, cfg.level, &window, &base_quad, t)?,
            (None, None) => DEFAULT_RANK,
        };

        let default_query = || -> Result<Vec<Vec<String>>, CliError> {
            let cells = level_cells(cfg.level, &window).map_err(|e| CliError::Config(format!("window: {e}")))?;
            Ok(cells.first().map(|c| vec![vec![c.to_string()]]).unwrap_or_default())
        };
        let cells_list = match &cfg.queries {
            Some(q) => q.clone(),
            None => default_query()?,
        };
        let queries = cells_list
            .iter()
            .enumerate()
            .map(|(n, cells)| {
                let diag = |msg: String| CliError::Config(format!("queries[{n}]: {msg}"));
                let cells = cells
                    .iter()
                    .map(|c| c.parse::<TreeIndex>().map_err(|e| diag(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                let q = CorrelationQuery::new(cells, alpha).map_err(|e| diag(e.to_string()))?;
                if q.level() != cfg.level {
                    return Err(diag(format!(
                        "cells are at level {}, config level is {}",
                        q.level(),
                        cfg.level
                    )));
                }
                if !window.contains_interval(&q.hull()) {
                    return Err(diag(format!("cells leave the window {window}")));
                }
                Ok(q)
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Self {
            kernel,
            alpha,
            level: cfg.level,
            rank,
            window,
            queries,
            quad: projection_quadrature(&base_quad, cfg.level, rank),
            n_samples: cfg.sampler.n_samples,
            seed: cfg.sampler.seed,
            grid_n: cfg.spectrum.grid_n,
            leading: cfg.spectrum.leading,
            parseval_slack: cfg.parseval_slack,
            matrix_file: cfg.matrix_file.clone(),
            out: cfg.output.path.clone(),
            format: cfg.output.format,
        })
    }
}

fn projection_quadrature(base: &QuadratureSpec, level: u32, rank: u32) -> QuadratureSpec {
    QuadratureSpec {
        order: base.order,
        refinement_level: base.refinement_level.max(level + rank - 1),
    }
}

/// Smallest `R ≤ MAX_AUTO_RANK` whose neglected window trace is at most `threshold`.
pub fn auto_rank(
    k: &KernelSpec,
    level: u32,
    window: &Interval,
    base: &QuadratureSpec,
    threshold: f64,
) -> Result<u32, CliError> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(CliError::Config("tail_threshold: must be non-negative".into()));
    }
    let lib = |e: alphadpp::Error| CliError::Config(format!("tail_threshold: {e}"));
    let full = projection_quadrature(base, level, MAX_AUTO_RANK);
    let trace = trace_on_window(k, window, &full).map_err(lib)?;
    for r in 1..=MAX_AUTO_RANK {
        let quad = projection_quadrature(base, level, r);
        let p = project_kernel(k, level, r, window, &quad).map_err(lib)?;
        if trace - p.trace() <= threshold {
            return Ok(r);
        }
    }
    Err(CliError::Config(format!(
        "tail_threshold: {threshold} not reached by rank {MAX_AUTO_RANK}"
    )))
}
