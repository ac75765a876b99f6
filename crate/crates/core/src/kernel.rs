//! Admissible kernels on ℝ and their spectral validation.

use num_complex::Complex64;

use crate::alpha::AlphaParam;
use crate::error::{contract, Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::projection::project_kernel;
use crate::quadrature::{QuadGrid, QuadratureSpec};
use crate::tree::{BasisIndex, Interval};

/// Spectral tolerance used by every (A1) check.
pub const SPECTRAL_TOL: f64 = 1e-8;

const ORTHONORMAL_TOL: f64 = 1e-10;
const MAX_DYADIC_LEVEL: u32 = 40;

/// One term `λ φ(x) φ̄(y)` of a finite-rank kernel, with `φ` given by its
/// coefficients in the level-`ℓ` basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenpair {
    pub eigenvalue: f64,
    pub coefficients: Vec<(BasisIndex, Complex64)>,
}

impl Eigenpair {
    pub fn eval(&self, x: f64) -> Complex64 {
        self.coefficients.iter().map(|(b, c)| c * b.eval(x)).sum()
    }

    fn inner(&self, other: &Eigenpair) -> Complex64 {
        self.coefficients
            .iter()
            .map(|(b, c)| {
                other
                    .coefficients
                    .iter()
                    .filter(|(d, _)| d == b)
                    .map(|(_, e)| c.conj() * e)
                    .sum::<Complex64>()
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelSpec {
    /// `w · 1_S(x) 1_S(y)`, eigenvalue `w·|S|`.
    RankOneIndicator { support: Interval, weight: f64 },
    /// `Σ_k λ_k φ_k(x) φ̄_k(y)` with orthonormal Haar-expanded `φ_k`.
    FiniteRank { level: u32, terms: Vec<Eigenpair> },
    /// `c · exp(-(x-y)²/γ²)`.
    Gaussian { scale: f64, amplitude: f64 },
    /// `sin(πβ(x-y)) / (π(x-y))`, equal to `β` on the diagonal.
    SineWindow { band: f64 },
}

impl KernelSpec {
    pub fn rank_one_indicator(support: Interval, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::Config(format!("indicator weight {weight} must be ≥ 0")));
        }
        if support.dyadic_level(MAX_DYADIC_LEVEL).is_none() {
            return Err(Error::Config(format!(
                "indicator support {support} needs dyadic endpoints"
            )));
        }
        Ok(Self::RankOneIndicator { support, weight })
    }

    /// Validates levels, non-negative eigenvalues and orthonormality of the
    /// eigenfunction coefficient vectors.
    pub fn finite_rank(level: u32, terms: Vec<Eigenpair>) -> Result<Self> {
        for (k, t) in terms.iter().enumerate() {
            if !(t.eigenvalue.is_finite() && t.eigenvalue >= 0.0) {
                return Err(Error::Config(format!(
                    "eigenvalue {} of term {k} must be ≥ 0",
                    t.eigenvalue
                )));
            }
            for (idx, (b, _)) in t.coefficients.iter().enumerate() {
                if b.level() != level {
                    return Err(Error::Config(format!(
                        "term {k}: basis label {b} is at level {}, kernel level is {level}",
                        b.level()
                    )));
                }
                if t.coefficients[..idx].iter().any(|(d, _)| d == b) {
                    return Err(Error::Config(format!("term {k}: repeated basis label {b}")));
                }
            }
        }
        for (p, a) in terms.iter().enumerate() {
            for (q, b) in terms.iter().enumerate().skip(p) {
                let g = a.inner(b);
                let target = if p == q { 1.0 } else { 0.0 };
                if (g - target).norm() > ORTHONORMAL_TOL {
                    return Err(Error::Config(format!(
                        "eigenfunctions {p} and {q} are not orthonormal (inner product {g})"
                    )));
                }
            }
        }
        Ok(Self::FiniteRank { level, terms })
    }

    pub fn gaussian(scale: f64, amplitude: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0 && amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::Config(format!(
                "gaussian kernel needs scale > 0 and amplitude ≥ 0, got {scale}, {amplitude}"
            )));
        }
        Ok(Self::Gaussian { scale, amplitude })
    }

    pub fn sine_window(band: f64) -> Result<Self> {
        if !(band.is_finite() && band > 0.0) {
            return Err(Error::Config(format!("sine kernel band {band} must be > 0")));
        }
        Ok(Self::SineWindow { band })
    }

    pub fn eval(&self, x: f64, y: f64) -> Complex64 {
        match self {
            Self::RankOneIndicator { support, weight } => {
                let v = if support.contains(x) && support.contains(y) {
                    *weight
                } else {
                    0.0
                };
                Complex64::new(v, 0.0)
            }
            Self::FiniteRank { terms, .. } => terms.iter().map(|t| t.eval(x) * t.eval(y).conj() * t.eigenvalue).sum(),
            Self::Gaussian { scale, amplitude } => {
                let d = (x - y) / scale;
                Complex64::new(amplitude * (-d * d).exp(), 0.0)
            }
            Self::SineWindow { band } => {
                let d = x - y;
                let t = std::f64::consts::PI * d;
                let v = if t.abs() < 1e-8 {
                    // series to second order keeps the diagonal smooth
                    let bt = band * t;
                    band * (1.0 - bt * bt / 6.0)
                } else {
                    (band * t).sin() / t
                };
                Complex64::new(v, 0.0)
            }
        }
    }

    /// Finest dyadic level at which the kernel has jumps; quadrature cells
    /// must be at least this fine to integrate it exactly.
    pub fn breakpoint_level(&self) -> Option<u32> {
        match self {
            Self::RankOneIndicator { support, .. } => support.dyadic_level(MAX_DYADIC_LEVEL),
            Self::FiniteRank { terms, .. } => terms
                .iter()
                .flat_map(|t| t.coefficients.iter().map(|(b, _)| b.path().rank()))
                .max(),
            _ => None,
        }
    }

    /// Declared spectrum where it is known in closed form.
    pub fn declared_eigenvalues(&self) -> Option<Vec<f64>> {
        match self {
            Self::RankOneIndicator { support, weight } => Some(vec![weight * support.len()]),
            Self::FiniteRank { terms, .. } => Some(terms.iter().map(|t| t.eigenvalue).collect()),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::RankOneIndicator { .. } => "rank-one-indicator",
            Self::FiniteRank { .. } => "finite-rank",
            Self::Gaussian { .. } => "gaussian",
            Self::SineWindow { .. } => "sine-window",
        }
    }
}

pub fn eval_kernel(k: &KernelSpec, x: f64, y: f64) -> Complex64 {
    k.eval(x, y)
}

/// `∫_A K(x,x) dx` by composite Gauss–Legendre on dyadic cells, refined to
/// the kernel's own breakpoints.
pub fn trace_on_window(k: &KernelSpec, window: &Interval, quad: &QuadratureSpec) -> Result<f64> {
    let spec = quad.refined_to(k.breakpoint_level());
    let grid = QuadGrid::new(window, &spec)?;
    Ok(grid.integrate(|x| k.eval(x, x).re))
}

/// Outcome of an (A1) spectral check.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct A1Report {
    pub alpha: String,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub lower: f64,
    /// `-1/α` for α < 0, `+∞` (serialized as null) otherwise.
    pub upper: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub offending: Option<f64>,
}

impl A1Report {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, alpha: AlphaParam) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let upper = alpha.spectral_upper_bound();
        let offending = eigenvalues
            .iter()
            .copied()
            .find(|&e| !(e >= -SPECTRAL_TOL && e <= upper + SPECTRAL_TOL));
        Self {
            alpha: alpha.to_string(),
            eigenvalues,
            lower: 0.0,
            upper: upper.is_finite().then_some(upper),
            tolerance: SPECTRAL_TOL,
            passed: offending.is_none(),
            offending,
        }
    }

    pub fn into_result(self) -> Result<Self> {
        match self.offending {
            None => Ok(self),
            Some(e) => Err(Error::Spectral {
                eigenvalue: e,
                lower: self.lower,
                upper: self.upper.unwrap_or(f64::INFINITY),
            }),
        }
    }
}

/// (A1) check on the Galerkin matrix of `K` at level `ℓ`, rank `R`. Declared
/// eigenvalues of finite-rank kernels are checked as well, since a declared
/// eigenfunction may lie outside the window.
pub fn validate_a1(k: &KernelSpec, alpha: AlphaParam, level: u32, window: &Interval, rank: u32) -> Result<A1Report> {
    if rank == 0 {
        return Err(contract("rank truncation must be at least 1"));
    }
    let p = project_kernel(k, level, rank, window, &QuadratureSpec::for_projection(level, rank))?;
    let mut eigs = hermitian_eigenvalues(&p.matrix);
    if let Some(declared) = k.declared_eigenvalues() {
        let report = A1Report::from_eigenvalues(declared, alpha);
        report.into_result()?;
    }
    eigs.sort_by(|a, b| b.total_cmp(a));
    A1Report::from_eigenvalues(eigs, alpha).into_result()
}
