//! Sampling the tree process `ν_F(ℓ)`, its lift with independent marks,
//! and factorial-moment estimates on the unlabeled configurations.
//!
//! The discrete process lives on the finite index set of a
//! [`ProjectedKernel`]. For `α = -1/m` it is the superposition of `m`
//! independent determinantal processes with kernel `K_F/m`; for `α = 2/m`
//! the superposition of `m` independent Cox processes driven by squared
//! centered Gaussian fields with covariance `K_F/m`. Both have Laplace
//! functional `Det(I + α K̂)^{-1/α}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::alpha::AlphaParam;
use crate::alpha_det::CMatrix;
use crate::correlation::{lhs_parseval, parseval_tail_bound, CorrelationQuery};
use crate::error::{contract, Result};
use crate::kernel::{trace_on_window, A1Report, KernelSpec};
use crate::linalg::hermitian_eigen;
use crate::projection::{project_kernel, tail_trace, ProjectedKernel};
use crate::quadrature::QuadratureSpec;
use crate::stats::{ks_uniform, mean_stderr, KsResult};
use crate::tree::{check_window, level_cells, BasisIndex, Interval, TreeIndex};

/// Largest imaginary part tolerated when the Cox branch reads `K_F` as real.
const REAL_TOL: f64 = 1e-10;

/// A finite multiset of basis labels, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DiscreteConfiguration {
    pub indices: Vec<BasisIndex>,
}

impl DiscreteConfiguration {
    pub fn new(mut indices: Vec<BasisIndex>) -> Self {
        indices.sort();
        Self { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Labels with their marks `s_n ∈ B_{ℓ,i_n}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LiftedConfiguration {
    pub points: Vec<(BasisIndex, f64)>,
}

impl LiftedConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn marks_contained(&self) -> bool {
        self.points.iter().all(|(b, s)| b.support().contains(*s))
    }
}

/// Unlabeled points on ℝ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContinuumConfiguration {
    pub points: Vec<f64>,
}

impl ContinuumConfiguration {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

enum Branch {
    Determinantal {
        eigenvalues: Vec<f64>,
        eigenvectors: CMatrix,
    },
    Cox {
        root: DMatrix<f64>,
    },
}

/// Precomputed spectral data for repeated draws from `ν_F(ℓ)`.
pub struct DiscreteSampler {
    indices: Vec<BasisIndex>,
    components: u32,
    branch: Branch,
}

impl DiscreteSampler {
    /// Checks (A1) on `K_F` and prepares the branch for `α`.
    pub fn new(p: &ProjectedKernel, alpha: AlphaParam) -> Result<Self> {
        let (eigenvalues, eigenvectors) = hermitian_eigen(&p.matrix);
        A1Report::from_eigenvalues(eigenvalues.clone(), alpha).into_result()?;
        let m = alpha.superposition_count();
        let branch = if alpha.is_negative() {
            let scaled = eigenvalues.iter().map(|e| (e / m as f64).clamp(0.0, 1.0)).collect();
            Branch::Determinantal {
                eigenvalues: scaled,
                eigenvectors,
            }
        } else {
            Branch::Cox {
                root: real_sqrt(&p.matrix, m)?,
            }
        };
        Ok(Self {
            indices: p.indices.clone(),
            components: m,
            branch,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DiscreteConfiguration {
        let mut picked: Vec<usize> = Vec::new();
        for _ in 0..self.components {
            match &self.branch {
                Branch::Determinantal {
                    eigenvalues,
                    eigenvectors,
                } => sample_projection_dpp(eigenvalues, eigenvectors, rng, &mut picked),
                Branch::Cox { root } => sample_gaussian_cox(root, rng, &mut picked),
            }
        }
        DiscreteConfiguration::new(picked.into_iter().map(|k| self.indices[k]).collect())
    }
}

/// Symmetric square root of `Re(K_F)/m`, negative round-off clipped to zero.
fn real_sqrt(k: &CMatrix, m: u32) -> Result<DMatrix<f64>> {
    let scale = k.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let worst_im = k.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst_im > REAL_TOL * scale {
        return Err(contract(format!(
            "the α > 0 sampler needs a real symmetric kernel matrix (imaginary part {worst_im:e})"
        )));
    }
    let n = k.nrows();
    let re = DMatrix::from_fn(n, n, |i, j| 0.5 * (k[(i, j)].re + k[(j, i)].re) / m as f64);
    let eig = SymmetricEigen::new(re);
    let roots = eig.eigenvalues.map(|e| if e > 0.0 { e.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Spectral sampler: keep eigenvector `k` with probability `λ_k`, then draw
/// one point per kept vector from the projection kernel they span.
fn sample_projection_dpp<R: Rng + ?Sized>(
    eigenvalues: &[f64],
    eigenvectors: &CMatrix,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    let n = eigenvectors.nrows();
    let mut cols: Vec<DVector<Complex64>> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &lam)| rng.gen::<f64>() < lam)
        .map(|(k, _)| eigenvectors.column(k).into_owned())
        .collect();

    while !cols.is_empty() {
        let weights: Vec<f64> = (0..n).map(|i| cols.iter().map(|c| c[i].norm_sqr()).sum()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                pick = i;
                break;
            }
            u -= w;
        }
        out.push(pick);

        // restrict the span to vectors vanishing at `pick`
        let pivot = (0..cols.len())
            .max_by(|&a, &b| cols[a][pick].norm().total_cmp(&cols[b][pick].norm()))
            .expect("non-empty");
        let pv = cols.swap_remove(pivot);
        for c in cols.iter_mut() {
            let factor = c[pick] / pv[pick];
            *c -= &pv * factor;
        }
        // Gram–Schmidt
        for a in 0..cols.len() {
            for b in 0..a {
                let proj = cols[b].dotc(&cols[a]);
                let cb = cols[b].clone();
                cols[a] -= cb * proj;
            }
            let norm = cols[a].norm();
            cols[a] /= Complex64::new(norm, 0.0);
        }
    }
}

fn sample_gaussian_cox<R: Rng + ?Sized>(root: &DMatrix<f64>, rng: &mut R, out: &mut Vec<usize>) {
    let n = root.nrows();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let g = root * z;
    for (i, gi) in g.iter().enumerate() {
        let rate = gi * gi;
        if rate > 0.0 {
            let count = Poisson::new(rate).expect("positive finite rate").sample(rng) as usize;
            out.extend(std::iter::repeat_n(i, count));
        }
    }
}

/// One draw from `ν_F(ℓ)`.
pub fn sample_discrete<R: Rng + ?Sized>(
    p: &ProjectedKernel,
    alpha: AlphaParam,
    rng: &mut R,
) -> Result<DiscreteConfiguration> {
    Ok(DiscreteSampler::new(p, alpha)?.sample(rng))
}

/// Independent marks `s_n ~ |f_{ℓ,i_n}|² dx`, in the order of `d.indices`.
pub fn attach_marks<R: Rng + ?Sized>(d: &DiscreteConfiguration, rng: &mut R) -> LiftedConfiguration {
    LiftedConfiguration {
        points: d.indices.iter().map(|b| (*b, b.mark_measure().sample(rng))).collect(),
    }
}

pub fn unlabel(w: &LiftedConfiguration) -> ContinuumConfiguration {
    ContinuumConfiguration {
        points: w.points.iter().map(|&(_, s)| s).collect(),
    }
}

/// Points per level-`level` cell of the window, left to right.
pub fn cell_counts(c: &ContinuumConfiguration, level: u32, window: &Interval) -> Result<Vec<u64>> {
    check_window(level, window)?;
    let cells = level_cells(level, window)?;
    let mut counts = vec![0u64; cells.len()];
    if cells.is_empty() {
        return Ok(counts);
    }
    let first = cells[0].cell_number();
    for &x in &c.points {
        if window.contains(x) {
            let k = TreeIndex::containing(level, x)?.cell_number() - first;
            counts[k as usize] += 1;
        }
    }
    Ok(counts)
}

/// `s (s-1) ⋯ (s-k+1)`, zero when `s < k`.
pub fn falling_factorial(s: u64, k: u32) -> f64 {
    if s < k as u64 {
        return 0.0;
    }
    (0..k as u64).map(|t| (s - t) as f64).product()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Monte Carlo mean of `Π_i s(A_i)!/(s(A_i)-k_i)!` over count vectors, for
/// distinct cell positions with multiplicities `k_i`.
pub fn estimate_factorial_moments(samples: &[Vec<u64>], cells: &[(usize, u32)]) -> Result<MomentEstimate> {
    for (a, (pos, _)) in cells.iter().enumerate() {
        if cells[..a].iter().any(|(q, _)| q == pos) {
            return Err(contract(format!(
                "cell {pos} listed twice: factorial moments need disjoint cells"
            )));
        }
    }
    let values = samples
        .iter()
        .map(|counts| {
            cells.iter().try_fold(1.0, |acc, &(pos, k)| {
                counts
                    .get(pos)
                    .map(|&s| acc * falling_factorial(s, k))
                    .ok_or_else(|| contract(format!("cell {pos} outside a count vector of length {}", counts.len())))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(MomentEstimate {
        mean,
        stderr,
        n: values.len(),
    })
}

/// Empirical `Cov(N_a, N_b)` with the standard error of the product-moment estimator.
pub fn count_covariance(samples: &[Vec<u64>], a: usize, b: usize) -> MomentEstimate {
    let n = samples.len() as f64;
    let ma = samples.iter().map(|c| c[a] as f64).sum::<f64>() / n;
    let mb = samples.iter().map(|c| c[b] as f64).sum::<f64>() / n;
    let products: Vec<f64> = samples
        .iter()
        .map(|c| (c[a] as f64 - ma) * (c[b] as f64 - mb))
        .collect();
    let (mean, stderr) = mean_stderr(&products);
    MomentEstimate {
        mean: mean * n / (n - 1.0),
        stderr,
        n: samples.len(),
    }
}

/// One lifted sample and its level-`ℓ` cell counts.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftSample {
    pub lifted: LiftedConfiguration,
    pub counts: Vec<u64>,
}

/// Serialized form of a sample: labels, marks and cell counts.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SampleRecord {
    pub indices: Vec<String>,
    pub points: Vec<f64>,
    pub counts: Vec<u64>,
}

impl From<&LiftSample> for SampleRecord {
    fn from(s: &LiftSample) -> Self {
        Self {
            indices: s.lifted.points.iter().map(|(b, _)| b.to_string()).collect(),
            points: s.lifted.points.iter().map(|&(_, x)| x).collect(),
            counts: s.counts.clone(),
        }
    }
}

/// Random stream of sample `k`: ChaCha8 keyed by the seed, stream `k`. Draws
/// are reproducible regardless of how samples are spread over threads.
pub fn sample_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// `n` independent runs of sample → mark → unlabel → count on the window of `p`.
pub fn lift_samples(p: &ProjectedKernel, alpha: AlphaParam, n: usize, seed: u64) -> Result<Vec<LiftSample>> {
    let sampler = DiscreteSampler::new(p, alpha)?;
    let level = p.level;
    let window = p.window;
    (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let d = sampler.sample(&mut rng);
            let lifted = attach_marks(&d, &mut rng);
            let counts = cell_counts(&unlabel(&lifted), level, &window)?;
            Ok(LiftSample { lifted, counts })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LiftQueryReport {
    pub cells: Vec<String>,
    pub m: usize,
    pub empirical: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub truncation_bound: f64,
    pub difference: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LiftReport {
    pub alpha: String,
    pub level: u32,
    pub rank: u32,
    pub seed: u64,
    pub n_samples: usize,
    pub queries: Vec<LiftQueryReport>,
    pub marks_contained: bool,
    pub mark_ks: KsResult,
    pub passed: bool,
}

/// Relative slack for floating-point error in the analytic value.
const ROUNDOFF: f64 = 1e-12;

/// Significance level of the mark-uniformity test.
pub const MARK_KS_LEVEL: f64 = 0.01;

/// Monte Carlo check that unlabeled lifts reproduce the continuum
/// factorial moments on level-`ℓ` cells: each query passes when
/// `|empirical - analytic| ≤ 3·stderr + truncation bound`.
#[allow(clippy::too_many_arguments)]
pub fn verify_lift(
    k: &KernelSpec,
    alpha: AlphaParam,
    level: u32,
    rank: u32,
    window: &Interval,
    queries: &[CorrelationQuery],
    n_samples: usize,
    seed: u64,
) -> Result<LiftReport> {
    let quad = QuadratureSpec::for_projection(level, rank);
    let p = project_kernel(k, level, rank, window, &quad)?;
    let samples = lift_samples(&p, alpha, n_samples, seed)?;
    let counts: Vec<Vec<u64>> = samples.iter().map(|s| s.counts.clone()).collect();
    let cells = level_cells(level, window)?;
    let trace = trace_on_window(k, window, &quad)?;
    let tail = tail_trace(k, &p, window, &quad)?;

    let mut reports = Vec::with_capacity(queries.len());
    for q in queries {
        if q.alpha != alpha {
            return Err(contract(format!("query α {} differs from sampler α {alpha}", q.alpha)));
        }
        if q.level() != level {
            return Err(contract(format!(
                "query cells at level {}, sampling at level {level}",
                q.level()
            )));
        }
        let spec = q
            .multiplicities()
            .into_iter()
            .map(|(c, mult)| {
                cells
                    .iter()
                    .position(|d| *d == c)
                    .map(|pos| (pos, mult))
                    .ok_or_else(|| contract(format!("query cell {c} is outside the window {window}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let est = estimate_factorial_moments(&counts, &spec)?;
        let analytic = lhs_parseval(k, q, &quad)?;
        let bound = parseval_tail_bound(q.m(), alpha, trace, tail)?;
        let difference = (est.mean - analytic).abs();
        reports.push(LiftQueryReport {
            cells: q.cells.iter().map(|c| c.to_string()).collect(),
            m: q.m(),
            empirical: est.mean,
            stderr: est.stderr,
            analytic,
            truncation_bound: bound,
            difference,
            passed: difference <= 3.0 * est.stderr + bound + ROUNDOFF * analytic.abs().max(1.0),
        });
    }

    let marks_contained = samples.iter().all(|s| s.lifted.marks_contained());
    let relative: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.lifted.points.iter())
        .map(|(b, x)| {
            let sup = b.support();
            (x - sup.lo) / sup.len()
        })
        .collect();
    let mark_ks = ks_uniform(&relative);
    let passed = marks_contained && mark_ks.p_value > MARK_KS_LEVEL && reports.iter().all(|r| r.passed);
    Ok(LiftReport {
        alpha: alpha.to_string(),
        level,
        rank,
        seed,
        n_samples,
        queries: reports,
        marks_contained,
        mark_ks,
        passed,
    })
}
