//! Continuum and tree correlation functions, and the Parseval identity
//! between their cell integrals.

use num_complex::Complex64;

use crate::alpha::AlphaParam;
use crate::alpha_det::{cycle_count, det_alpha_dp_bounded, det_alpha_naive, permutations, CMatrix};
use crate::error::{contract, Error, Result};
use crate::kernel::{trace_on_window, KernelSpec};
use crate::projection::{cycle_integral, project_kernel, tail_trace, CycleKernel, ProjectedKernel, MAX_CYCLE_ORDER};
use crate::quadrature::QuadratureSpec;
use crate::tree::{BasisIndex, Interval, TreeIndex};

pub const MAX_POINT_ORDER: usize = 10;

/// Cells `A₁ … A_m` of one level `ℓ` (repetitions allowed) and the α they are read under.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationQuery {
    pub cells: Vec<TreeIndex>,
    pub alpha: AlphaParam,
}

impl CorrelationQuery {
    pub fn new(cells: Vec<TreeIndex>, alpha: AlphaParam) -> Result<Self> {
        if cells.is_empty() {
            return Err(contract("a correlation query needs at least one cell"));
        }
        if cells.len() > MAX_CYCLE_ORDER {
            return Err(Error::Resource {
                what: "correlation order m",
                got: cells.len(),
                limit: MAX_CYCLE_ORDER,
            });
        }
        let level = cells[0].rank();
        if cells.iter().any(|c| c.rank() != level) {
            return Err(contract("all query cells must be at the same level"));
        }
        Ok(Self { cells, alpha })
    }

    pub fn m(&self) -> usize {
        self.cells.len()
    }

    pub fn level(&self) -> u32 {
        self.cells[0].rank()
    }

    /// Smallest interval covering every cell.
    pub fn hull(&self) -> Interval {
        let lo = self.cells.iter().map(|c| c.cell().lo).fold(f64::INFINITY, f64::min);
        let hi = self.cells.iter().map(|c| c.cell().hi).fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }

    /// Distinct cells with their multiplicities `k_i`, in first-seen order.
    pub fn multiplicities(&self) -> Vec<(TreeIndex, u32)> {
        let mut out: Vec<(TreeIndex, u32)> = Vec::new();
        for c in &self.cells {
            match out.iter_mut().find(|(d, _)| d == c) {
                Some((_, k)) => *k += 1,
                None => out.push((*c, 1)),
            }
        }
        out
    }
}

fn alpha_weight(alpha: AlphaParam, sigma: &[usize]) -> Result<f64> {
    let nu = cycle_count(sigma)?;
    Ok(alpha.value().powi((sigma.len() - nu) as i32))
}

/// `ρ^m(x₁…x_m) = det_α [K(x_i, x_j)]`.
pub fn rho_m(k: &KernelSpec, alpha: AlphaParam, points: &[f64]) -> Result<f64> {
    Ok(rho_m_complex(k, alpha, points)?.re)
}

/// As [`rho_m`] but keeping the (round-off sized) imaginary part.
pub fn rho_m_complex(k: &KernelSpec, alpha: AlphaParam, points: &[f64]) -> Result<Complex64> {
    let m = points.len();
    let a = CMatrix::from_fn(m, m, |i, j| k.eval(points[i], points[j]));
    det_alpha_dp_bounded(&a, alpha, MAX_POINT_ORDER)
}

/// `ρ_F^m(i₁…i_m) = det_α [K_F(i_p, i_q)]`.
pub fn rho_f_m(p: &ProjectedKernel, alpha: AlphaParam, indices: &[BasisIndex]) -> Result<f64> {
    let pos = indices
        .iter()
        .map(|b| {
            p.position(b)
                .ok_or_else(|| contract(format!("basis label {b} is not in the projection")))
        })
        .collect::<Result<Vec<_>>>()?;
    rho_f_at_positions(p, alpha, &pos)
}

fn rho_f_at_positions(p: &ProjectedKernel, alpha: AlphaParam, pos: &[usize]) -> Result<f64> {
    let m = pos.len();
    let a = CMatrix::from_fn(m, m, |i, j| p.matrix[(pos[i], pos[j])]);
    if m > MAX_POINT_ORDER {
        return Err(Error::Resource {
            what: "tree correlation order",
            got: m,
            limit: MAX_POINT_ORDER,
        });
    }
    Ok(det_alpha_naive(&a, alpha)?.re)
}

/// `∫_𝔸 ρ^m dx = Σ_σ α^{m-ν(σ)} ∫_𝔸 Π K(x_n, x_{σ(n)}) dx`, each cycle
/// integral by tensor Gauss–Legendre quadrature of the continuum kernel.
pub fn lhs_parseval(k: &KernelSpec, q: &CorrelationQuery, quad: &QuadratureSpec) -> Result<f64> {
    let mut total = 0.0;
    for sigma in permutations(q.m()) {
        let w = alpha_weight(q.alpha, &sigma)?;
        total += w * cycle_integral(CycleKernel::Exact { kernel: k, quad }, &q.cells, &sigma)?.re;
    }
    Ok(total)
}

/// `Σ_σ α^{m-ν(σ)} ∫_𝔸 Π K_R(x_n, x_{σ(n)}) dx`; equal to the literal tree
/// sum of [`rhs_parseval`] by support orthogonality.
pub fn truncated_lhs(p: &ProjectedKernel, q: &CorrelationQuery) -> Result<f64> {
    let mut total = 0.0;
    for sigma in permutations(q.m()) {
        let w = alpha_weight(q.alpha, &sigma)?;
        total += w * cycle_integral(CycleKernel::Truncated(p), &q.cells, &sigma)?.re;
    }
    Ok(total)
}

/// `Σ_{i⃗ ∈ (𝕀(ℓ;R) ∩ 𝕀_ℓ(𝔸))} ρ_F^m(i⃗)`, summed index tuple by index tuple.
pub fn rhs_parseval(p: &ProjectedKernel, q: &CorrelationQuery) -> Result<f64> {
    if q.level() != p.level {
        return Err(contract(format!(
            "query at level {}, projection at level {}",
            q.level(),
            p.level
        )));
    }
    let sets = q
        .cells
        .iter()
        .map(|c| p.positions_in_cell(c))
        .collect::<Result<Vec<_>>>()?;
    if sets.iter().any(|s| s.is_empty()) {
        return Ok(0.0);
    }
    let m = sets.len();
    let mut cursor = vec![0usize; m];
    let mut pos = vec![0usize; m];
    let mut total = 0.0;
    loop {
        for n in 0..m {
            pos[n] = sets[n][cursor[n]];
        }
        total += rho_f_at_positions(p, q.alpha, &pos)?;
        let mut n = 0;
        loop {
            cursor[n] += 1;
            if cursor[n] < sets[n].len() {
                break;
            }
            cursor[n] = 0;
            n += 1;
            if n == m {
                return Ok(total);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ParsevalReport {
    pub m: usize,
    pub level: u32,
    pub rank: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tail_bound: f64,
}

impl ParsevalReport {
    /// Gap explained by truncation, up to an absolute quadrature slack.
    pub fn within_bound(&self, slack: f64) -> bool {
        self.gap <= self.tail_bound + slack
    }
}

/// Truncation bound for a PSD kernel on the query hull.
///
/// With `T` the window trace and `τ` the tail trace, `‖K - K_R‖₁ ≤ 2√(Tτ)`
/// and `‖K‖ ≤ T`, so each permutation term moves by at most
/// `2m √(Tτ) T^{m-1}`; the bound sums these with weights `|α|^{m-ν(σ)}`.
pub fn parseval_tail_bound(m: usize, alpha: AlphaParam, trace: f64, tail: f64) -> Result<f64> {
    let trace = trace.max(0.0);
    let per_term = 2.0 * m as f64 * (trace * tail.max(0.0)).sqrt() * trace.powi(m as i32 - 1);
    let mut total = 0.0;
    for sigma in permutations(m) {
        total += alpha_weight(alpha, &sigma)?.abs() * per_term;
    }
    Ok(total)
}

/// Projects `K` onto the query hull at rank `R` and compares both sides.
pub fn verify_parseval(
    k: &KernelSpec,
    q: &CorrelationQuery,
    rank: u32,
    quad: &QuadratureSpec,
) -> Result<ParsevalReport> {
    let window = q.hull();
    let pquad = QuadratureSpec {
        order: quad.order,
        refinement_level: quad.refinement_level.max(q.level() + rank - 1),
    };
    let p = project_kernel(k, q.level(), rank, &window, &pquad)?;
    verify_parseval_with(k, q, &p, &pquad)
}

/// As [`verify_parseval`] with an already assembled projection.
pub fn verify_parseval_with(
    k: &KernelSpec,
    q: &CorrelationQuery,
    p: &ProjectedKernel,
    quad: &QuadratureSpec,
) -> Result<ParsevalReport> {
    let lhs = lhs_parseval(k, q, quad)?;
    let rhs = rhs_parseval(p, q)?;
    let trace = trace_on_window(k, &p.window, quad)?;
    let tail = tail_trace(k, p, &p.window, quad)?;
    Ok(ParsevalReport {
        m: q.m(),
        level: p.level,
        rank: p.rank,
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
        tail_bound: parseval_tail_bound(q.m(), q.alpha, trace, tail)?,
    })
}
