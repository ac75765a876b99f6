//! Galerkin projection of a kernel onto the tree basis `F(ℓ)`.
//!
//! Every basis function of rank `≤ R` is constant on cells of level
//! `ℓ + R - 1`, so with integration cells at least that fine the basis side
//! of `K_F(i,j) = ∫∫ K(x,y) f_i(x) f_j(y)` is integrated exactly and only the
//! smoothness of `K` contributes quadrature error.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::alpha_det::{cycles_of, CMatrix};
use crate::error::{contract, Error, Result};
use crate::kernel::{trace_on_window, KernelSpec};
use crate::linalg::{hausdorff, hermitian_eigenvalues};
use crate::quadrature::{QuadGrid, QuadratureSpec};
use crate::tree::{basis_indices, check_window, BasisIndex, Interval, TreeIndex};

/// Largest correlation order handled by tensor quadrature.
pub const MAX_CYCLE_ORDER: usize = 4;

/// `K_F(ℓ)` restricted to `𝕀(ℓ;R) ∩ 𝕀_ℓ(A)`.
#[derive(Clone, Debug)]
pub struct ProjectedKernel {
    pub level: u32,
    pub rank: u32,
    pub window: Interval,
    pub indices: Vec<BasisIndex>,
    pub matrix: CMatrix,
    position: HashMap<BasisIndex, usize>,
}

impl ProjectedKernel {
    /// Wraps an explicit matrix; `indices` must be the basis of the window.
    pub fn from_parts(
        level: u32,
        rank: u32,
        window: Interval,
        indices: Vec<BasisIndex>,
        matrix: CMatrix,
    ) -> Result<Self> {
        if matrix.nrows() != indices.len() || matrix.ncols() != indices.len() {
            return Err(contract(format!(
                "{}x{} matrix for {} indices",
                matrix.nrows(),
                matrix.ncols(),
                indices.len()
            )));
        }
        let position = indices.iter().enumerate().map(|(k, b)| (*b, k)).collect();
        Ok(Self {
            level,
            rank,
            window,
            indices,
            matrix,
            position,
        })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn position(&self, b: &BasisIndex) -> Option<usize> {
        self.position.get(b).copied()
    }

    pub fn entry(&self, i: &BasisIndex, j: &BasisIndex) -> Option<Complex64> {
        Some(self.matrix[(self.position(i)?, self.position(j)?)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.matrix[(k, k)].re).sum()
    }

    /// Positions of the basis functions living in a level-`ℓ` cell.
    pub fn positions_in_cell(&self, cell: &TreeIndex) -> Result<Vec<usize>> {
        if cell.rank() != self.level {
            return Err(contract(format!("{cell} is not a level-{} cell", self.level)));
        }
        if !self.window.contains_interval(&cell.cell()) {
            return Err(contract(format!("cell {cell} lies outside the window {}", self.window)));
        }
        Ok(self
            .indices
            .iter()
            .enumerate()
            .filter(|(_, b)| b.root_cell() == *cell)
            .map(|(k, _)| k)
            .collect())
    }

    /// `K_R(x, y) = Σ K_F(i,j) f_i(x) f_j(y)`.
    pub fn eval_truncated(&self, x: f64, y: f64) -> Complex64 {
        let active = |z: f64| -> Vec<(usize, f64)> {
            self.indices
                .iter()
                .enumerate()
                .filter_map(|(k, b)| {
                    let v = b.eval(z);
                    (v != 0.0).then_some((k, v))
                })
                .collect()
        };
        let fx = active(x);
        let fy = active(y);
        let mut total = Complex64::new(0.0, 0.0);
        for &(p, vx) in &fx {
            for &(q, vy) in &fy {
                total += self.matrix[(p, q)] * (vx * vy);
            }
        }
        total
    }

    pub fn export(&self) -> ProjectedKernelExport {
        let n = self.dim();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        ProjectedKernelExport {
            level: self.level,
            rank: self.rank,
            window: [self.window.lo, self.window.hi],
            dim: n,
            indices: self.indices.iter().map(|b| b.to_string()).collect(),
            entries,
        }
    }
}

/// Serializable form of a projected kernel: labels plus row-major `[re, im]` entries.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ProjectedKernelExport {
    pub level: u32,
    pub rank: u32,
    pub window: [f64; 2],
    pub dim: usize,
    pub indices: Vec<String>,
    pub entries: Vec<[f64; 2]>,
}

/// Kernel values on all node pairs, `K(x_a, x_b)`.
fn kernel_on_nodes(k: &KernelSpec, xs: &[f64], ys: &[f64]) -> CMatrix {
    let rows: Vec<Vec<Complex64>> = xs
        .par_iter()
        .map(|&x| ys.iter().map(|&y| k.eval(x, y)).collect())
        .collect();
    DMatrix::from_fn(xs.len(), ys.len(), |a, b| rows[a][b])
}

pub fn project_kernel(
    k: &KernelSpec,
    level: u32,
    rank: u32,
    window: &Interval,
    quad: &QuadratureSpec,
) -> Result<ProjectedKernel> {
    if rank == 0 {
        return Err(contract("rank truncation must be at least 1"));
    }
    check_window(level, window)?;
    quad.check_resolves(level, rank)?;
    let spec = quad.refined_to(k.breakpoint_level());
    let grid = QuadGrid::new(window, &spec)?;
    let indices = basis_indices(level, rank, window)?;

    let n = indices.len();
    let basis_weights = DMatrix::from_fn(n, grid.len(), |p, a| {
        Complex64::new(indices[p].eval(grid.nodes[a]) * grid.weights[a], 0.0)
    });
    let kgrid = kernel_on_nodes(k, &grid.nodes, &grid.nodes);
    let matrix = &basis_weights * kgrid * basis_weights.transpose();
    ProjectedKernel::from_parts(level, rank, *window, indices, matrix)
}

pub fn truncated_kernel_eval(p: &ProjectedKernel, x: f64, y: f64) -> Complex64 {
    p.eval_truncated(x, y)
}

/// `∫_A K(x,x) dx - Σ_i K_F(i,i)`: the trace mass not captured at rank `R`.
pub fn tail_trace(k: &KernelSpec, p: &ProjectedKernel, window: &Interval, quad: &QuadratureSpec) -> Result<f64> {
    Ok(trace_on_window(k, window, quad)? - p.trace())
}

/// Which kernel a cycle integral runs over.
#[derive(Clone, Copy, Debug)]
pub enum CycleKernel<'a> {
    /// The continuum kernel, by tensor Gauss–Legendre quadrature.
    Exact {
        kernel: &'a KernelSpec,
        quad: &'a QuadratureSpec,
    },
    /// `K_R`, through the projected matrix and support orthogonality.
    Truncated(&'a ProjectedKernel),
}

fn check_cycle_args(cells: &[TreeIndex], sigma: &[usize]) -> Result<u32> {
    let m = cells.len();
    if m == 0 {
        return Err(contract("cycle integral over zero cells"));
    }
    if m > MAX_CYCLE_ORDER {
        return Err(Error::Resource {
            what: "cycle integral order",
            got: m,
            limit: MAX_CYCLE_ORDER,
        });
    }
    if sigma.len() != m {
        return Err(contract(format!("permutation of length {} for {m} cells", sigma.len())));
    }
    let level = cells[0].rank();
    if cells.iter().any(|c| c.rank() != level) {
        return Err(contract("cells of a cycle integral must share one level"));
    }
    Ok(level)
}

/// `∫_{A₁×…×A_m} Π_n Kern(x_n, x_{σ(n)}) dx`.
///
/// The integrand factors over the cycles of `σ`, so each cycle
/// `c₀ → c₁ → … → c₀` is evaluated as the trace of a product of blocks. For
/// the exact kernel the blocks are `diag(w) K(nodes, nodes)` over each
/// cell's quadrature nodes (the tensor rule, summed cycle by cycle). For
/// `K_R` the cell integrals of `f_i f_j` are `δ_ij 1{B_i ⊂ A}`, which leaves
/// `Σ_{i⃗ ∈ 𝕀_ℓ(𝔸)} Π K_F(i_n, i_{σ(n)})`, again a trace of matrix blocks.
pub fn cycle_integral(kern: CycleKernel<'_>, cells: &[TreeIndex], sigma: &[usize]) -> Result<Complex64> {
    let level = check_cycle_args(cells, sigma)?;
    let cycles = cycles_of(sigma)?;
    match kern {
        CycleKernel::Exact { kernel, quad } => {
            let spec = quad.refined_to(kernel.breakpoint_level()).refined_to(Some(level));
            let grids = cells
                .iter()
                .map(|c| QuadGrid::new(&c.cell(), &spec))
                .collect::<Result<Vec<_>>>()?;
            let mut total = Complex64::new(1.0, 0.0);
            for cycle in &cycles {
                let k = cycle.len();
                let mut acc: Option<CMatrix> = None;
                for t in 0..k {
                    let (a, b) = (cycle[t], cycle[(t + 1) % k]);
                    let ga = &grids[a];
                    let mut block = kernel_on_nodes(kernel, &ga.nodes, &grids[b].nodes);
                    for (r, &w) in ga.weights.iter().enumerate() {
                        block.row_mut(r).scale_mut(w);
                    }
                    acc = Some(match acc {
                        None => block,
                        Some(m) => m * block,
                    });
                }
                total *= acc.expect("non-empty cycle").trace();
            }
            Ok(total)
        }
        CycleKernel::Truncated(p) => {
            if level != p.level {
                return Err(contract(format!(
                    "cells at level {level}, projection at level {}",
                    p.level
                )));
            }
            let sets = cells
                .iter()
                .map(|c| p.positions_in_cell(c))
                .collect::<Result<Vec<_>>>()?;
            let block = |a: usize, b: usize| {
                DMatrix::from_fn(sets[a].len(), sets[b].len(), |r, s| p.matrix[(sets[a][r], sets[b][s])])
            };
            let mut total = Complex64::new(1.0, 0.0);
            for cycle in &cycles {
                let k = cycle.len();
                let mut acc = block(cycle[0], cycle[1 % k]);
                for t in 1..k {
                    acc *= block(cycle[t], cycle[(t + 1) % k]);
                }
                total *= acc.trace();
            }
            Ok(total)
        }
    }
}

/// Eigenvalues (descending) of the midpoint-rule Nyström matrix `h K(x_a, x_b)`
/// on `n` equispaced points of the window.
pub fn nystrom_eigenvalues(k: &KernelSpec, window: &Interval, n: usize) -> Vec<f64> {
    let h = window.len() / n as f64;
    let xs: Vec<f64> = (0..n).map(|a| window.lo + (a as f64 + 0.5) * h).collect();
    let m = kernel_on_nodes(k, &xs, &xs).scale(h);
    hermitian_eigenvalues(&m)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SpectrumReport {
    pub kernel: String,
    pub level: u32,
    pub rank: u32,
    pub grid_n: usize,
    pub projected: Vec<f64>,
    pub nystrom: Vec<f64>,
    pub hausdorff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const SPECTRUM_TOL: f64 = 1e-2;

/// Compares the leading eigenvalues of `K_F` with a Nyström discretization
/// of `K` on the same window.
pub fn spectrum_check(k: &KernelSpec, p: &ProjectedKernel, grid_n: usize, leading: usize) -> Result<SpectrumReport> {
    spectrum_check_with_tol(k, p, grid_n, leading, SPECTRUM_TOL)
}

pub fn spectrum_check_with_tol(
    k: &KernelSpec,
    p: &ProjectedKernel,
    grid_n: usize,
    leading: usize,
    tolerance: f64,
) -> Result<SpectrumReport> {
    if grid_n < p.dim() {
        return Err(contract(format!(
            "Nyström grid {grid_n} smaller than projection dimension {}",
            p.dim()
        )));
    }
    let take = leading.min(p.dim()).max(1);
    let mut projected = hermitian_eigenvalues(&p.matrix);
    projected.truncate(take);
    let mut nystrom = nystrom_eigenvalues(k, &p.window, grid_n);
    nystrom.truncate(take);
    let d = hausdorff(&projected, &nystrom);
    Ok(SpectrumReport {
        kernel: k.kind_name().to_string(),
        level: p.level,
        rank: p.rank,
        grid_n,
        projected,
        nystrom,
        hausdorff: d,
        tolerance,
        passed: d < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Eigenpair;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn indicator() -> KernelSpec {
        KernelSpec::rank_one_indicator(unit(), 1.0).unwrap()
    }

    fn haar_kernel(eigenvalue: f64) -> KernelSpec {
        KernelSpec::finite_rank(
            1,
            vec![Eigenpair {
                eigenvalue,
                coefficients: vec![(BasisIndex::parse(1, "(0;0)").unwrap(), Complex64::new(1.0, 0.0))],
            }],
        )
        .unwrap()
    }

    #[test]
    fn indicator_projects_to_single_entry() {
        let p = project_kernel(&indicator(), 1, 3, &unit(), &QuadratureSpec::for_projection(1, 3)).unwrap();
        assert_eq!(p.dim(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((p.matrix[(i, j)] - expect).norm() < 1e-13, "{i},{j}");
            }
        }
    }

    #[test]
    fn haar_eigenfunction_projects_to_its_eigenvalue() {
        let p = project_kernel(&haar_kernel(0.7), 1, 3, &unit(), &QuadratureSpec::for_projection(1, 3)).unwrap();
        let h = BasisIndex::parse(1, "(0;0)").unwrap();
        let at = p.position(&h).unwrap();
        for i in 0..p.dim() {
            for j in 0..p.dim() {
                let expect = if i == at && j == at { 0.7 } else { 0.0 };
                assert!((p.matrix[(i, j)] - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn under_resolved_quadrature_is_rejected() {
        let q = QuadratureSpec::new(8, 2).unwrap();
        assert!(matches!(
            project_kernel(&indicator(), 1, 3, &unit(), &q),
            Err(Error::Config(_))
        ));
        let misaligned = Interval::new(0.0, 0.75).unwrap();
        assert!(matches!(
            project_kernel(&indicator(), 1, 1, &misaligned, &QuadratureSpec::for_projection(1, 1)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn truncated_kernel_reproduces_span_kernels() {
        let p = project_kernel(&indicator(), 1, 2, &unit(), &QuadratureSpec::for_projection(1, 2)).unwrap();
        for (x, y) in [(0.1, 0.9), (0.5, 0.5), (0.99, 0.0)] {
            assert!((p.eval_truncated(x, y).re - 1.0).abs() < 1e-13);
        }
        assert_eq!(p.eval_truncated(0.5, 1.5).re, 0.0);
    }

    #[test]
    fn tail_trace_examples() {
        let q = QuadratureSpec::for_projection(1, 2);
        let p = project_kernel(&indicator(), 1, 2, &unit(), &q).unwrap();
        assert!(tail_trace(&indicator(), &p, &unit(), &q).unwrap().abs() < 1e-10);
        let h = haar_kernel(0.4);
        let p = project_kernel(&h, 1, 2, &unit(), &q).unwrap();
        assert!(tail_trace(&h, &p, &unit(), &q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn cycle_integral_examples() {
        let k = indicator();
        let q = QuadratureSpec::for_projection(1, 2);
        let c = "(0)".parse::<TreeIndex>().unwrap();
        let exact = CycleKernel::Exact { kernel: &k, quad: &q };
        assert!((cycle_integral(exact, &[c], &[0]).unwrap().re - 1.0).abs() < 1e-13);
        assert!((cycle_integral(exact, &[c, c], &[1, 0]).unwrap().re - 1.0).abs() < 1e-13);
        let p = project_kernel(&k, 1, 2, &unit(), &q).unwrap();
        let tr = CycleKernel::Truncated(&p);
        assert!((cycle_integral(tr, &[c, c], &[1, 0]).unwrap().re - 1.0).abs() < 1e-13);
        assert!(matches!(
            cycle_integral(tr, &[c; 5], &[0, 1, 2, 3, 4]),
            Err(Error::Resource { .. })
        ));
        let outside = "(3)".parse::<TreeIndex>().unwrap();
        assert!(cycle_integral(tr, &[outside], &[0]).is_err());
    }

    #[test]
    fn spectrum_of_span_kernels() {
        let p = project_kernel(&indicator(), 1, 4, &unit(), &QuadratureSpec::for_projection(1, 4)).unwrap();
        let rep = spectrum_check(&indicator(), &p, 64, 4).unwrap();
        assert!((rep.projected[0] - 1.0).abs() < 1e-10);
        assert!(rep.passed);
        assert!(spectrum_check(&indicator(), &p, 4, 4).is_err());
    }

    #[test]
    fn export_layout() {
        let p = project_kernel(&indicator(), 1, 2, &unit(), &QuadratureSpec::for_projection(1, 2)).unwrap();
        let e = p.export();
        assert_eq!(e.indices, ["(0)", "(0;0)"]);
        assert_eq!(e.entries.len(), 4);
        assert!((e.entries[0][0] - 1.0).abs() < 1e-13);
    }
}
