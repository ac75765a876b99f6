//! α-determinants `det_α A = Σ_σ α^{n-ν(σ)} Π_i a_{i,σ(i)}`.
//!
//! Two evaluators are provided. [`det_alpha_naive`] enumerates the symmetric
//! group and is the ground truth. [`det_alpha_dp`] groups permutations by
//! their cycle decomposition: since `n - ν(σ) = Σ_c (|c| - 1)`, every cycle of
//! length `k` contributes a factor `α^{k-1}` times the product of the matrix
//! entries along the cycle, so the sum factors over cycle covers and can be
//! accumulated over vertex subsets.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::alpha::AlphaParam;
use crate::error::{contract, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Default dimension guard for the permutation enumeration.
pub const NAIVE_MAX_DIM: usize = 10;
/// Default dimension guard for the subset dynamic program.
pub const DP_MAX_DIM: usize = 22;

/// Number of disjoint cycles of a permutation of `{0, …, n-1}`, fixed points included.
pub fn cycle_count(sigma: &[usize]) -> Result<usize> {
    let n = sigma.len();
    let mut seen = vec![false; n];
    for &s in sigma {
        if s >= n || seen[s] {
            return Err(contract(format!("{sigma:?} is not a bijection on 0..{n}")));
        }
        seen[s] = true;
    }
    seen.iter_mut().for_each(|b| *b = false);
    let mut cycles = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = sigma[i];
        }
    }
    Ok(cycles)
}

/// The cycles of a permutation, each listed from its smallest element in
/// the order `i → σ(i) → σ²(i) → …`.
pub fn cycles_of(sigma: &[usize]) -> Result<Vec<Vec<usize>>> {
    cycle_count(sigma)?;
    let mut seen = vec![false; sigma.len()];
    let mut out = Vec::new();
    for start in 0..sigma.len() {
        if seen[start] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            cycle.push(i);
            i = sigma[i];
        }
        out.push(cycle);
    }
    Ok(out)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Permutations {
    Permutations {
        current: Some((0..n).collect()),
    }
}

pub struct Permutations {
    current: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut p = out.clone();
        let n = p.len();
        if n > 1 {
            let mut i = n - 1;
            while i > 0 && p[i - 1] >= p[i] {
                i -= 1;
            }
            if i > 0 {
                let mut j = n - 1;
                while p[j] <= p[i - 1] {
                    j -= 1;
                }
                p.swap(i - 1, j);
                p[i..].reverse();
                self.current = Some(p);
            }
        }
        Some(out)
    }
}

fn check_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(contract(format!(
            "alpha-determinant of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Permutation-sum evaluation with the default guard `n ≤ 10`.
pub fn det_alpha_naive(a: &CMatrix, alpha: AlphaParam) -> Result<Complex64> {
    det_alpha_naive_bounded(a, alpha, NAIVE_MAX_DIM)
}

pub fn det_alpha_naive_bounded(a: &CMatrix, alpha: AlphaParam, max_dim: usize) -> Result<Complex64> {
    let n = check_square(a)?;
    if n > max_dim {
        return Err(Error::Resource {
            what: "naive alpha-determinant dimension",
            got: n,
            limit: max_dim,
        });
    }
    let powers = alpha_powers(alpha, n);
    let mut total = Complex64::new(0.0, 0.0);
    for sigma in permutations(n) {
        let nu = cycle_count(&sigma)?;
        let prod = (0..n).fold(Complex64::new(1.0, 0.0), |acc, i| acc * a[(i, sigma[i])]);
        total += prod * powers[n - nu];
    }
    Ok(total)
}

/// Cycle-cover dynamic program with the default guard `n ≤ 22`.
pub fn det_alpha_dp(a: &CMatrix, alpha: AlphaParam) -> Result<Complex64> {
    det_alpha_dp_bounded(a, alpha, DP_MAX_DIM)
}

/// Cycle covers are built one cycle at a time. A cycle is opened at its
/// largest vertex `h` (the head), extended through smaller uncovered vertices,
/// and closed back into `h`; heads are opened in increasing order, so every
/// cycle cover is produced exactly once. `covered[S]` holds the weighted sum
/// of all cycle covers of the vertex set `S`.
pub fn det_alpha_dp_bounded(a: &CMatrix, alpha: AlphaParam, max_dim: usize) -> Result<Complex64> {
    let n = check_square(a)?;
    if n > max_dim || n >= usize::BITS as usize - 1 {
        return Err(Error::Resource {
            what: "subset-DP alpha-determinant dimension",
            got: n,
            limit: max_dim,
        });
    }
    if n == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let alpha = Complex64::new(alpha.value(), 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut covered = vec![zero; 1 << n];
    covered[0] = Complex64::new(1.0, 0.0);

    for head in 0..n {
        let lower = 1usize << head;
        let width = head + 1;
        // open[sub * width + v]: closed cycles plus an open path head → … → v,
        // covering exactly `sub ∪ {head}` where `sub ⊆ {0, …, head-1}`.
        let mut open = vec![zero; lower * width];
        for sub in 0..lower {
            open[sub * width + head] = covered[sub];
        }
        for sub in 0..lower {
            let mask = sub | lower;
            for v in 0..width {
                let w = open[sub * width + v];
                if w == zero {
                    continue;
                }
                covered[mask] += w * a[(v, head)];
                let step = w * alpha;
                for u in 0..head {
                    if sub & (1 << u) == 0 {
                        open[(sub | (1 << u)) * width + u] += step * a[(v, u)];
                    }
                }
            }
        }
    }
    Ok(covered[(1 << n) - 1])
}

fn alpha_powers(alpha: AlphaParam, n: usize) -> Vec<Complex64> {
    let a = alpha.value();
    let mut out = Vec::with_capacity(n + 1);
    let mut p = 1.0;
    for _ in 0..=n {
        out.push(Complex64::new(p, 0.0));
        p *= a;
    }
    out
}

/// Builds a complex matrix from row-major real entries.
pub fn real_matrix(n: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(n, n, entries.iter().map(|&x| Complex64::new(x, 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn alpha(s: &str) -> AlphaParam {
        s.parse().unwrap()
    }

    #[test]
    fn naive_examples() {
        let one = real_matrix(1, &[3.0]);
        assert_eq!(det_alpha_naive(&one, alpha("-1/4")).unwrap().re, 3.0);
        let a = real_matrix(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(det_alpha_naive(&a, alpha("-1")).unwrap().re, -2.0);
        assert_abs_diff_eq!(det_alpha_naive(&a, alpha("-1/2")).unwrap().re, 1.0);
        assert_abs_diff_eq!(det_alpha_naive(&a, alpha("2")).unwrap().re, 16.0);
    }

    #[test]
    fn dp_examples() {
        let a = real_matrix(2, &[1.0, 2.0, 3.0, 4.0]);
        assert_abs_diff_eq!(det_alpha_dp(&a, alpha("1")).unwrap().re, 10.0);
        let d = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.5, 1.0),
        ]));
        for s in ["-1", "-1/3", "2", "2/3"] {
            let v = det_alpha_dp(&d, alpha(s)).unwrap();
            assert_abs_diff_eq!(v.re, -3.0, epsilon = 1e-14);
            assert_abs_diff_eq!(v.im, -6.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cycle_counts() {
        assert_eq!(cycle_count(&[0, 1, 2, 3, 4]).unwrap(), 5);
        assert_eq!(cycle_count(&[1, 2, 3, 0]).unwrap(), 1);
        assert_eq!(cycle_count(&[1, 0, 2]).unwrap(), 2);
        assert!(cycle_count(&[0, 0, 1]).is_err());
        assert!(cycle_count(&[0, 3, 1]).is_err());
        assert_eq!(cycles_of(&[1, 0, 2]).unwrap(), vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn permutation_enumeration() {
        assert_eq!(permutations(0).count(), 1);
        assert_eq!(permutations(4).count(), 24);
        let all: Vec<_> = permutations(3).collect();
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[5], vec![2, 1, 0]);
    }

    #[test]
    fn guards_and_shape() {
        let big = CMatrix::identity(11, 11);
        assert!(matches!(
            det_alpha_naive(&big, alpha("-1")),
            Err(Error::Resource { .. })
        ));
        assert_eq!(det_alpha_naive_bounded(&big, alpha("-1"), 11).unwrap().re, 1.0);
        assert!(matches!(
            det_alpha_dp(&CMatrix::identity(23, 23), alpha("-1")),
            Err(Error::Resource { .. })
        ));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(det_alpha_naive(&rect, alpha("-1")), Err(Error::Contract(_))));
        assert!(matches!(det_alpha_dp(&rect, alpha("-1")), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_matrix_is_one() {
        let e = CMatrix::zeros(0, 0);
        assert_eq!(det_alpha_naive(&e, alpha("2")).unwrap().re, 1.0);
        assert_eq!(det_alpha_dp(&e, alpha("2")).unwrap().re, 1.0);
    }
}
