//! Slow, direct reference computations for the test suites.
//!
//! Nothing here calls into `alphadpp`: permutations are generated by Heap's
//! algorithm, Gauss–Legendre rules by Newton iteration on the Legendre
//! recurrence, and integrals by brute-force tensor sums.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

/// All permutations of `0..n` (Heap's algorithm).
pub fn heap_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = vec![a.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

pub fn count_cycles(sigma: &[usize]) -> usize {
    let mut seen = vec![false; sigma.len()];
    let mut cycles = 0;
    for s in 0..sigma.len() {
        if !seen[s] {
            cycles += 1;
            let mut t = s;
            while !seen[t] {
                seen[t] = true;
                t = sigma[t];
            }
        }
    }
    cycles
}

/// `Σ_σ α^{n-ν(σ)} Π a_{i,σ(i)}` term by term.
pub fn det_alpha_brute(a: &CMat, alpha: f64) -> Complex64 {
    let n = a.nrows();
    heap_permutations(n)
        .iter()
        .map(|s| {
            let w = alpha.powi((n - count_cycles(s)) as i32);
            (0..n).map(|i| a[(i, s[i])]).product::<Complex64>() * w
        })
        .sum()
}

/// Ryser's formula `per A = (-1)^n Σ_S (-1)^{|S|} Π_i Σ_{j∈S} a_ij`.
pub fn permanent_ryser(a: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut total = Complex64::new(0.0, 0.0);
    for s in 1u64..(1 << n) {
        let mut prod = Complex64::new(1.0, 0.0);
        for i in 0..n {
            let row: Complex64 = (0..n).filter(|&j| s >> j & 1 == 1).map(|j| a[(i, j)]).sum();
            prod *= row;
        }
        let sign = if (n as u32 - s.count_ones()) & 1 == 0 {
            1.0
        } else {
            -1.0
        };
        total += prod * sign;
    }
    total
}

/// Determinant by LU factorization.
pub fn det_lu(a: &CMat) -> Complex64 {
    if a.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

/// Entries uniform in the closed unit disk.
pub fn unit_disk_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    CMat::from_fn(n, n, |_, _| {
        let r = rng.gen::<f64>().sqrt();
        let t = rng.gen::<f64>() * std::f64::consts::TAU;
        Complex64::from_polar(r, t)
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite rule on `[lo, hi)`: `pieces` equal subintervals, `order` points each.
pub fn composite_rule(lo: f64, hi: f64, order: usize, pieces: usize) -> Vec<(f64, f64)> {
    let base = gauss_legendre(order);
    let h = (hi - lo) / pieces as f64;
    (0..pieces)
        .flat_map(|p| {
            let mid = lo + (p as f64 + 0.5) * h;
            base.iter().map(move |&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect()
}

/// Calls `f` on every node tuple of the product rule over `cells`, with the product weight.
fn for_each_tuple(rules: &[Vec<(f64, f64)>], f: &mut dyn FnMut(&[f64], f64)) {
    let m = rules.len();
    let mut idx = vec![0usize; m];
    let mut xs = vec![0.0; m];
    loop {
        let mut w = 1.0;
        for n in 0..m {
            let (x, wn) = rules[n][idx[n]];
            xs[n] = x;
            w *= wn;
        }
        f(&xs, w);
        let mut n = 0;
        loop {
            if n == m {
                return;
            }
            idx[n] += 1;
            if idx[n] < rules[n].len() {
                break;
            }
            idx[n] = 0;
            n += 1;
        }
    }
}

/// `∫_{A₁×…×A_m} Π_n K(x_n, x_{σ(n)}) dx` by a full tensor rule.
pub fn tensor_cycle_integral(
    k: &dyn Fn(f64, f64) -> Complex64,
    cells: &[(f64, f64)],
    sigma: &[usize],
    order: usize,
    pieces: usize,
) -> Complex64 {
    let rules: Vec<_> = cells
        .iter()
        .map(|&(a, b)| composite_rule(a, b, order, pieces))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for_each_tuple(&rules, &mut |xs, w| {
        let v: Complex64 = (0..xs.len()).map(|n| k(xs[n], xs[sigma[n]])).product();
        total += v * w;
    });
    total
}

/// `∫_{A₁×…×A_m} det_α [K(x_i, x_j)] dx` by a full tensor rule.
pub fn tensor_correlation_integral(
    k: &dyn Fn(f64, f64) -> Complex64,
    alpha: f64,
    cells: &[(f64, f64)],
    order: usize,
    pieces: usize,
) -> f64 {
    let rules: Vec<_> = cells
        .iter()
        .map(|&(a, b)| composite_rule(a, b, order, pieces))
        .collect();
    let m = cells.len();
    let mut total = 0.0;
    for_each_tuple(&rules, &mut |xs, w| {
        let a = CMat::from_fn(m, m, |i, j| k(xs[i], xs[j]));
        total += det_alpha_brute(&a, alpha).re * w;
    });
    total
}

/// Eigenvalues (descending) of the midpoint Nyström matrix `h K(x_a, x_b)`.
pub fn nystrom_midpoint(k: &dyn Fn(f64, f64) -> Complex64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..n).map(|a| lo + (a as f64 + 0.5) * h).collect();
    let m = CMat::from_fn(n, n, |a, b| k(xs[a], xs[b]) * h);
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut eig: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// `∫_lo^hi f` for `f` constant on each `[lo + k h, lo + (k+1) h)`.
pub fn integrate_step(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let h = (hi - lo) / cells as f64;
    (0..cells).map(|c| f(lo + (c as f64 + 0.5) * h) * h).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_counts() {
        assert_eq!(heap_permutations(0).len(), 1);
        assert_eq!(heap_permutations(4).len(), 24);
        let mut p = heap_permutations(4);
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 24);
    }

    #[test]
    fn known_values() {
        let a = CMat::from_fn(2, 2, |i, j| Complex64::new((2 * i + j + 1) as f64, 0.0));
        assert_eq!(det_lu(&a).re.round(), -2.0);
        assert_eq!(permanent_ryser(&a).re, 10.0);
        assert_eq!(det_alpha_brute(&a, 1.0).re, 10.0);
        assert_eq!(det_alpha_brute(&a, -1.0).re, -2.0);
    }

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        for n in 1..12 {
            let rule = gauss_legendre(n);
            let deg = 2 * n - 1;
            let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((s - exact).abs() < 1e-13, "n={n}");
        }
    }
}
