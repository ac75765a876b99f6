//! Dyadic partitions of ℝ, their tree labels, and the Haar-type bases `F(ℓ)`.
//!
//! A [`TreeIndex`] `(j₁; j₂…j_r)` names the level-`r` cell
//! `[J, J + 2^{1-r})`, `J = j₁ + Σ_{n≥2} j_n 2^{-(n-1)}`. Appending a bit
//! moves to one of the two halves, so the labels of all levels form one
//! binary tree per integer root.
//!
//! A [`BasisIndex`] is a tree index read at a working level `ℓ`. Its first
//! `ℓ` entries pick a level-`ℓ` cell, the remaining `r - 1` bits pick a node
//! of the Haar tree hanging below that cell. Rank 1 is the normalized cell
//! indicator. Rank `r ≥ 2` requires a trailing `0` bit and is the unit-norm
//! Haar function whose positive half is the labelled cell and whose support
//! is the parent cell.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{contract, Error, Result};

/// Longest tail a packed index can carry.
pub const MAX_TAIL: u32 = 52;

/// A half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("empty or non-finite interval [{lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn is_disjoint(&self, other: &Interval) -> bool {
        self.hi <= other.lo || other.hi <= self.lo
    }

    /// True if both endpoints lie on the grid of level-`level` cells.
    pub fn is_aligned(&self, level: u32) -> bool {
        let scale = cell_scale(level);
        let a = self.lo * scale;
        let b = self.hi * scale;
        a == a.floor() && b == b.floor() && a.abs() < 2f64.powi(52) && b.abs() < 2f64.powi(52)
    }

    /// Smallest level whose cell grid contains both endpoints, if any up to `max_level`.
    pub fn dyadic_level(&self, max_level: u32) -> Option<u32> {
        (1..=max_level).find(|&l| self.is_aligned(l))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Number of level-`level` cells per unit length, `2^{level-1}`.
pub fn cell_scale(level: u32) -> f64 {
    2f64.powi(level as i32 - 1)
}

/// Length of a level-`level` cell, `2^{1-level}`.
pub fn cell_length(level: u32) -> f64 {
    2f64.powi(1 - level as i32)
}

/// A node `(j₁; j₂ … j_r)` of the dyadic label forest.
///
/// The tail is packed most-significant-first: `bits` read as a binary number
/// is `j₂ j₃ … j_r`, which is also the offset of the cell inside `[j₁, j₁+1)`
/// in units of `2^{1-r}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TreeIndex {
    root: i64,
    bits: u64,
    len: u8,
}

impl TreeIndex {
    pub fn root(root: i64) -> Self {
        Self { root, bits: 0, len: 0 }
    }

    /// Builds `(j₁; tail)` from explicit bits.
    pub fn new(root: i64, tail: &[u8]) -> Result<Self> {
        tail.iter().try_fold(Self::root(root), |acc, &b| acc.child(b))
    }

    pub fn root_value(&self) -> i64 {
        self.root
    }

    pub fn rank(&self) -> u32 {
        1 + self.len as u32
    }

    pub fn tail_len(&self) -> u32 {
        self.len as u32
    }

    /// Entry `j_n`, `2 ≤ n ≤ rank`.
    pub fn bit(&self, n: u32) -> u8 {
        debug_assert!(n >= 2 && n <= self.rank());
        ((self.bits >> (self.rank() - n)) & 1) as u8
    }

    pub fn last_bit(&self) -> Option<u8> {
        (self.len > 0).then_some((self.bits & 1) as u8)
    }

    pub fn tail(&self) -> Vec<u8> {
        (2..=self.rank()).map(|n| self.bit(n)).collect()
    }

    pub fn child(&self, bit: u8) -> Result<Self> {
        if bit > 1 {
            return Err(contract(format!("tree bits are 0 or 1, got {bit}")));
        }
        if self.len as u32 >= MAX_TAIL {
            return Err(Error::Resource {
                what: "tree index tail length",
                got: self.len as usize + 1,
                limit: MAX_TAIL as usize,
            });
        }
        Ok(Self {
            root: self.root,
            bits: (self.bits << 1) | bit as u64,
            len: self.len + 1,
        })
    }

    /// Drops the last bit; `None` at a root.
    pub fn parent(&self) -> Option<Self> {
        (self.len > 0).then(|| Self {
            root: self.root,
            bits: self.bits >> 1,
            len: self.len - 1,
        })
    }

    /// The first `rank` entries.
    pub fn truncate(&self, rank: u32) -> Result<Self> {
        if rank == 0 || rank > self.rank() {
            return Err(contract(format!("cannot truncate {self} to rank {rank}")));
        }
        let drop = self.rank() - rank;
        Ok(Self {
            root: self.root,
            bits: self.bits >> drop,
            len: (rank - 1) as u8,
        })
    }

    pub fn is_prefix_of(&self, other: &TreeIndex) -> bool {
        other.rank() >= self.rank() && other.truncate(self.rank()).ok() == Some(*self)
    }

    /// The dyadic cell this label names at its own level.
    pub fn cell(&self) -> Interval {
        let len = cell_length(self.rank());
        let lo = self.root as f64 + self.bits as f64 * len;
        Interval { lo, hi: lo + len }
    }

    /// Label of the level-`level` cell containing `x`.
    pub fn containing(level: u32, x: f64) -> Result<Self> {
        if level == 0 || level > MAX_TAIL + 1 {
            return Err(contract(format!("level {level} out of range")));
        }
        if !x.is_finite() {
            return Err(contract("non-finite point"));
        }
        let k = (x * cell_scale(level)).floor();
        Ok(Self::from_cell_number(level, k as i64))
    }

    /// Label of the `k`-th level-`level` cell, `[k·2^{1-ℓ}, (k+1)·2^{1-ℓ})`.
    pub fn from_cell_number(level: u32, k: i64) -> Self {
        let tail = level - 1;
        let per_unit = 1i64 << tail;
        Self {
            root: k.div_euclid(per_unit),
            bits: k.rem_euclid(per_unit) as u64,
            len: tail as u8,
        }
    }

    /// Inverse of [`TreeIndex::from_cell_number`].
    pub fn cell_number(&self) -> i64 {
        (self.root << self.len) + self.bits as i64
    }
}

impl Ord for TreeIndex {
    /// Lexicographic on `(j₁, j₂, …)`; a proper prefix sorts first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.root.cmp(&other.root).then_with(|| {
            let common = self.len.min(other.len) as u32;
            let a = self.bits >> (self.len as u32 - common);
            let b = other.bits >> (other.len as u32 - common);
            a.cmp(&b).then(self.len.cmp(&other.len))
        })
    }
}

impl PartialOrd for TreeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TreeIndex {
    /// `(j1)` at rank 1, `(j1;b2b3…br)` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.root)?;
        if self.len > 0 {
            write!(f, ";")?;
            for n in 2..=self.rank() {
                write!(f, "{}", self.bit(n))?;
            }
        }
        write!(f, ")")
    }
}

impl FromStr for TreeIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed tree index {s:?}, expected \"(j1;b2b3...)\""));
        let inner = s
            .trim()
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(bad)?;
        let (root, tail) = match inner.split_once(';') {
            Some((r, t)) => (r, t),
            None => (inner, ""),
        };
        let root: i64 = root.trim().parse().map_err(|_| bad())?;
        let bits = tail
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(bad()),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(root, &bits)
    }
}

/// Level-`level` cell of a rank-`level` label (contract: ranks must match).
pub fn cell_of(level: u32, i: &TreeIndex) -> Result<Interval> {
    if i.rank() != level {
        return Err(contract(format!("{i} has rank {}, expected level {level}", i.rank())));
    }
    Ok(i.cell())
}

/// The two level-`level+1` labels refining a level-`level` cell.
pub fn children(level: u32, i: &TreeIndex) -> Result<(TreeIndex, TreeIndex)> {
    cell_of(level, i)?;
    Ok((i.child(0)?, i.child(1)?))
}

/// A label of `Ĩ(ℓ) = I(ℓ) × {0,1}^{r-1}`: a level-`ℓ` root block and a tail.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftedIndex {
    pub block: TreeIndex,
    pub tail: Vec<u8>,
}

impl ShiftedIndex {
    pub fn rank(&self) -> u32 {
        1 + self.tail.len() as u32
    }
}

/// `θ_{ℓ-1,r}`: regroups `(j₁, …, j_{ℓ+r-1})` as `((j₁ … j_ℓ), j_{ℓ+1}, …)`.
/// At `ℓ = 1` the block is the root alone, i.e. the identity regrouping.
pub fn theta_shift(level: u32, j: &TreeIndex) -> Result<ShiftedIndex> {
    if level == 0 || j.rank() < level {
        return Err(contract(format!("{j} has rank {} < level {level}", j.rank())));
    }
    let block = j.truncate(level)?;
    let tail = (level + 1..=j.rank()).map(|n| j.bit(n)).collect();
    Ok(ShiftedIndex { block, tail })
}

pub fn theta_inverse(i: &ShiftedIndex) -> Result<TreeIndex> {
    i.tail.iter().try_fold(i.block, |acc, &b| acc.child(b))
}

/// An element of `𝕀(ℓ)`: a tree label read at working level `ℓ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    level: u32,
    path: TreeIndex,
}

impl BasisIndex {
    pub fn new(level: u32, path: TreeIndex) -> Result<Self> {
        if level == 0 {
            return Err(contract("levels start at 1"));
        }
        if path.rank() < level {
            return Err(contract(format!("{path} is shorter than level {level}")));
        }
        if path.rank() > level && path.last_bit() != Some(0) {
            return Err(contract(format!(
                "{path} is not a basis label at level {level}: Haar labels end in bit 0"
            )));
        }
        Ok(Self { level, path })
    }

    pub fn parse(level: u32, s: &str) -> Result<Self> {
        Self::new(level, s.parse()?)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn path(&self) -> &TreeIndex {
        &self.path
    }

    /// Rank inside `𝕀(ℓ)`: 1 for cell indicators, `r ≥ 2` for Haar functions.
    pub fn rank(&self) -> u32 {
        self.path.rank() - self.level + 1
    }

    /// The level-`ℓ` cell this function lives in.
    pub fn root_cell(&self) -> TreeIndex {
        self.path.truncate(self.level).expect("rank ≥ level")
    }

    /// `B_{ℓ,i}`: the cell itself at rank 1, the parent of the labelled
    /// half-cell (a level-`ℓ+r-2` cell) at rank `r ≥ 2`.
    pub fn support(&self) -> Interval {
        if self.rank() == 1 {
            self.path.cell()
        } else {
            self.path.parent().expect("rank ≥ 2").cell()
        }
    }

    /// Value of `f_{ℓ,i}` at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let support = self.support();
        if !support.contains(x) {
            return 0.0;
        }
        let amp = support.len().sqrt().recip();
        if self.rank() == 1 || self.path.cell().contains(x) {
            amp
        } else {
            -amp
        }
    }

    /// Constant value of `f` on the left half of its support; used when a
    /// caller integrates over cells already known to be inside the support.
    pub fn amplitude(&self) -> f64 {
        self.support().len().sqrt().recip()
    }

    /// The same function labelled in `𝕀 = 𝕀(1)`. Only Haar labels (rank ≥ 2)
    /// carry over; rank-1 indicators at `ℓ ≥ 2` are new functions.
    pub fn as_level_one(&self) -> Option<BasisIndex> {
        (self.level == 1 || self.rank() >= 2).then_some(BasisIndex {
            level: 1,
            path: self.path,
        })
    }

    pub fn mark_measure(&self) -> MarkMeasure {
        let support = self.support();
        MarkMeasure {
            index: *self,
            support,
            density: 1.0 / support.len(),
        }
    }
}

impl Ord for BasisIndex {
    /// Rank first, then the lexicographic label order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.level
            .cmp(&other.level)
            .then(self.rank().cmp(&other.rank()))
            .then(self.path.cmp(&other.path))
    }
}

impl PartialOrd for BasisIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.path.fmt(f)
    }
}

/// `λ_{f_{ℓ,i}}(dx) = |f_{ℓ,i}(x)|² dx`. For Haar-type functions the density
/// is the constant `1/|B_{ℓ,i}|` on the support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarkMeasure {
    pub index: BasisIndex,
    pub support: Interval,
    pub density: f64,
}

impl MarkMeasure {
    pub fn total_mass(&self) -> f64 {
        self.density * self.support.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = self.support;
        let x = s.lo + rng.gen::<f64>() * s.len();
        // guard against rounding onto the open endpoint
        if x < s.hi {
            x
        } else {
            s.lo
        }
    }
}

pub fn sample_mark<R: Rng + ?Sized>(i: &BasisIndex, rng: &mut R) -> f64 {
    i.mark_measure().sample(rng)
}

/// Window aligned to the level-`level` grid, or a contract violation.
pub fn check_window(level: u32, window: &Interval) -> Result<()> {
    if !window.is_aligned(level) {
        return Err(contract(format!(
            "window {window} is not aligned to level {level} cells"
        )));
    }
    Ok(())
}

/// Level-`level` cells covering `window`, left to right.
pub fn level_cells(level: u32, window: &Interval) -> Result<Vec<TreeIndex>> {
    check_window(level, window)?;
    let scale = cell_scale(level);
    let first = (window.lo * scale) as i64;
    let last = (window.hi * scale) as i64;
    Ok((first..last).map(|k| TreeIndex::from_cell_number(level, k)).collect())
}

/// The basis functions of one level-`level` cell with rank `≤ max_rank`, by rank.
pub fn cell_basis(level: u32, max_rank: u32, cell: &TreeIndex) -> Result<Vec<BasisIndex>> {
    if cell.rank() != level {
        return Err(contract(format!("{cell} is not a level-{level} cell")));
    }
    if max_rank == 0 {
        return Err(contract("rank truncation must be at least 1"));
    }
    let mut out = vec![BasisIndex::new(level, *cell)?];
    let mut frontier = vec![*cell];
    for _ in 2..=max_rank {
        for node in &frontier {
            out.push(BasisIndex::new(level, node.child(0)?)?);
        }
        frontier = frontier
            .iter()
            .flat_map(|n| [n.child(0), n.child(1)])
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(out)
}

/// `𝕀(ℓ;R) ∩ 𝕀_ℓ(A)`: every basis label of rank `≤ max_rank` whose support
/// lies in the window, ordered by rank and then label.
pub fn basis_indices(level: u32, max_rank: u32, window: &Interval) -> Result<Vec<BasisIndex>> {
    let mut out = Vec::new();
    for cell in level_cells(level, window)? {
        out.extend(cell_basis(level, max_rank, &cell)?);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ti(s: &str) -> TreeIndex {
        s.parse().unwrap()
    }

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn cells_of_examples() {
        assert_eq!(cell_of(1, &ti("(5)")).unwrap(), Interval { lo: 5.0, hi: 6.0 });
        assert_eq!(cell_of(3, &ti("(0;11)")).unwrap(), Interval { lo: 0.75, hi: 1.0 });
        assert_eq!(cell_of(2, &ti("(-1;1)")).unwrap(), Interval { lo: -0.5, hi: 0.0 });
        assert!(matches!(cell_of(2, &ti("(0)")), Err(Error::Contract(_))));
    }

    #[test]
    fn children_examples() {
        let (a, b) = children(1, &ti("(0)")).unwrap();
        assert_eq!((a, b), (ti("(0;0)"), ti("(0;1)")));
        assert_eq!(a.cell(), Interval { lo: 0.0, hi: 0.5 });
        assert_eq!(b.cell(), Interval { lo: 0.5, hi: 1.0 });
        let (a, b) = children(2, &ti("(0;1)")).unwrap();
        assert_eq!((a, b), (ti("(0;10)"), ti("(0;11)")));
        assert_eq!(a.parent(), Some(ti("(0;1)")));
    }

    #[test]
    fn theta_examples() {
        let j = ti("(0;101)");
        let same = theta_shift(1, &j).unwrap();
        assert_eq!(same.block, ti("(0)"));
        assert_eq!(same.tail, vec![1, 0, 1]);
        let s = theta_shift(2, &j).unwrap();
        assert_eq!(s.block, ti("(0;1)"));
        assert_eq!(s.tail, vec![0, 1]);
        assert_eq!(s.rank(), 3);
        assert_eq!(theta_inverse(&s).unwrap(), j);
        assert!(theta_shift(5, &j).is_err());
    }

    #[test]
    fn basis_index_examples() {
        let w = unit();
        let labels = |r| -> Vec<String> { basis_indices(1, r, &w).unwrap().iter().map(|b| b.to_string()).collect() };
        assert_eq!(labels(1), ["(0)"]);
        assert_eq!(labels(2), ["(0)", "(0;0)"]);
        assert_eq!(labels(3), ["(0)", "(0;0)", "(0;00)", "(0;10)"]);
        assert_eq!(
            basis_indices(3, 4, &Interval::new(-1.0, 1.0).unwrap()).unwrap().len(),
            2 * 4 * 8
        );
        assert!(basis_indices(2, 2, &Interval::new(0.0, 0.3).unwrap()).is_err());
    }

    #[test]
    fn basis_values() {
        let f = BasisIndex::parse(1, "(0)").unwrap();
        assert_eq!(f.eval(0.3), 1.0);
        let g = BasisIndex::parse(2, "(0;0)").unwrap();
        assert_eq!(g.rank(), 1);
        assert!((g.eval(0.3) - 2f64.sqrt()).abs() < 1e-15);
        let h = BasisIndex::parse(1, "(0;0)").unwrap();
        assert_eq!(h.rank(), 2);
        assert_eq!(h.eval(0.25), 1.0);
        assert_eq!(h.eval(0.75), -1.0);
        assert_eq!(h.eval(1.25), 0.0);
        assert!(BasisIndex::parse(1, "(0;1)").is_err());
    }

    #[test]
    fn supports() {
        let h = BasisIndex::parse(2, "(0;100)").unwrap();
        assert_eq!(h.rank(), 3);
        assert_eq!(h.root_cell(), ti("(0;1)"));
        assert_eq!(h.support(), Interval { lo: 0.5, hi: 0.75 });
        assert_eq!(h.amplitude(), 2.0);
    }

    #[test]
    fn marks_fall_in_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i = BasisIndex::parse(1, "(3)").unwrap();
        for _ in 0..1000 {
            let x = sample_mark(&i, &mut rng);
            assert!((3.0..4.0).contains(&x));
        }
        assert_eq!(i.mark_measure().total_mass(), 1.0);
    }

    #[test]
    fn display_round_trip() {
        for s in ["(0)", "(-3;0101)", "(12;1)"] {
            assert_eq!(ti(s).to_string(), s);
        }
        assert_eq!(ti("(0;)"), ti("(0)"));
        assert!("(0;2)".parse::<TreeIndex>().is_err());
        assert!("0;1".parse::<TreeIndex>().is_err());
    }

    #[test]
    fn ordering_is_lexicographic() {
        let mut v = [ti("(0;1)"), ti("(0)"), ti("(-1;11)"), ti("(0;01)"), ti("(0;0)")];
        v.sort();
        let s: Vec<_> = v.iter().map(|t| t.to_string()).collect();
        assert_eq!(s, ["(-1;11)", "(0)", "(0;0)", "(0;01)", "(0;1)"]);
    }

    #[test]
    fn cell_numbers_round_trip() {
        for level in 1..6 {
            for k in -40..40 {
                let t = TreeIndex::from_cell_number(level, k);
                assert_eq!(t.rank(), level);
                assert_eq!(t.cell_number(), k);
                let c = t.cell();
                assert_eq!(TreeIndex::containing(level, c.lo).unwrap(), t);
            }
        }
    }
}
