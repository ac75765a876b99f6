//! The admissible interaction parameter α.

use std::fmt;
use std::str::FromStr;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// An exact rational α restricted to `{2/m} ∪ {-1/m}`, `m ≥ 1`.
///
/// Floating-point values are never accepted: a kernel whose validity depends
/// on `-1/α` must see the exact bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AlphaParam(Rational64);

impl AlphaParam {
    pub fn new(numerator: i64, denominator: i64) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::InadmissibleAlpha(format!("{numerator}/0")));
        }
        let r = Rational64::new(numerator, denominator);
        if Self::admissible(r) {
            Ok(Self(r))
        } else {
            Err(Error::InadmissibleAlpha(r.to_string()))
        }
    }

    /// `-1/m`.
    pub fn negative(m: u32) -> Result<Self> {
        Self::new(-1, m as i64)
    }

    /// `2/m`.
    pub fn positive(m: u32) -> Result<Self> {
        Self::new(2, m as i64)
    }

    fn admissible(r: Rational64) -> bool {
        let (n, d) = (*r.numer(), *r.denom());
        // Rational64 keeps the denominator positive and the fraction reduced;
        // 2/m reduces to 1/(m/2) when m is even and stays 2/m otherwise.
        match n {
            -1 | 1 => true,
            2 => d % 2 == 1,
            _ => false,
        }
    }

    pub fn numerator(self) -> i64 {
        *self.0.numer()
    }

    pub fn denominator(self) -> i64 {
        *self.0.denom()
    }

    pub fn value(self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }

    pub fn is_negative(self) -> bool {
        self.numerator() < 0
    }

    /// The `m` in `α = -1/m` or `α = 2/m`.
    pub fn superposition_count(self) -> u32 {
        let (n, d) = (self.numerator(), self.denominator());
        match n {
            -1 => d as u32,
            1 => 2 * d as u32,
            _ => d as u32,
        }
    }

    /// Upper end of the admissible spectrum: `-1/α` for α < 0, unbounded otherwise.
    pub fn spectral_upper_bound(self) -> f64 {
        if self.is_negative() {
            -1.0 / self.value()
        } else {
            f64::INFINITY
        }
    }
}

impl fmt::Display for AlphaParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for AlphaParam {
    type Err = Error;

    /// Accepts `"p"` or `"p/q"` with integer `p`, `q`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InadmissibleAlpha(s.to_string());
        let t = s.trim();
        let (n, d) = match t.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (t, "1"),
        };
        let n: i64 = n.parse().map_err(|_| bad())?;
        let d: i64 = d.parse().map_err(|_| bad())?;
        Self::new(n, d).map_err(|_| bad())
    }
}
