//! Closed real intervals with outward rounding.
//!
//! Every arithmetic operation checks whether the floating-point result was
//! exact (via error-free transformations) and only widens the endpoint by one
//! ulp when rounding actually happened. Exact inputs therefore give exact,
//! zero-width results, while inexact ones stay enclosing.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Error term of `a + b` (Knuth's TwoSum).
fn sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

fn round_down(v: f64, err: f64) -> f64 {
    if err < 0.0 || (err != 0.0 && err.is_nan()) {
        v.next_down()
    } else {
        v
    }
}

fn round_up(v: f64, err: f64) -> f64 {
    if err > 0.0 || (err != 0.0 && err.is_nan()) {
        v.next_up()
    } else {
        v
    }
}

/// `a + b` rounded toward -inf.
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    round_down(s, sum_err(a, b, s))
}

/// `a + b` rounded toward +inf.
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if !s.is_finite() {
        return s;
    }
    round_up(s, sum_err(a, b, s))
}

pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    round_down(p, a.mul_add(b, -p))
}

pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !p.is_finite() {
        return p;
    }
    round_up(p, a.mul_add(b, -p))
}

pub fn div_down(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    // a - q*b has the sign of the true quotient's excess over q when b > 0.
    let rem = -q.mul_add(b, -a);
    let err = if b > 0.0 { rem } else { -rem };
    round_down(q, err)
}

pub fn div_up(a: f64, b: f64) -> f64 {
    let q = a / b;
    if !q.is_finite() {
        return q;
    }
    let rem = -q.mul_add(b, -a);
    let err = if b > 0.0 { rem } else { -rem };
    round_up(q, err)
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        self.lo + (self.hi - self.lo) / 2.0
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    /// Intersection, falling back to `self` when the two are disjoint
    /// (which only happens through rounding noise at the ulp level).
    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Interval::new(lo, hi)
        } else {
            *self
        }
    }

    pub fn scale(&self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval::new(mul_down(self.lo, c), mul_up(self.hi, c))
        } else {
            Interval::new(mul_down(self.hi, c), mul_up(self.lo, c))
        }
    }

    /// Quotient by an interval that lies strictly above zero.
    pub fn div_positive(&self, d: &Interval) -> Interval {
        debug_assert!(d.lo > 0.0);
        let cands_lo = [
            div_down(self.lo, d.lo),
            div_down(self.lo, d.hi),
            div_down(self.hi, d.lo),
            div_down(self.hi, d.hi),
        ];
        let cands_hi = [
            div_up(self.lo, d.lo),
            div_up(self.lo, d.hi),
            div_up(self.hi, d.lo),
            div_up(self.hi, d.hi),
        ];
        Interval::new(
            cands_lo.iter().copied().fold(f64::INFINITY, f64::min),
            cands_hi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// `self^k` for a nonnegative interval, by repeated squaring.
    pub fn powi_nonneg(&self, mut k: u64) -> Interval {
        debug_assert!(self.lo >= 0.0);
        let mut base = *self;
        let mut acc = Interval::ONE;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    /// Maximum of two intervals in the interval-arithmetic sense.
    pub fn max(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.max(other.lo), self.hi.max(other.hi))
    }

    pub fn min(&self, other: &Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.min(other.hi))
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(add_down(self.lo, rhs.lo), add_up(self.hi, rhs.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(add_down(self.lo, -rhs.hi), add_up(self.hi, -rhs.lo))
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let pairs = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let lo = pairs
            .iter()
            .map(|&(a, b)| mul_down(a, b))
            .fold(f64::INFINITY, f64::min);
        let hi = pairs
            .iter()
            .map(|&(a, b)| mul_up(a, b))
            .fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.12}, {:.12}]", self.lo, self.hi)
    }
}
