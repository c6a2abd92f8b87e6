//! Finite-modification hulls, tail-class membership, and the single-coordinate
//! mixing construction of weak 0-approximations.
//!
//! Two points are tail-equivalent when they agree past some index. Changing
//! finitely many coordinates of `x` never leaves its class, so the values of `f`
//! over depth-`m` modifications give an inner estimate of the class's value hull.
//! If that estimate straddles `r`, walking from the low witness to the high one
//! one coordinate at a time finds a single coordinate whose two-point mixture
//! has expectation exactly `r`.

use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Signed;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::exact::{rational, simplest_rational_within};
use crate::expectation::{expect, ExpectError, ExpectOptions};
use crate::interval::Interval;
use crate::model::{
    Assignment, CoordinateMeasure, EvalPolicy, FunctionFamily, HybridMeasure, ModelError,
    PointSpec, ProductMeasure, SpaceFamily, TailFunction,
};
use crate::seeds::substream_seed;

/// Default cap on the number of modifications enumerated exhaustively.
pub const ENUMERATION_BUDGET: u64 = 1 << 20;
/// An evaluation whose enclosure is at most this wide is treated as a value.
pub const VALUE_TOLERANCE: f64 = 1e-13;
/// Accepted gap between the mixed expectation and its target.
pub const MIXING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TailClassError {
    #[error("endpoints do not straddle r = {r}: f(x) = {fx}, f(y) = {fy}")]
    NotStraddling { fx: f64, fy: f64, r: f64 },
    #[error("no agreement index relates the two points")]
    NotTailEquivalent,
    #[error("f is not determined at z_{index}: enclosure {value}")]
    Undetermined { index: usize, value: Interval },
    #[error("no sample straddled r = {r} at depth {depth} after {samples} samples")]
    StraddleNotFound {
        depth: usize,
        samples: usize,
        r: f64,
    },
    #[error("at least one sample is required")]
    NoSamples,
    #[error(transparent)]
    Engine(#[from] ExpectError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HullMethod {
    /// Every modification was evaluated.
    Exhaustive,
    /// Closed-form optimizer for a coordinate-separable family; exact.
    Separable,
    /// Budget exceeded: coordinate-wise local search, inner bounds only.
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullEstimate {
    pub depth: usize,
    /// `[min_value.lo, max_value.hi]`.
    pub interval: Interval,
    pub min_value: Interval,
    pub max_value: Interval,
    pub argmin: PointSpec,
    pub argmax: PointSpec,
    pub method: HullMethod,
    pub points_examined: u64,
    pub residual: f64,
}

impl HullEstimate {
    /// Whether the witnesses certifiably bracket `r`.
    pub fn straddles(&self, r: f64) -> bool {
        self.min_value.hi <= r
            && r <= self.max_value.lo
            && self.min_value.width() <= VALUE_TOLERANCE
            && self.max_value.width() <= VALUE_TOLERANCE
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    value: Interval,
    index: u64,
}

fn evaluate(f: &TailFunction, x: &PointSpec, policy: EvalPolicy) -> (Interval, f64) {
    let (e, res) = f.eval_with_policy(x, policy);
    (e.interval(), res)
}

/// Coordinates past this index cannot change `f`, when such an index exists.
fn relevant_depth(f: &TailFunction, m: usize) -> usize {
    match f.family() {
        FunctionFamily::Cylinder(c) => m.min(c.depth()),
        _ if f.range().is_point() => 0,
        _ => m,
    }
}

fn modification_count(spaces: &SpaceFamily, m: usize) -> Option<u64> {
    (1..=m).try_fold(1u64, |acc, i| acc.checked_mul(spaces.arity(i) as u64))
}

fn decode(spaces: &SpaceFamily, m: usize, mut index: u64) -> Vec<usize> {
    let mut head = vec![0; m];
    for i in (1..=m).rev() {
        let a = spaces.arity(i) as u64;
        head[i - 1] = (index % a) as usize;
        index /= a;
    }
    head
}

/// The range of `f` over all points that differ from `x` only in coordinates `1..=m`.
pub fn hull_estimate(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    m: usize,
    budget: u64,
    policy: EvalPolicy,
) -> HullEstimate {
    let depth = relevant_depth(f, m);
    match modification_count(spaces, depth) {
        Some(count) if count <= budget => exhaustive(f, spaces, x, m, depth, count, policy),
        _ => match f.family() {
            FunctionFamily::ProductIndicator(_) | FunctionFamily::DiscountedSum(_) => {
                separable(f, spaces, x, m, policy)
            }
            FunctionFamily::Cylinder(_) => greedy(f, spaces, x, m, depth, policy),
        },
    }
}

fn exhaustive(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    m: usize,
    depth: usize,
    count: u64,
    policy: EvalPolicy,
) -> HullEstimate {
    let better_min = |a: Candidate, b: Candidate| {
        if (b.value.lo, b.index) < (a.value.lo, a.index) {
            b
        } else {
            a
        }
    };
    let better_max = |a: Candidate, b: Candidate| {
        if b.value.hi > a.value.hi || (b.value.hi == a.value.hi && b.index < a.index) {
            b
        } else {
            a
        }
    };
    let sentinel = Candidate {
        value: Interval::point(f64::INFINITY),
        index: u64::MAX,
    };
    let sentinel_max = Candidate {
        value: Interval::point(f64::NEG_INFINITY),
        ..sentinel
    };
    let (lo, hi, residual) = (0..count)
        .into_par_iter()
        .map(|index| {
            let (value, residual) =
                evaluate(f, &x.with_prefix(decode(spaces, depth, index)), policy);
            let c = Candidate { value, index };
            (c, c, residual)
        })
        .reduce(
            || (sentinel, sentinel_max, 0.0),
            |a, b| (better_min(a.0, b.0), better_max(a.1, b.1), a.2.max(b.2)),
        );
    let argmin = x.with_prefix(decode(spaces, depth, lo.index));
    let argmax = x.with_prefix(decode(spaces, depth, hi.index));
    finish(
        m,
        lo.value,
        hi.value,
        argmin,
        argmax,
        HullMethod::Exhaustive,
        count,
        residual,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    depth: usize,
    min_value: Interval,
    max_value: Interval,
    argmin: PointSpec,
    argmax: PointSpec,
    method: HullMethod,
    points_examined: u64,
    residual: f64,
) -> HullEstimate {
    HullEstimate {
        depth,
        interval: Interval::new(min_value.lo, max_value.hi.max(min_value.lo)),
        min_value,
        max_value,
        argmin,
        argmax,
        method,
        points_examined,
        residual,
    }
}

fn separable(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    m: usize,
    policy: EvalPolicy,
) -> HullEstimate {
    let base = x.head(m);
    let (min_head, max_head) = match f.family() {
        FunctionFamily::ProductIndicator(pi) => {
            // Max: hit every target within reach. Min: miss one target as early as possible.
            let max_head: Vec<usize> = (1..=m)
                .map(|i| {
                    let t = pi.targets.at(i);
                    if t < spaces.arity(i) {
                        t
                    } else {
                        base[i - 1]
                    }
                })
                .collect();
            let mut min_head = base.clone();
            if let Some(i) = (1..=m).find(|&i| spaces.arity(i) >= 2) {
                let t = pi.targets.at(i);
                min_head[i - 1] = if t == 0 { 1 } else { 0 };
            }
            (min_head, max_head)
        }
        FunctionFamily::DiscountedSum(ds) => {
            let pick = |i: usize, want_max: bool| {
                let row = ds.scores.row(i);
                let n = row.len().min(spaces.arity(i));
                let mut best = 0;
                for s in 1..n {
                    let better = if want_max {
                        row[s] > row[best]
                    } else {
                        row[s] < row[best]
                    };
                    if better {
                        best = s;
                    }
                }
                best
            };
            (
                (1..=m).map(|i| pick(i, false)).collect(),
                (1..=m).map(|i| pick(i, true)).collect(),
            )
        }
        FunctionFamily::Cylinder(_) => unreachable!("cylinders are not separable"),
    };
    let argmin = x.with_prefix(min_head);
    let argmax = x.with_prefix(max_head);
    let (lo, r1) = evaluate(f, &argmin, policy);
    let (hi, r2) = evaluate(f, &argmax, policy);
    finish(
        m,
        lo,
        hi,
        argmin,
        argmax,
        HullMethod::Separable,
        2,
        r1.max(r2),
    )
}

fn greedy(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    m: usize,
    depth: usize,
    policy: EvalPolicy,
) -> HullEstimate {
    const MAX_PASSES: usize = 64;
    let mut examined = 0u64;
    let mut residual = 0.0f64;
    let mut search = |want_max: bool| {
        let mut head = x.head(depth);
        let (mut best, res) = evaluate(f, &x.with_prefix(head.clone()), policy);
        residual = residual.max(res);
        examined += 1;
        for _ in 0..MAX_PASSES {
            let mut improved = false;
            for i in 1..=depth {
                for s in 0..spaces.arity(i) {
                    if s == head[i - 1] {
                        continue;
                    }
                    let mut trial = head.clone();
                    trial[i - 1] = s;
                    let (v, res) = evaluate(f, &x.with_prefix(trial.clone()), policy);
                    residual = residual.max(res);
                    examined += 1;
                    let better = if want_max {
                        v.hi > best.hi
                    } else {
                        v.lo < best.lo
                    };
                    if better {
                        head = trial;
                        best = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        (head, best)
    };
    let (min_head, lo) = search(false);
    let (max_head, hi) = search(true);
    finish(
        m,
        lo,
        hi,
        x.with_prefix(min_head),
        x.with_prefix(max_head),
        HullMethod::Greedy,
        examined,
        residual,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "depth", rename_all = "snake_case")]
pub enum Verdict {
    Z0Certified,
    /// The depth-`m` hull does not reach `r`; finite search cannot rule membership out.
    UndeterminedAtDepth(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassVerdict {
    pub verdict: Verdict,
    pub r: f64,
    pub hull: HullEstimate,
}

/// Certify that the tail class of `x` attains values on both sides of `r`.
pub fn classify(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    r: f64,
    m: usize,
    policy: EvalPolicy,
) -> ClassVerdict {
    let hull = hull_estimate(f, spaces, x, m, ENUMERATION_BUDGET, policy);
    let verdict = if hull.straddles(r) {
        Verdict::Z0Certified
    } else {
        Verdict::UndeterminedAtDepth(m)
    };
    ClassVerdict { verdict, r, hull }
}

/// A two-point mixture at one coordinate whose expectation is `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakApproxCertificate {
    /// `z_k`: first `k − 1` coordinates from `y`, the rest from `x`.
    pub z: PointSpec,
    pub k: usize,
    pub alpha: f64,
    /// Simplest fraction reproducing `r` within tolerance, as `num/den`.
    pub alpha_rational: Option<String>,
    /// `(x_k, y_k)`: the symbols receiving `α` and `1 − α`.
    pub symbols: (usize, usize),
    pub tau: CoordinateMeasure,
    /// `(f(z_k), f(z_{k+1}))`.
    pub values: (f64, f64),
    pub r: f64,
    pub achieved: f64,
    /// `f(z_1), …, f(z_{n+1})`.
    pub walk: Vec<f64>,
    pub residual: f64,
}

impl WeakApproxCertificate {
    /// The two points mixed by `τ_k`; they differ only at coordinate `k`.
    pub fn mixed_outcomes(&self) -> (PointSpec, PointSpec) {
        (
            self.z.modified(self.k, self.symbols.0),
            self.z.modified(self.k, self.symbols.1),
        )
    }

    /// `Σ_s τ_k(s) · f(z with coordinate k = s)`, evaluated directly.
    pub fn mixed_expectation(&self, f: &TailFunction, policy: EvalPolicy) -> Option<f64> {
        let mut acc = 0.0;
        for s in self.tau.support() {
            let (v, _) = evaluate(f, &self.z.modified(self.k, s), policy);
            if v.width() > VALUE_TOLERANCE {
                return None;
            }
            acc += self.tau.weight(s) * v.midpoint();
        }
        Some(acc)
    }

    /// The certificate as an eventually pure product measure: Dirac on `z`
    /// everywhere except coordinate `k`, which follows `τ_k`. Its expectation of `f` is `r`.
    pub fn as_strategy(&self) -> HybridMeasure {
        let mut head: Vec<Assignment> = (1..self.k)
            .map(|i| Assignment::Dirac(self.z.coordinate(i)))
            .collect();
        head.push(Assignment::Measure(self.tau.clone()));
        HybridMeasure::new(head, self.z.clone())
    }

    /// The walk's consecutive segments cover `[f(x), f(y)]`.
    pub fn covering_holds(&self) -> bool {
        let (Some(&first), Some(&last)) = (self.walk.first(), self.walk.last()) else {
            return false;
        };
        let lo = self.walk.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.walk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= first.min(last) && first.max(last) <= hi
    }
}

fn point_value(
    f: &TailFunction,
    x: &PointSpec,
    policy: EvalPolicy,
    index: usize,
) -> Result<(f64, f64), TailClassError> {
    let (v, res) = evaluate(f, x, policy);
    if v.width() > VALUE_TOLERANCE {
        return Err(TailClassError::Undetermined { index, value: v });
    }
    Ok((v.midpoint(), res))
}

/// Walk `z_1 = x, …, z_{n+1} = y` and mix the first straddling pair.
///
/// `agreement` is an index past which `x` and `y` agree; when omitted it is
/// read off the representation of the two points.
pub fn construct_weak_zero(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    y: &PointSpec,
    r: f64,
    agreement: Option<usize>,
    policy: EvalPolicy,
) -> Result<WeakApproxCertificate, TailClassError> {
    let n = agreement
        .or_else(|| x.agreement_index(y))
        .ok_or(TailClassError::NotTailEquivalent)?
        .max(1);
    let (fx, r0) = point_value(f, x, policy, 1)?;
    let (fy, r1) = point_value(f, y, policy, n + 1)?;
    if fx > r || fy < r {
        return Err(TailClassError::NotStraddling { fx, fy, r });
    }
    let mut residual = r0.max(r1);
    let mut walk = Vec::with_capacity(n + 1);
    for k in 1..=n + 1 {
        let z = x.with_prefix(y.head(k - 1));
        let (v, res) = point_value(f, &z, policy, k)?;
        residual = residual.max(res);
        walk.push(v);
    }
    if walk[n] != fy {
        // z_{n+1} should be y itself.
        return Err(TailClassError::NotTailEquivalent);
    }
    let k = (1..=n)
        .find(|&k| {
            let (a, b) = (walk[k - 1], walk[k]);
            a.min(b) <= r && r <= a.max(b)
        })
        .expect("consecutive segments cover [f(x), f(y)]");
    let (a, b) = (walk[k - 1], walk[k]);
    let alpha = if a == b {
        1.0
    } else {
        ((b - r) / (b - a)).clamp(0.0, 1.0)
    };
    let achieved = alpha * a + (1.0 - alpha) * b;
    debug_assert!((achieved - r).abs() <= MIXING_TOLERANCE);

    let xs = x.coordinate(k);
    let ys = y.coordinate(k);
    let mut weights = vec![0.0; spaces.arity(k)];
    weights[xs] += alpha;
    weights[ys] += 1.0 - alpha;
    let tau = CoordinateMeasure::new(weights)?;

    Ok(WeakApproxCertificate {
        z: x.with_prefix(y.head(k - 1)),
        k,
        alpha,
        alpha_rational: exact_alpha(alpha, a, b, r),
        symbols: (xs, ys),
        tau,
        values: (a, b),
        r,
        achieved,
        walk,
        residual,
    })
}

/// A small fraction `p/q` with `|p/q·a + (1 − p/q)·b − r| ≤ MIXING_TOLERANCE`, checked exactly.
fn exact_alpha(alpha: f64, a: f64, b: f64, r: f64) -> Option<String> {
    let q = simplest_rational_within(alpha, MIXING_TOLERANCE)?;
    let qa = BigRational::new((*q.numer()).into(), (*q.denom()).into());
    let one = BigRational::from_integer(1.into());
    let mixed = &qa * rational(a) + (one - &qa) * rational(b);
    if (mixed - rational(r)).abs() <= rational(MIXING_TOLERANCE) {
        Some(if *q.denom() == 1 {
            q.numer().to_string()
        } else {
            format!("{}/{}", q.numer(), q.denom())
        })
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub depth: usize,
    pub seed: u64,
    pub retries: usize,
    /// Target value; the midpoint of the certified expectation when `None`.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCertificate {
    pub certificate: WeakApproxCertificate,
    pub expectation: Interval,
    /// Zero-based substream index of the sample that succeeded.
    pub sample_index: usize,
    pub samples_tried: usize,
}

/// Sample points under `σ` until one's depth-`m` hull straddles `r`, then build the certificate.
pub fn weak_zero_from_sample(
    f: &TailFunction,
    spaces: &SpaceFamily,
    sigma: &Arc<ProductMeasure>,
    cfg: SampleConfig,
    opts: &ExpectOptions,
) -> Result<SampledCertificate, TailClassError> {
    if cfg.retries == 0 {
        return Err(TailClassError::NoSamples);
    }
    let expectation = expect(f, sigma.as_ref(), opts)?
        .interval
        .intersect(&f.range());
    let r = cfg.r.unwrap_or_else(|| expectation.midpoint());
    for j in 0..cfg.retries {
        let x = PointSpec::lazy(substream_seed(cfg.seed, j as u64), Arc::clone(sigma));
        let hull = hull_estimate(f, spaces, &x, cfg.depth, ENUMERATION_BUDGET, opts.policy);
        if !hull.straddles(r) {
            continue;
        }
        match construct_weak_zero(f, spaces, &hull.argmin, &hull.argmax, r, None, opts.policy) {
            Ok(certificate) => {
                return Ok(SampledCertificate {
                    certificate,
                    expectation,
                    sample_index: j,
                    samples_tried: j + 1,
                })
            }
            Err(TailClassError::NotStraddling { .. } | TailClassError::Undetermined { .. }) => {
                continue
            }
            Err(e) => return Err(e),
        }
    }
    Err(TailClassError::StraddleNotFound {
        depth: cfg.depth,
        samples: cfg.retries,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cylinder, GeometricWeights, ScoreTable, SymbolSequence};

    fn policy() -> EvalPolicy {
        ExpectOptions::default().policy
    }

    fn weighted_pair() -> TailFunction {
        TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| {
            0.7 * p[0] as f64 + 0.3 * p[1] as f64
        }))
    }

    fn all_ones_indicator() -> TailFunction {
        TailFunction::product_indicator(SymbolSequence::constant(1))
    }

    #[test]
    fn indicator_hull_depth_one() {
        let h = hull_estimate(
            &all_ones_indicator(),
            &SpaceFamily::binary(),
            &PointSpec::constant(1),
            1,
            ENUMERATION_BUDGET,
            policy(),
        );
        assert_eq!(h.interval, Interval::new(0.0, 1.0));
        assert_eq!(h.argmin.head(3), vec![0, 1, 1]);
        assert_eq!(h.argmax.head(3), vec![1, 1, 1]);
        assert_eq!(h.method, HullMethod::Exhaustive);
    }

    #[test]
    fn constant_hull_is_a_point() {
        let h = hull_estimate(
            &TailFunction::constant(2.5),
            &SpaceFamily::binary(),
            &PointSpec::constant(0),
            3,
            ENUMERATION_BUDGET,
            policy(),
        );
        assert_eq!(h.interval, Interval::point(2.5));
    }

    #[test]
    fn discounted_hull_depth_two() {
        let f = TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        );
        let h = hull_estimate(
            &f,
            &SpaceFamily::binary(),
            &PointSpec::constant(0),
            2,
            ENUMERATION_BUDGET,
            policy(),
        );
        assert_eq!(h.interval, Interval::new(0.0, 0.75));
        let s = hull_estimate(
            &f,
            &SpaceFamily::binary(),
            &PointSpec::constant(0),
            2,
            1,
            policy(),
        );
        assert_eq!(s.method, HullMethod::Separable);
        assert_eq!(s.interval, h.interval);
    }

    #[test]
    fn greedy_fallback_is_flagged() {
        let h = hull_estimate(
            &weighted_pair(),
            &SpaceFamily::binary(),
            &PointSpec::constant(0),
            2,
            1,
            policy(),
        );
        assert_eq!(h.method, HullMethod::Greedy);
        assert_eq!(h.interval, Interval::new(0.0, 1.0));
    }

    #[test]
    fn classify_examples() {
        let spaces = SpaceFamily::binary();
        let v = classify(
            &all_ones_indicator(),
            &spaces,
            &PointSpec::constant(1),
            0.2887880951,
            1,
            policy(),
        );
        assert_eq!(v.verdict, Verdict::Z0Certified);
        let v = classify(
            &weighted_pair(),
            &spaces,
            &PointSpec::constant(0),
            0.5,
            2,
            policy(),
        );
        assert_eq!(v.verdict, Verdict::Z0Certified);
        let m = 3;
        let x = PointSpec::described(SymbolSequence::with_head(
            vec![1; m + 4].into_iter().chain([0]).collect(),
            1,
        ));
        let v = classify(&all_ones_indicator(), &spaces, &x, 0.5, m, policy());
        assert_eq!(v.verdict, Verdict::UndeterminedAtDepth(m));
    }

    #[test]
    fn weighted_pair_mixing() {
        let x = PointSpec::constant(0);
        let y = x.with_prefix(vec![1, 1]);
        let c = construct_weak_zero(
            &weighted_pair(),
            &SpaceFamily::binary(),
            &x,
            &y,
            0.5,
            Some(2),
            policy(),
        )
        .unwrap();
        assert_eq!(c.k, 1);
        assert!((c.alpha - 2.0 / 7.0).abs() < 1e-12);
        assert_eq!(c.alpha_rational.as_deref(), Some("2/7"));
        assert!((c.tau.weight(0) - 2.0 / 7.0).abs() < 1e-12);
        assert!((c.achieved - 0.5).abs() <= MIXING_TOLERANCE);
        assert!(c.covering_holds());
        let e = expect(
            &weighted_pair(),
            &c.as_strategy(),
            &ExpectOptions::default(),
        )
        .unwrap();
        assert!((e.interval.midpoint() - 0.5).abs() <= MIXING_TOLERANCE);
    }

    #[test]
    fn degenerate_constant_mixing() {
        let x = PointSpec::constant(1);
        let c = construct_weak_zero(
            &TailFunction::constant(4.0),
            &SpaceFamily::binary(),
            &x,
            &x,
            4.0,
            None,
            policy(),
        )
        .unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.alpha, 1.0);
        assert_eq!(c.tau.as_dirac(), Some(1));
    }

    #[test]
    fn single_coordinate_mixing() {
        let f = TailFunction::cylinder(Cylinder::from_fn(vec![2], |p| p[0] as f64));
        let x = PointSpec::constant(0);
        let y = x.with_prefix(vec![1]);
        let c =
            construct_weak_zero(&f, &SpaceFamily::binary(), &x, &y, 0.25, None, policy()).unwrap();
        assert_eq!((c.k, c.alpha), (1, 0.75));
        assert_eq!(c.alpha_rational.as_deref(), Some("3/4"));
    }

    #[test]
    fn constructor_errors() {
        let spaces = SpaceFamily::binary();
        let x = PointSpec::constant(0);
        let y = x.with_prefix(vec![1, 1]);
        let err = construct_weak_zero(&weighted_pair(), &spaces, &y, &x, 0.5, None, policy())
            .unwrap_err();
        assert!(matches!(err, TailClassError::NotStraddling { .. }));
        let err = construct_weak_zero(
            &weighted_pair(),
            &spaces,
            &x,
            &PointSpec::constant(1),
            0.5,
            None,
            policy(),
        )
        .unwrap_err();
        assert_eq!(err, TailClassError::NotTailEquivalent);
    }

    #[test]
    fn sampled_weighted_pair() {
        let sigma = Arc::new(ProductMeasure::iid(CoordinateMeasure::uniform(2)));
        let cfg = SampleConfig {
            depth: 2,
            seed: 11,
            retries: 4,
            r: None,
        };
        let s = weak_zero_from_sample(
            &weighted_pair(),
            &SpaceFamily::binary(),
            &sigma,
            cfg,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert_eq!(s.samples_tried, 1);
        assert!((s.certificate.achieved - 0.5).abs() <= MIXING_TOLERANCE);
    }
}
