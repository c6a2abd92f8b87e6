//! Certified `E_μ[f]` for product and hybrid measures.
//!
//! The generic path expands the prefix tree over the random coordinates best
//! first, ordering leaves by `cylinder mass × oscillation bound` and breaking
//! ties by the lexicographically smallest prefix. Each leaf contributes
//! `mass × [inf f, sup f]` on its cylinder, so the running total is always an
//! enclosure. Closed-form oracles for product indicators and discounted sums
//! take precedence when the measure's tail rule admits one.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

use crate::interval::Interval;
use crate::model::{
    Assignment, DiscountedSum, EvalPolicy, FormulaFamily, FunctionFamily, HybridMeasure,
    MeasureRef, MeasureTail, PartialPoint, PointSpec, ProductIndicator, ProductMeasure,
    SymbolSequence, SymbolTail, TailFunction, TailMatch,
};

/// Product-indicator oracles keep multiplying explicit factors until the
/// remaining geometric mass drops below this.
const PRODUCT_REMAINDER: f64 = 1e-18;
const MAX_EXPLICIT_FACTORS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    Refinement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationResult {
    pub interval: Interval,
    pub nodes_expanded: usize,
    pub status: Status,
    pub method: Method,
    /// Probability that a lazily sampled Dirac tail violates the on-target
    /// assumption the interval relies on. Zero when nothing was assumed.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectOptions {
    pub tol: f64,
    pub node_budget: usize,
    pub use_oracles: bool,
    pub policy: EvalPolicy,
}

impl Default for ExpectOptions {
    fn default() -> Self {
        ExpectOptions {
            tol: 1e-9,
            node_budget: 200_000,
            use_oracles: true,
            policy: EvalPolicy {
                horizon: 60,
                residual_limit: Some(1e-6),
            },
        }
    }
}

impl ExpectOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_budget(mut self, node_budget: usize) -> Self {
        self.node_budget = node_budget;
        self
    }

    pub fn generic_only(mut self) -> Self {
        self.use_oracles = false;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpectError {
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no closed form registered for this tail rule: {0}")]
    UnsupportedTail(String),
}

/// Sound upper bound on `sup f − inf f` over the cylinder of `prefix`.
pub fn osc_bound(f: &TailFunction, prefix: &[usize]) -> f64 {
    let all = |i: usize| -> Vec<usize> { all_symbols(f, i) };
    let pp = PartialPoint {
        prefix,
        free_end: None,
        support: &all,
        tail: None,
    };
    f.bound_partial(&pp, EvalPolicy::strict(0))
        .value
        .width()
        .min(f.range().width())
}

fn all_symbols(f: &TailFunction, i: usize) -> Vec<usize> {
    let arity = match f.family() {
        FunctionFamily::Cylinder(c) => c.radices().get(i - 1).copied().unwrap_or(1),
        FunctionFamily::DiscountedSum(ds) => ds.scores.row(i).len(),
        // Any non-target symbol is as good as any other.
        FunctionFamily::ProductIndicator(pi) => pi.targets.at(i) + 2,
    };
    (0..arity).collect()
}

/// Certified enclosure of `E_μ[f]`.
pub fn expect<'a>(
    f: &TailFunction,
    mu: impl Into<MeasureRef<'a>>,
    opts: &ExpectOptions,
) -> Result<ExpectationResult, ExpectError> {
    if !(opts.tol > 0.0) {
        return Err(ExpectError::InvalidTolerance(opts.tol));
    }
    let mu = mu.into();
    if opts.use_oracles {
        let oracle = match f.family() {
            FunctionFamily::ProductIndicator(pi) => {
                Some(exact_expectation_product_indicator(pi, mu, opts.policy))
            }
            FunctionFamily::DiscountedSum(ds) => {
                Some(exact_expectation_discounted_sum(ds, mu, opts.policy))
            }
            FunctionFamily::Cylinder(_) => None,
        };
        if let Some(Ok((interval, residual))) = oracle {
            let status = if interval.width() <= 2.0 * opts.tol {
                Status::Certified
            } else {
                Status::BudgetExhausted
            };
            return Ok(ExpectationResult {
                interval,
                nodes_expanded: 0,
                status,
                method: Method::Oracle,
                residual,
            });
        }
    }
    if let MeasureRef::Product(sigma) = mu {
        if let Some(h) = eventually_dirac(sigma) {
            return Ok(refine(f, MeasureRef::Hybrid(&h), opts));
        }
    }
    Ok(refine(f, mu, opts))
}

/// A product measure whose tail rule is Dirac, rewritten so that refinement
/// stops branching after the explicit head.
fn eventually_dirac(sigma: &ProductMeasure) -> Option<HybridMeasure> {
    let tail = match sigma.tail() {
        MeasureTail::Constant(m) => SymbolTail::Constant(m.as_dirac()?),
        MeasureTail::Periodic(list) => SymbolTail::Periodic(
            list.iter()
                .map(|m| m.as_dirac())
                .collect::<Option<Vec<_>>>()?,
        ),
        MeasureTail::Formula(_) => return None,
    };
    let t = sigma.head_len();
    // Head symbols are placeholders; the head assignments override them.
    let seq = SymbolSequence::new(vec![0; t], tail).ok()?;
    let head = sigma
        .head()
        .iter()
        .cloned()
        .map(Assignment::Measure)
        .collect();
    Some(HybridMeasure::new(head, PointSpec::described(seq)))
}

#[derive(Debug, Clone)]
struct Leaf {
    prefix: Vec<usize>,
    mass: Interval,
    value: Interval,
    residual: f64,
}

impl Leaf {
    fn priority(&self) -> f64 {
        self.mass.hi * self.value.width()
    }
}

struct Ranked(Leaf);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: larger priority first, then the smaller prefix.
        self.0
            .priority()
            .total_cmp(&other.0.priority())
            .then_with(|| other.0.prefix.cmp(&self.0.prefix))
    }
}

fn refine(f: &TailFunction, mu: MeasureRef<'_>, opts: &ExpectOptions) -> ExpectationResult {
    let random_len = mu.random_len();
    let tail = mu.dirac_tail().map(|(_, p)| p);
    let support = |i: usize| mu.support(i);
    let bound = |prefix: &[usize]| {
        let pp = PartialPoint {
            prefix,
            free_end: random_len,
            support: &support,
            tail,
        };
        f.bound_partial(&pp, opts.policy)
    };

    let root_bound = bound(&[]);
    let root = Leaf {
        prefix: Vec::new(),
        mass: Interval::ONE,
        value: root_bound.value.intersect(&f.range()),
        residual: root_bound.residual,
    };
    let mut open = BinaryHeap::new();
    let mut closed: Vec<Leaf> = Vec::new();
    let mut width_estimate = root.priority();
    let mut nodes_expanded = 0;
    push(root, random_len, &mut open, &mut closed);

    loop {
        if width_estimate <= 2.0 * opts.tol || open.is_empty() || nodes_expanded >= opts.node_budget
        {
            let (interval, residual) = total(&open, &closed);
            let certified = interval.width() <= 2.0 * opts.tol;
            let stuck = open.is_empty() || nodes_expanded >= opts.node_budget;
            if certified || stuck {
                return ExpectationResult {
                    interval,
                    nodes_expanded,
                    status: if certified {
                        Status::Certified
                    } else {
                        Status::BudgetExhausted
                    },
                    method: Method::Refinement,
                    residual,
                };
            }
            // Rounding drift in the estimate; resynchronize and keep going.
            width_estimate = interval.width();
        }
        let Ranked(parent) = open.pop().expect("open set checked nonempty");
        width_estimate -= parent.priority();
        nodes_expanded += 1;
        let i = parent.prefix.len() + 1;
        for s in mu.support(i) {
            let mut prefix = parent.prefix.clone();
            prefix.push(s);
            let b = bound(&prefix);
            let child = Leaf {
                mass: parent.mass * mu.weight_interval(i, s),
                value: b.value.intersect(&parent.value),
                residual: b.residual,
                prefix,
            };
            width_estimate += child.priority();
            push(child, random_len, &mut open, &mut closed);
        }
        width_estimate = width_estimate.max(0.0);
    }
}

fn push(
    leaf: Leaf,
    random_len: Option<usize>,
    open: &mut BinaryHeap<Ranked>,
    closed: &mut Vec<Leaf>,
) {
    let at_bottom = random_len.is_some_and(|n| leaf.prefix.len() >= n);
    if leaf.value.width() == 0.0 || leaf.mass.hi == 0.0 || at_bottom {
        closed.push(leaf);
    } else {
        open.push(Ranked(leaf));
    }
}

/// Sum over the fixed partition in prefix order, so the result does not depend
/// on the expansion history.
fn total(open: &BinaryHeap<Ranked>, closed: &[Leaf]) -> (Interval, f64) {
    let mut leaves: Vec<&Leaf> = open.iter().map(|r| &r.0).chain(closed.iter()).collect();
    leaves.sort_by(|a, b| a.prefix.cmp(&b.prefix));
    let interval = leaves.iter().map(|l| l.mass * l.value).sum();
    let residual = leaves.iter().map(|l| l.residual).fold(0.0, f64::max);
    (interval, residual)
}

/// `∏_i μ_i(target_i)`, with Dirac coordinates contributing exactly 0 or 1.
pub fn exact_expectation_product_indicator(
    f: &ProductIndicator,
    mu: MeasureRef<'_>,
    policy: EvalPolicy,
) -> Result<(Interval, f64), ExpectError> {
    let targets = &f.targets;
    match mu {
        MeasureRef::Product(sigma) => {
            let b = sigma.head_len().max(targets.head_len());
            let mut acc = Interval::ONE;
            for i in 1..=b {
                acc = acc * sigma.weight_interval(i, targets.at(i));
            }
            if acc.hi == 0.0 {
                return Ok((Interval::ZERO, 0.0));
            }
            Ok((acc * product_tail(sigma, f, b)?, 0.0))
        }
        MeasureRef::Hybrid(h) => {
            let mut acc = Interval::ONE;
            for (k, a) in h.head().iter().enumerate() {
                acc = acc * Interval::point(a.weight(targets.at(k + 1)));
            }
            if acc.hi == 0.0 {
                return Ok((Interval::ZERO, 0.0));
            }
            match f.tail_match(h.point(), h.switch_index(), policy) {
                TailMatch::Agree => Ok((acc, 0.0)),
                TailMatch::Disagree => Ok((Interval::ZERO, 0.0)),
                TailMatch::Assumed(eta) => Ok((acc, eta)),
                TailMatch::Unknown => Ok((Interval::new(0.0, acc.hi), 0.0)),
            }
        }
    }
}

/// `∏_{i>b} σ_i(target_i)` for a tail that is periodic in both the measure and the targets.
fn product_tail(
    sigma: &ProductMeasure,
    f: &ProductIndicator,
    b: usize,
) -> Result<Interval, ExpectError> {
    let targets = &f.targets;
    match sigma.tail() {
        MeasureTail::Constant(_) | MeasureTail::Periodic(_) => {
            let mlen = match sigma.tail() {
                MeasureTail::Periodic(list) => list.len(),
                _ => 1,
            };
            let span = crate::model::lcm(mlen, targets.period());
            let all_one =
                ((b + 1)..=(b + span)).all(|i| sigma.coordinate(i).weight(targets.at(i)) == 1.0);
            // Infinitely many repetitions of a factor below one drive the product to zero.
            Ok(if all_one {
                Interval::ONE
            } else {
                Interval::ZERO
            })
        }
        MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio }) => {
            if ((b + 1)..=(b + targets.period())).any(|i| targets.at(i) != 1) {
                // Infinitely many factors ratio^i on symbol 0.
                return Ok(Interval::ZERO);
            }
            let r = Interval::point(*ratio);
            let one_minus_r = Interval::ONE - r;
            let mut acc = Interval::ONE;
            let mut i = b + 1;
            loop {
                let remainder = r.powi_nonneg(i as u64).div_positive(&one_minus_r).hi;
                if remainder <= PRODUCT_REMAINDER {
                    // ∏_{j≥i}(1 − r^j) ∈ [1 − Σ_{j≥i} r^j, 1]
                    let rest = Interval::new(1.0 - remainder, 1.0);
                    return Ok(acc * rest);
                }
                if i - b > MAX_EXPLICIT_FACTORS {
                    return Err(ExpectError::UnsupportedTail(format!(
                        "geometric_bernoulli ratio {ratio} converges too slowly"
                    )));
                }
                acc = acc * (Interval::ONE - r.powi_nonneg(i as u64));
                i += 1;
            }
        }
    }
}

fn mean_score(ds: &DiscountedSum, i: usize, weight: impl Fn(usize) -> Interval) -> Interval {
    ds.scores
        .row(i)
        .iter()
        .enumerate()
        .map(|(s, &v)| weight(s).scale(v))
        .sum()
}

/// `Σ_i w_i · E_{μ_i}[score_i]` in closed form.
pub fn exact_expectation_discounted_sum(
    ds: &DiscountedSum,
    mu: MeasureRef<'_>,
    policy: EvalPolicy,
) -> Result<(Interval, f64), ExpectError> {
    match mu {
        MeasureRef::Product(sigma) => {
            let b = sigma.head_len().max(ds.scores.head_len());
            let mut acc = Interval::ZERO;
            for i in 1..=b {
                acc =
                    acc + ds.weights.weight(i) * mean_score(ds, i, |s| sigma.weight_interval(i, s));
            }
            let template = ds.scores.template();
            let tail = match sigma.tail() {
                MeasureTail::Constant(_) | MeasureTail::Periodic(_) => {
                    let mlen = match sigma.tail() {
                        MeasureTail::Periodic(list) => list.len(),
                        _ => 1,
                    };
                    let g: Vec<Interval> = (0..mlen)
                        .map(|j| {
                            let m = sigma.coordinate(b + 1 + j);
                            template
                                .iter()
                                .enumerate()
                                .map(|(s, &v)| Interval::point(m.weight(s)).scale(v))
                                .sum()
                        })
                        .collect();
                    ds.weights.periodic_sum(b + 1, &g)
                }
                MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio }) => {
                    if template.len() != 2 {
                        return Err(ExpectError::UnsupportedTail(
                            "geometric_bernoulli needs binary scores".into(),
                        ));
                    }
                    // E[score(x_i)] = s1 + (s0 − s1)·q^i, so the tail splits into two geometric series.
                    let (s0, s1) = (template[0], template[1]);
                    let r = Interval::point(ds.weights.ratio);
                    let rq = r * Interval::point(*ratio);
                    let a = (b + 1) as u64;
                    let first = ds.weights.tail_sum(b).scale(s1);
                    let second = rq
                        .powi_nonneg(a)
                        .scale(ds.weights.scale)
                        .div_positive(&(Interval::ONE - rq))
                        .scale(s0 - s1);
                    first + second
                }
            };
            Ok((acc + tail, 0.0))
        }
        MeasureRef::Hybrid(h) => {
            let mut acc = Interval::ZERO;
            for (k, a) in h.head().iter().enumerate() {
                let i = k + 1;
                let mean = match a {
                    Assignment::Dirac(s) => Interval::point(ds.scores.row(i)[*s]),
                    Assignment::Measure(m) => mean_score(ds, i, |s| Interval::point(m.weight(s))),
                };
                acc = acc + ds.weights.weight(i) * mean;
            }
            let tail = ds.point_sum_from(h.point(), h.switch_index(), policy.horizon);
            Ok((acc + tail, 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CoordinateMeasure, Cylinder, GeometricWeights, HybridMeasure, PointSpec, ScoreTable,
        SymbolSequence,
    };

    fn indicator() -> TailFunction {
        TailFunction::product_indicator(SymbolSequence::constant(1))
    }

    #[test]
    fn generic_path_stops_branching_at_dirac_tail() {
        let sigma = ProductMeasure::new(
            vec![CoordinateMeasure::uniform(2), CoordinateMeasure::uniform(2)],
            MeasureTail::Constant(CoordinateMeasure::dirac(2, 1)),
        )
        .unwrap();
        let r = expect(
            &indicator(),
            &sigma,
            &ExpectOptions::default().generic_only(),
        )
        .unwrap();
        assert_eq!(r.status, Status::Certified);
        assert_eq!(r.interval, Interval::point(0.25));
        assert!(r.nodes_expanded <= 3);
    }

    #[test]
    fn osc_bound_examples() {
        let f = indicator();
        assert_eq!(osc_bound(&f, &[1, 1, 1]), 1.0);
        assert_eq!(osc_bound(&f, &[1, 0]), 0.0);
        let ds = TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        );
        assert_eq!(osc_bound(&ds, &[1, 0, 1]), 0.125);
        let c =
            TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| p[0] as f64 + p[1] as f64));
        assert_eq!(osc_bound(&c, &[0]), 1.0);
        assert_eq!(osc_bound(&c, &[0, 1]), 0.0);
    }

    #[test]
    fn one_coordinate_integral_is_exact() {
        let f = TailFunction::cylinder(Cylinder::from_fn(vec![2], |p| p[0] as f64));
        let sigma = ProductMeasure::iid(CoordinateMeasure::bernoulli(0.3).unwrap());
        let r = expect(&f, &sigma, &ExpectOptions::default()).unwrap();
        assert_eq!(r.interval, Interval::point(0.3));
        assert_eq!(r.status, Status::Certified);
    }

    #[test]
    fn geometric_product_oracle() {
        let sigma = ProductMeasure::geometric_bernoulli();
        let r = expect(&indicator(), &sigma, &ExpectOptions::default()).unwrap();
        assert_eq!(r.method, Method::Oracle);
        assert!(r.interval.width() <= 1e-12);
        assert!(r.interval.lo >= 0.2887880950 && r.interval.hi <= 0.2887880952);
    }

    #[test]
    fn oracle_zero_and_one_cases() {
        let f = indicator();
        let dirac_ones = HybridMeasure::dirac(PointSpec::constant(1));
        let r = expect(&f, &dirac_ones, &ExpectOptions::default()).unwrap();
        assert_eq!(r.interval, Interval::ONE);
        let with_zero = HybridMeasure::new(
            vec![
                Assignment::Measure(CoordinateMeasure::uniform(2)),
                Assignment::Dirac(0),
            ],
            PointSpec::constant(1),
        );
        let r = expect(&f, &with_zero, &ExpectOptions::default()).unwrap();
        assert_eq!(r.interval, Interval::ZERO);
    }

    #[test]
    fn hybrid_head_product_is_exact() {
        let sigma = ProductMeasure::geometric_bernoulli();
        let h = HybridMeasure::switch_at(&sigma, &PointSpec::constant(1), 6);
        let r = expect(&indicator(), &h, &ExpectOptions::default()).unwrap();
        assert_eq!(r.interval, Interval::point(0.298004150390625));
        let generic = expect(&indicator(), &h, &ExpectOptions::default().generic_only()).unwrap();
        assert_eq!(generic.interval, Interval::point(0.298004150390625));
    }

    #[test]
    fn discounted_sum_uniform_mean() {
        let f = TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        );
        let sigma = ProductMeasure::iid(CoordinateMeasure::uniform(2));
        let r = expect(&f, &sigma, &ExpectOptions::default()).unwrap();
        assert!(r.interval.contains(0.5) && r.interval.width() <= 2e-9);
    }

    #[test]
    fn generic_discounted_sum_runs_out_of_budget_soundly() {
        let f = TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        );
        let sigma = ProductMeasure::iid(CoordinateMeasure::uniform(2));
        let r = expect(
            &f,
            &sigma,
            &ExpectOptions::default().generic_only().with_budget(500),
        )
        .unwrap();
        assert_eq!(r.status, Status::BudgetExhausted);
        assert!(r.interval.contains(0.5));
        assert_eq!(r.nodes_expanded, 500);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let sigma = ProductMeasure::geometric_bernoulli();
        let opts = ExpectOptions::default().with_tol(0.0);
        assert!(matches!(
            expect(&indicator(), &sigma, &opts),
            Err(ExpectError::InvalidTolerance(_))
        ));
    }

    #[test]
    fn monotone_pruning_in_tolerance() {
        let f = TailFunction::cylinder(Cylinder::from_fn(vec![3, 2, 2, 3], |p| {
            (p[0] as f64) * 0.37 - (p[1] * p[2]) as f64 + 0.11 * p[3] as f64
        }));
        let sigma = ProductMeasure::iid(CoordinateMeasure::new(vec![0.2, 0.5, 0.3]).unwrap());
        let sigma = ProductMeasure::new(
            vec![
                CoordinateMeasure::new(vec![0.2, 0.5, 0.3]).unwrap(),
                CoordinateMeasure::bernoulli(0.1).unwrap(),
                CoordinateMeasure::bernoulli(0.6).unwrap(),
            ],
            sigma.tail().clone(),
        )
        .unwrap();
        let mut last = usize::MAX;
        for tol in [1e-9, 1e-3, 1e-2, 0.05, 0.1, 0.3, 1.0] {
            let r = expect(&f, &sigma, &ExpectOptions::default().with_tol(tol)).unwrap();
            assert!(r.nodes_expanded <= last);
            last = r.nodes_expanded;
        }
    }
}
