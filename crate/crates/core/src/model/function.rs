use serde::{Deserialize, Serialize};

use super::measure::lcm;
use super::point::{PointBase, PointSpec, SymbolSequence};
use super::ModelError;
use crate::interval::Interval;

/// Enumerations of cylinder completions above this size fall back to the
/// global table range.
const CYLINDER_ENUMERATION_CAP: usize = 1 << 20;

/// `w_i = scale · ratio^i` for `i ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricWeights {
    pub scale: f64,
    pub ratio: f64,
}

impl GeometricWeights {
    pub fn new(scale: f64, ratio: f64) -> Result<Self, ModelError> {
        if !(scale >= 0.0 && scale.is_finite()) || !(ratio > 0.0 && ratio < 1.0) {
            return Err(ModelError::BadWeights { scale, ratio });
        }
        Ok(GeometricWeights { scale, ratio })
    }

    /// `w_i = 2^{-i}`.
    pub fn halving() -> Self {
        GeometricWeights {
            scale: 1.0,
            ratio: 0.5,
        }
    }

    pub fn weight(&self, i: usize) -> Interval {
        Interval::point(self.ratio)
            .powi_nonneg(i as u64)
            .scale(self.scale)
    }

    /// `Σ_{i>m} w_i` in closed form.
    pub fn tail_sum(&self, m: usize) -> Interval {
        let r = Interval::point(self.ratio);
        (r.powi_nonneg(m as u64 + 1).scale(self.scale)).div_positive(&(Interval::ONE - r))
    }

    /// `Σ_{k≥0} w_{a+k} · g[k mod p]` in closed form.
    pub fn periodic_sum(&self, a: usize, g: &[Interval]) -> Interval {
        let r = Interval::point(self.ratio);
        let p = g.len() as u64;
        let mut inner = Interval::ZERO;
        let mut rj = Interval::ONE;
        for gj in g {
            inner = inner + rj * *gj;
            rj = rj * r;
        }
        let lead = r.powi_nonneg(a as u64).scale(self.scale);
        (lead * inner).div_positive(&(Interval::ONE - r.powi_nonneg(p)))
    }
}

/// Per-coordinate symbol scores: explicit rows for `1..=T`, then a template row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    head: Vec<Vec<f64>>,
    tail: Vec<f64>,
}

impl ScoreTable {
    pub fn new(head: Vec<Vec<f64>>, tail: Vec<f64>) -> Result<Self, ModelError> {
        if tail.is_empty() || head.iter().any(|r| r.is_empty()) {
            return Err(ModelError::EmptyWeights);
        }
        if head
            .iter()
            .chain(std::iter::once(&tail))
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(ModelError::NonFiniteValue);
        }
        Ok(ScoreTable { head, tail })
    }

    pub fn uniform(tail: Vec<f64>) -> Self {
        ScoreTable {
            head: Vec::new(),
            tail,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.head.get(i - 1).unwrap_or(&self.tail)
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn template(&self) -> &[f64] {
        &self.tail
    }

    fn row_range(row: &[f64]) -> Interval {
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    pub fn range(&self, i: usize) -> Interval {
        Self::row_range(self.row(i))
    }

    fn range_over(&self, i: usize, syms: &[usize]) -> Interval {
        let row = self.row(i);
        let vals: Vec<f64> = syms.iter().map(|&s| row[s]).collect();
        Self::row_range(&vals)
    }
}

/// `f(x) = table[x_1, …, x_d]`, row-major with coordinate 1 most significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    radices: Vec<usize>,
    table: Vec<f64>,
}

impl Cylinder {
    pub fn new(radices: Vec<usize>, table: Vec<f64>) -> Result<Self, ModelError> {
        let expected: usize = radices.iter().product();
        if radices.contains(&0) || table.len() != expected {
            return Err(ModelError::TableShape {
                expected,
                found: table.len(),
            });
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteValue);
        }
        Ok(Cylinder { radices, table })
    }

    pub fn from_fn(radices: Vec<usize>, f: impl Fn(&[usize]) -> f64) -> Self {
        let total: usize = radices.iter().product();
        let mut table = Vec::with_capacity(total);
        let mut digits = vec![0usize; radices.len()];
        for _ in 0..total {
            table.push(f(&digits));
            for k in (0..digits.len()).rev() {
                digits[k] += 1;
                if digits[k] < radices[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        Cylinder { radices, table }
    }

    pub fn depth(&self) -> usize {
        self.radices.len()
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn index_of(&self, prefix: &[usize]) -> usize {
        prefix
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&s, &r)| acc * r + s)
    }

    pub fn value(&self, prefix: &[usize]) -> f64 {
        self.table[self.index_of(&prefix[..self.depth()])]
    }

    fn table_range(&self) -> Interval {
        ScoreTable::row_range(&self.table)
    }

    /// Range of the table over all prefixes whose coordinate `k` lies in `allowed[k]`.
    fn range_over(&self, allowed: &[Vec<usize>]) -> Interval {
        let count = allowed
            .iter()
            .try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
        match count {
            Some(0) => return self.table_range(),
            Some(c) if c <= CYLINDER_ENUMERATION_CAP => {}
            _ => return self.table_range(),
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut pos = vec![0usize; allowed.len()];
        loop {
            let idx = pos
                .iter()
                .enumerate()
                .fold(0, |acc, (k, &p)| acc * self.radices[k] + allowed[k][p]);
            let v = self.table[idx];
            lo = lo.min(v);
            hi = hi.max(v);
            let mut k = pos.len();
            loop {
                if k == 0 {
                    return Interval::new(lo, hi);
                }
                k -= 1;
                pos[k] += 1;
                if pos[k] < allowed[k].len() {
                    break;
                }
                pos[k] = 0;
            }
        }
    }
}

/// `f(x) = Σ_i w_i · score_i(x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountedSum {
    pub weights: GeometricWeights,
    pub scores: ScoreTable,
}

/// `f(x) = 1` if `x_i = target_i` for every `i`, else `0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductIndicator {
    pub targets: SymbolSequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionFamily {
    Cylinder(Cylinder),
    DiscountedSum(DiscountedSum),
    ProductIndicator(ProductIndicator),
}

/// A bounded function on the product space with enough structure to bound its
/// oscillation on cylinders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFunction {
    range: Interval,
    family: FunctionFamily,
}

/// How far a lazily sampled point may be realized, and whether an
/// unrealized tail may be assumed on-target at a quantified risk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPolicy {
    pub horizon: usize,
    /// Largest accepted probability that the assumed tail is wrong.
    pub residual_limit: Option<f64>,
}

impl EvalPolicy {
    pub fn strict(horizon: usize) -> Self {
        EvalPolicy {
            horizon,
            residual_limit: None,
        }
    }
}

/// A value interval plus the residual probability of the tail assumption it rests on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: Interval,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Exact(f64),
    Undetermined(Interval),
}

impl Evaluation {
    pub fn interval(&self) -> Interval {
        match *self {
            Evaluation::Exact(v) => Interval::point(v),
            Evaluation::Undetermined(iv) => iv,
        }
    }

    pub fn exact(&self) -> Option<f64> {
        match *self {
            Evaluation::Exact(v) => Some(v),
            Evaluation::Undetermined(_) => None,
        }
    }
}

/// A point known on `1..=prefix.len()`, free on `prefix.len()+1..=free_end`
/// (every coordinate after the prefix when `free_end` is `None`), and equal to
/// `tail` past `free_end`.
pub struct PartialPoint<'a> {
    pub prefix: &'a [usize],
    pub free_end: Option<usize>,
    /// Symbols a free coordinate may take.
    pub support: &'a dyn Fn(usize) -> Vec<usize>,
    pub tail: Option<&'a PointSpec>,
}

impl PartialPoint<'_> {
    fn is_free(&self, i: usize) -> bool {
        i > self.prefix.len() && self.free_end.is_none_or(|e| i <= e)
    }
}

pub(crate) enum TailMatch {
    Agree,
    Disagree,
    Assumed(f64),
    Unknown,
}

impl TailFunction {
    pub fn cylinder(c: Cylinder) -> Self {
        TailFunction {
            range: c.table_range(),
            family: FunctionFamily::Cylinder(c),
        }
    }

    pub fn constant(c: f64) -> Self {
        TailFunction::cylinder(Cylinder {
            radices: Vec::new(),
            table: vec![c],
        })
    }

    pub fn discounted_sum(weights: GeometricWeights, scores: ScoreTable) -> Self {
        let ds = DiscountedSum { weights, scores };
        let range = ds.free_sum_after(0);
        TailFunction {
            range,
            family: FunctionFamily::DiscountedSum(ds),
        }
    }

    pub fn product_indicator(targets: SymbolSequence) -> Self {
        TailFunction {
            range: Interval::UNIT,
            family: FunctionFamily::ProductIndicator(ProductIndicator { targets }),
        }
    }

    pub fn range(&self) -> Interval {
        self.range
    }

    pub fn family(&self) -> &FunctionFamily {
        &self.family
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            FunctionFamily::Cylinder(_) => "cylinder",
            FunctionFamily::DiscountedSum(_) => "discounted_sum",
            FunctionFamily::ProductIndicator(_) => "product_indicator",
        }
    }

    /// Whether a closed-form expectation exists for this family.
    pub fn has_exact_oracle(&self) -> bool {
        !matches!(self.family, FunctionFamily::Cylinder(_))
    }

    /// Pointwise sum of two cylinders over the same coordinate radices.
    pub fn add_cylinders(&self, other: &TailFunction) -> Option<TailFunction> {
        match (&self.family, &other.family) {
            (FunctionFamily::Cylinder(a), FunctionFamily::Cylinder(b))
                if a.radices == b.radices =>
            {
                let table = a.table.iter().zip(&b.table).map(|(x, y)| x + y).collect();
                Some(TailFunction::cylinder(Cylinder {
                    radices: a.radices.clone(),
                    table,
                }))
            }
            _ => None,
        }
    }

    /// Enclosure of `f` over every completion of `pp`.
    pub fn bound_partial(&self, pp: &PartialPoint<'_>, policy: EvalPolicy) -> Bound {
        let exact = |value: Interval| Bound {
            value,
            residual: 0.0,
        };
        match &self.family {
            FunctionFamily::Cylinder(c) => {
                let allowed: Vec<Vec<usize>> = (1..=c.depth())
                    .map(|i| {
                        if i <= pp.prefix.len() {
                            vec![pp.prefix[i - 1]]
                        } else if pp.is_free(i) {
                            (pp.support)(i)
                        } else {
                            let tail = pp.tail.expect("bounded free region needs a tail point");
                            match tail.known_coordinate(i, policy.horizon) {
                                Some(s) => vec![s],
                                None => (0..c.radices[i - 1]).collect(),
                            }
                        }
                    })
                    .collect();
                exact(c.range_over(&allowed))
            }
            FunctionFamily::DiscountedSum(ds) => {
                let mut acc = Interval::ZERO;
                for (k, &s) in pp.prefix.iter().enumerate() {
                    acc = acc + ds.term(k + 1, s);
                }
                let l = pp.prefix.len();
                match pp.free_end {
                    None => exact(acc + ds.free_sum_after(l)),
                    Some(e) => {
                        for i in (l + 1)..=e {
                            let syms = (pp.support)(i);
                            acc = acc + ds.weights.weight(i) * ds.scores.range_over(i, &syms);
                        }
                        let tail = pp.tail.expect("bounded free region needs a tail point");
                        exact(acc + ds.point_sum_from(tail, e.max(l) + 1, policy.horizon))
                    }
                }
            }
            FunctionFamily::ProductIndicator(pi) => {
                let targets = &pi.targets;
                if pp
                    .prefix
                    .iter()
                    .enumerate()
                    .any(|(k, &s)| s != targets.at(k + 1))
                {
                    return exact(Interval::ZERO);
                }
                let l = pp.prefix.len();
                let Some(e) = pp.free_end else {
                    return exact(Interval::UNIT);
                };
                let mut free_sure = true;
                for i in (l + 1)..=e {
                    let syms = (pp.support)(i);
                    let t = targets.at(i);
                    if !syms.contains(&t) {
                        return exact(Interval::ZERO);
                    }
                    if syms.len() > 1 {
                        free_sure = false;
                    }
                }
                let tail = pp.tail.expect("bounded free region needs a tail point");
                let lo_if_agree = if free_sure { 1.0 } else { 0.0 };
                match pi.tail_match(tail, e.max(l) + 1, policy) {
                    TailMatch::Disagree => exact(Interval::ZERO),
                    TailMatch::Agree => exact(Interval::new(lo_if_agree, 1.0)),
                    TailMatch::Assumed(eta) => Bound {
                        value: Interval::new(lo_if_agree, 1.0),
                        residual: eta,
                    },
                    TailMatch::Unknown => exact(Interval::UNIT),
                }
            }
        }
    }

    /// `f(x)` when the known coordinates of `x` determine it, else the tightest
    /// interval they imply. Lazy coordinates past `horizon` count as unknown.
    pub fn eval(&self, x: &PointSpec, horizon: usize) -> Evaluation {
        self.eval_with_policy(x, EvalPolicy::strict(horizon)).0
    }

    pub fn eval_with_policy(&self, x: &PointSpec, policy: EvalPolicy) -> (Evaluation, f64) {
        let no_free = |_: usize| -> Vec<usize> { Vec::new() };
        let pp = PartialPoint {
            prefix: &[],
            free_end: Some(0),
            support: &no_free,
            tail: Some(x),
        };
        let b = self.bound_partial(&pp, policy);
        let eval = if b.value.is_point() {
            Evaluation::Exact(b.value.lo)
        } else {
            Evaluation::Undetermined(b.value)
        };
        (eval, b.residual)
    }
}

impl DiscountedSum {
    pub(crate) fn term(&self, i: usize, sym: usize) -> Interval {
        self.weights.weight(i).scale(self.scores.row(i)[sym])
    }

    /// `Σ_{i>after} w_i · [min score_i, max score_i]`.
    pub(crate) fn free_sum_after(&self, after: usize) -> Interval {
        let mut acc = Interval::ZERO;
        for i in (after + 1)..=self.scores.head_len() {
            acc = acc + self.weights.weight(i) * self.scores.range(i);
        }
        let start = after.max(self.scores.head_len());
        let trange = ScoreTable::row_range(self.scores.template());
        acc + self.weights.tail_sum(start) * trange
    }

    /// `Σ_{i≥a} w_i · score_i(x_i)`, exact for described points and
    /// enclosed past `horizon` for lazy ones.
    pub(crate) fn point_sum_from(&self, x: &PointSpec, a: usize, horizon: usize) -> Interval {
        match x.periodic_from() {
            Some((from, period)) => {
                let b = (from - 1).max(self.scores.head_len()).max(a - 1);
                let mut acc = Interval::ZERO;
                for i in a..=b {
                    acc = acc + self.term(i, x.coordinate(i));
                }
                let template = self.scores.template();
                let g: Vec<Interval> = (0..period)
                    .map(|j| Interval::point(template[x.coordinate(b + 1 + j)]))
                    .collect();
                acc + self.weights.periodic_sum(b + 1, &g)
            }
            None => {
                let known = horizon.max(x.overrides().len());
                let mut acc = Interval::ZERO;
                for i in a..=known {
                    acc = acc + self.term(i, x.coordinate(i));
                }
                acc + self.free_sum_after(known.max(a - 1))
            }
        }
    }
}

impl ProductIndicator {
    /// Whether `x_i = target_i` for every `i ≥ a`.
    pub(crate) fn tail_match(&self, x: &PointSpec, a: usize, policy: EvalPolicy) -> TailMatch {
        let targets = &self.targets;
        match x.periodic_from() {
            Some((from, period)) => {
                let b = (from - 1).max(targets.head_len()).max(a - 1);
                let span = lcm(period, targets.period());
                let agree = (a..=b + span).all(|i| x.coordinate(i) == targets.at(i));
                if agree {
                    TailMatch::Agree
                } else {
                    TailMatch::Disagree
                }
            }
            None => {
                let known = policy.horizon.max(x.overrides().len());
                if (a..=known).any(|i| x.coordinate(i) != targets.at(i)) {
                    return TailMatch::Disagree;
                }
                let (Some(limit), PointBase::Lazy(lazy)) = (policy.residual_limit, x.base()) else {
                    return TailMatch::Unknown;
                };
                // Extend the realization until the unrealized disagreement mass is below the limit.
                let start = known.max(a - 1);
                let mut h = start;
                loop {
                    match lazy.measure().mismatch_mass_beyond(targets, h) {
                        None => return TailMatch::Unknown,
                        Some(eta) if eta <= limit => {
                            if ((start + 1)..=h).any(|i| x.coordinate(i) != targets.at(i)) {
                                return TailMatch::Disagree;
                            }
                            return TailMatch::Assumed(eta);
                        }
                        Some(_) if h >= start + MAX_HORIZON_EXTENSION => return TailMatch::Unknown,
                        Some(_) => h += 1,
                    }
                }
            }
        }
    }
}

/// Coordinates a lazy point may be realized past its horizon to reach the residual limit.
const MAX_HORIZON_EXTENSION: usize = 4096;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoordinateMeasure, ProductMeasure};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn unit_discounted() -> TailFunction {
        TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        )
    }

    #[test]
    fn indicator_on_described_all_ones() {
        let f = TailFunction::product_indicator(SymbolSequence::constant(1));
        assert_eq!(f.eval(&PointSpec::constant(1), 1), Evaluation::Exact(1.0));
    }

    #[test]
    fn indicator_single_mismatch_forces_zero() {
        let f = TailFunction::product_indicator(SymbolSequence::constant(1));
        let x = PointSpec::described(SymbolSequence::with_head(vec![1, 1, 0], 1));
        assert_eq!(f.eval(&x, 3), Evaluation::Exact(0.0));
    }

    #[test]
    fn discounted_sum_described_and_lazy() {
        let f = unit_discounted();
        assert_eq!(f.eval(&PointSpec::constant(1), 4), Evaluation::Exact(1.0));
        let sigma = Arc::new(ProductMeasure::iid(
            CoordinateMeasure::bernoulli(1.0).unwrap(),
        ));
        let x = PointSpec::lazy(7, sigma);
        match f.eval(&x, 4) {
            Evaluation::Undetermined(iv) => {
                // partial = 1/2 + 1/4 + 1/8 + 1/16
                assert_eq!(iv.lo, 0.9375);
                assert_eq!(iv.hi, 0.9375 + 2f64.powi(-4));
            }
            other => panic!("expected an interval, got {other:?}"),
        }
    }

    #[test]
    fn discounted_range_is_closed_form() {
        let f = unit_discounted();
        assert_eq!(f.range(), Interval::new(0.0, 1.0));
    }

    #[test]
    fn periodic_point_sum() {
        // x = (1, 0, 1, 0, ...) gives Σ_{odd i} 2^{-i} = 2/3.
        let seq =
            SymbolSequence::new(vec![], crate::model::SymbolTail::Periodic(vec![1, 0])).unwrap();
        let v = unit_discounted()
            .eval(&PointSpec::described(seq), 1)
            .interval();
        assert!(v.contains(2.0 / 3.0) && v.width() < 1e-15);
    }

    #[test]
    fn lazy_indicator_with_residual_limit() {
        let sigma = Arc::new(ProductMeasure::geometric_bernoulli());
        let f = TailFunction::product_indicator(SymbolSequence::constant(1));
        let x = PointSpec::lazy(3, sigma).with_prefix(vec![1; 70]);
        let (e, eta) = f.eval_with_policy(
            &x,
            EvalPolicy {
                horizon: 60,
                residual_limit: Some(1e-6),
            },
        );
        assert_eq!(e, Evaluation::Exact(1.0));
        assert!(eta > 0.0 && eta <= 2f64.powi(-70) * 1.000001);
        assert!(matches!(f.eval(&x, 60), Evaluation::Undetermined(_)));
    }

    #[test]
    fn cylinder_sum_by_table_addition() {
        let a = TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| p[0] as f64));
        let b = TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| 2.0 * p[1] as f64));
        let s = a.add_cylinders(&b).unwrap();
        let x = PointSpec::described(SymbolSequence::with_head(vec![1, 1], 0));
        assert_eq!(s.eval(&x, 2), Evaluation::Exact(3.0));
    }

    proptest! {
        #[test]
        fn cylinder_ignores_coordinates_past_depth(
            table in proptest::collection::vec(-5.0f64..5.0, 8),
            head in proptest::collection::vec(0usize..2, 3),
            junk in proptest::collection::vec(0usize..2, 1..6),
            tail_sym in 0usize..2,
        ) {
            let f = TailFunction::cylinder(Cylinder::new(vec![2, 2, 2], table).unwrap());
            let x = PointSpec::described(SymbolSequence::with_head(head.clone(), 0));
            let mut changed = head.clone();
            changed.extend(junk);
            let y = PointSpec::described(SymbolSequence::with_head(changed, tail_sym));
            prop_assert_eq!(f.eval(&x, 3), f.eval(&y, 3));
        }

        #[test]
        fn indicator_monotone_under_mismatch(
            head in proptest::collection::vec(0usize..2, 1..8),
            k in 0usize..8,
        ) {
            let f = TailFunction::product_indicator(SymbolSequence::constant(1));
            let x = PointSpec::described(SymbolSequence::with_head(head.clone(), 1));
            let k = k % head.len();
            let y = x.modified(k + 1, 0);
            let fx = f.eval(&x, 8).exact().unwrap();
            let fy = f.eval(&y, 8).exact().unwrap();
            prop_assert!(fy <= fx);
        }
    }
}
