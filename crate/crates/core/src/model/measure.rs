use serde::{Deserialize, Serialize};

use super::point::SymbolSequence;
use super::space::SpaceFamily;
use super::ModelError;
use crate::interval::{add_up, div_up, Interval};

/// Probability vectors must sum to one within this tolerance; nothing is renormalized.
pub const WEIGHT_TOLERANCE: f64 = 1e-12;

/// A probability vector over the symbols of one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMeasure {
    weights: Vec<f64>,
}

impl CoordinateMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::EmptyWeights);
        }
        if let Some((sym, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(ModelError::NegativeWeight {
                symbol: sym,
                weight: w,
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(ModelError::WeightSum { sum: total });
        }
        Ok(CoordinateMeasure { weights })
    }

    pub fn dirac(arity: usize, sym: usize) -> Self {
        assert!(sym < arity);
        let mut weights = vec![0.0; arity];
        weights[sym] = 1.0;
        CoordinateMeasure { weights }
    }

    pub fn uniform(arity: usize) -> Self {
        CoordinateMeasure {
            weights: vec![1.0 / arity as f64; arity],
        }
    }

    /// Two-point measure with mass `p` on symbol 1.
    pub fn bernoulli(p: f64) -> Result<Self, ModelError> {
        CoordinateMeasure::new(vec![1.0 - p, p])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, sym: usize) -> f64 {
        self.weights.get(sym).copied().unwrap_or(0.0)
    }

    pub fn arity(&self) -> usize {
        self.weights.len()
    }

    /// Symbols carrying positive mass, in symbol order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&s| self.weights[s] > 0.0)
            .collect()
    }

    pub fn as_dirac(&self) -> Option<usize> {
        let support = self.support();
        match support.as_slice() {
            [s] if self.weights[*s] == 1.0 => Some(*s),
            _ => None,
        }
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`; zero-mass symbols are never returned.
    pub fn draw(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (s, &w) in self.weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            last = s;
            if u < acc {
                return s;
            }
        }
        last
    }
}

/// Closed-form families of coordinate measures, indexed by absolute coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FormulaFamily {
    /// Binary coordinates with `σ_i({1}) = 1 − ratio^i`.
    GeometricBernoulli { ratio: f64 },
}

impl FormulaFamily {
    pub fn id(&self) -> &'static str {
        match self {
            FormulaFamily::GeometricBernoulli { .. } => "geometric_bernoulli",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            FormulaFamily::GeometricBernoulli { .. } => 2,
        }
    }

    pub fn coordinate(&self, i: usize) -> CoordinateMeasure {
        match *self {
            FormulaFamily::GeometricBernoulli { ratio } => {
                let q = ratio.powi(i.min(i32::MAX as usize) as i32);
                CoordinateMeasure {
                    weights: vec![q, 1.0 - q],
                }
            }
        }
    }

    /// Enclosure of `σ_i(sym)`.
    pub fn weight_interval(&self, i: usize, sym: usize) -> Interval {
        match *self {
            FormulaFamily::GeometricBernoulli { ratio } => {
                let q = Interval::point(ratio).powi_nonneg(i as u64);
                if sym == 0 {
                    q
                } else {
                    Interval::ONE - q
                }
            }
        }
    }
}

/// Finite description of the measures at coordinates past the explicit head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MeasureTail {
    Constant(CoordinateMeasure),
    /// Coordinate `T + 1 + k` uses entry `k mod len`.
    Periodic(Vec<CoordinateMeasure>),
    Formula(FormulaFamily),
}

/// `σ = ⊗_i σ_i`: explicit measures for `1..=T` and a tail rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    head: Vec<CoordinateMeasure>,
    tail: MeasureTail,
}

impl ProductMeasure {
    pub fn new(head: Vec<CoordinateMeasure>, tail: MeasureTail) -> Result<Self, ModelError> {
        match &tail {
            MeasureTail::Periodic(list) if list.is_empty() => return Err(ModelError::EmptyPeriod),
            MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio })
                if !(*ratio > 0.0 && *ratio < 1.0) =>
            {
                return Err(ModelError::FormulaParameter {
                    family: "geometric_bernoulli",
                    detail: format!("ratio must lie in (0, 1), got {ratio}"),
                })
            }
            _ => {}
        }
        Ok(ProductMeasure { head, tail })
    }

    /// Every coordinate has the same measure.
    pub fn iid(measure: CoordinateMeasure) -> Self {
        ProductMeasure {
            head: Vec::new(),
            tail: MeasureTail::Constant(measure),
        }
    }

    /// `σ_i({1}) = 1 − 2^{-i}` on binary coordinates.
    pub fn geometric_bernoulli() -> Self {
        ProductMeasure {
            head: Vec::new(),
            tail: MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio: 0.5 }),
        }
    }

    pub fn head(&self) -> &[CoordinateMeasure] {
        &self.head
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn tail(&self) -> &MeasureTail {
        &self.tail
    }

    /// `σ_i`, resolved from the head or instantiated from the tail rule.
    pub fn coordinate(&self, i: usize) -> CoordinateMeasure {
        assert!(i >= 1, "coordinates are 1-based");
        if let Some(m) = self.head.get(i - 1) {
            return m.clone();
        }
        let offset = i - self.head.len() - 1;
        match &self.tail {
            MeasureTail::Constant(m) => m.clone(),
            MeasureTail::Periodic(list) => list[offset % list.len()].clone(),
            MeasureTail::Formula(family) => family.coordinate(i),
        }
    }

    /// Enclosure of `σ_i(sym)`; exact for stored weights.
    pub fn weight_interval(&self, i: usize, sym: usize) -> Interval {
        if i > self.head.len() {
            if let MeasureTail::Formula(family) = &self.tail {
                return family.weight_interval(i, sym);
            }
        }
        Interval::point(self.coordinate(i).weight(sym))
    }

    pub fn arity(&self, i: usize) -> usize {
        if i <= self.head.len() {
            return self.head[i - 1].arity();
        }
        match &self.tail {
            MeasureTail::Constant(m) => m.arity(),
            MeasureTail::Periodic(list) => list[(i - self.head.len() - 1) % list.len()].arity(),
            MeasureTail::Formula(f) => f.arity(),
        }
    }

    /// Check the support of every coordinate against its space.
    pub fn validate_against(&self, spaces: &SpaceFamily) -> Result<(), ModelError> {
        for (k, m) in self.head.iter().enumerate() {
            let i = k + 1;
            if m.arity() != spaces.arity(i) {
                return Err(ModelError::ArityMismatch {
                    coordinate: i,
                    expected: spaces.arity(i),
                    found: m.arity(),
                });
            }
        }
        // Tail rules are checked against the first period; periodic spaces beyond
        // the space head share the template arity.
        let first_tail = self.head.len() + 1;
        let span = match &self.tail {
            MeasureTail::Periodic(list) => list.len(),
            _ => 1,
        };
        let check_to = first_tail.max(spaces.head_len() + 1) + span;
        for i in first_tail..check_to {
            let found = self.arity(i);
            if found != spaces.arity(i) {
                return Err(ModelError::ArityMismatch {
                    coordinate: i,
                    expected: spaces.arity(i),
                    found,
                });
            }
        }
        Ok(())
    }

    /// Upper bound on `Σ_{i>h} (1 − σ_i(target_i))`, the probability that a
    /// sample disagrees with `targets` somewhere past `h`. `None` when the sum diverges.
    pub fn mismatch_mass_beyond(&self, targets: &SymbolSequence, h: usize) -> Option<f64> {
        let t = self.head.len();
        let explicit_to = t.max(targets.head_len());
        let mut total = 0.0f64;
        for i in (h + 1)..=explicit_to {
            let miss = Interval::ONE - self.weight_interval(i, targets.at(i));
            total = add_up(total, miss.hi.max(0.0));
        }
        let from = (h + 1).max(explicit_to + 1);
        match &self.tail {
            MeasureTail::Constant(_) | MeasureTail::Periodic(_) => {
                let mlen = match &self.tail {
                    MeasureTail::Periodic(list) => list.len(),
                    _ => 1,
                };
                let period = lcm(mlen, targets.period());
                let all_on_target =
                    (from..from + period).all(|i| self.coordinate(i).weight(targets.at(i)) == 1.0);
                if all_on_target {
                    Some(total)
                } else {
                    None
                }
            }
            MeasureTail::Formula(FormulaFamily::GeometricBernoulli { ratio }) => {
                if (from..from + targets.period()).any(|i| targets.at(i) != 1) {
                    return None;
                }
                // Σ_{i≥from} ratio^i = ratio^from / (1 − ratio)
                let num = Interval::point(*ratio).powi_nonneg(from as u64);
                let den = Interval::ONE - Interval::point(*ratio);
                Some(add_up(total, div_up(num.hi, den.lo)))
            }
        }
    }
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}
