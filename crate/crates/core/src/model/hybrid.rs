use super::measure::{CoordinateMeasure, ProductMeasure};
use super::point::PointSpec;
use crate::interval::Interval;

/// How one head coordinate of a hybrid measure is distributed.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    Measure(CoordinateMeasure),
    Dirac(usize),
}

impl Assignment {
    pub fn support(&self) -> Vec<usize> {
        match self {
            Assignment::Measure(m) => m.support(),
            Assignment::Dirac(s) => vec![*s],
        }
    }

    pub fn weight(&self, sym: usize) -> f64 {
        match self {
            Assignment::Measure(m) => m.weight(sym),
            Assignment::Dirac(s) => {
                if *s == sym {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `τ_1 ⊗ ⋯ ⊗ τ_{n-1} ⊗ x_n ⊗ x_{n+1} ⊗ ⋯`: explicit assignments on the head,
/// Dirac on the coordinates of `point` from the switch index on.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridMeasure {
    head: Vec<Assignment>,
    point: PointSpec,
}

impl HybridMeasure {
    pub fn new(head: Vec<Assignment>, point: PointSpec) -> Self {
        HybridMeasure { head, point }
    }

    /// `σ_1 ⊗ ⋯ ⊗ σ_{n-1} ⊗ x_n ⊗ ⋯`; for `n = 1` this is the Dirac measure on `x`.
    pub fn switch_at(sigma: &ProductMeasure, point: &PointSpec, n: usize) -> Self {
        assert!(n >= 1, "switch index is 1-based");
        let head = (1..n)
            .map(|i| Assignment::Measure(sigma.coordinate(i)))
            .collect();
        HybridMeasure {
            head,
            point: point.clone(),
        }
    }

    pub fn dirac(point: PointSpec) -> Self {
        HybridMeasure {
            head: Vec::new(),
            point,
        }
    }

    /// First coordinate that is Dirac from `point`.
    pub fn switch_index(&self) -> usize {
        self.head.len() + 1
    }

    pub fn head(&self) -> &[Assignment] {
        &self.head
    }

    pub fn point(&self) -> &PointSpec {
        &self.point
    }

    pub fn assignment(&self, i: usize) -> Assignment {
        match self.head.get(i - 1) {
            Some(a) => a.clone(),
            None => Assignment::Dirac(self.point.coordinate(i)),
        }
    }
}

/// A measure the expectation engine can integrate against.
#[derive(Debug, Clone, Copy)]
pub enum MeasureRef<'a> {
    Product(&'a ProductMeasure),
    Hybrid(&'a HybridMeasure),
}

impl<'a> From<&'a ProductMeasure> for MeasureRef<'a> {
    fn from(m: &'a ProductMeasure) -> Self {
        MeasureRef::Product(m)
    }
}

impl<'a> From<&'a HybridMeasure> for MeasureRef<'a> {
    fn from(m: &'a HybridMeasure) -> Self {
        MeasureRef::Hybrid(m)
    }
}

impl MeasureRef<'_> {
    /// Number of leading coordinates the engine may branch on; `None` when
    /// every coordinate is random.
    pub fn random_len(&self) -> Option<usize> {
        match self {
            MeasureRef::Product(_) => None,
            MeasureRef::Hybrid(h) => Some(h.head.len()),
        }
    }

    /// Support of coordinate `i`, for `i` within the random part.
    pub fn support(&self, i: usize) -> Vec<usize> {
        match self {
            MeasureRef::Product(p) => p.coordinate(i).support(),
            MeasureRef::Hybrid(h) => h.head[i - 1].support(),
        }
    }

    pub fn weight_interval(&self, i: usize, sym: usize) -> Interval {
        match self {
            MeasureRef::Product(p) => p.weight_interval(i, sym),
            MeasureRef::Hybrid(h) => Interval::point(h.head[i - 1].weight(sym)),
        }
    }

    pub fn dirac_tail(&self) -> Option<(usize, &PointSpec)> {
        match self {
            MeasureRef::Product(_) => None,
            MeasureRef::Hybrid(h) => Some((h.switch_index(), &h.point)),
        }
    }
}
