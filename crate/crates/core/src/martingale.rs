//! The reverse martingale `g_n(x) = E_{σ_1 ⊗ ⋯ ⊗ σ_{n-1} ⊗ x_n ⊗ x_{n+1} ⊗ ⋯}[f]`
//! and the search for strong ε-approximation indices.
//!
//! Indexing starts at `n = 1`, where every coordinate is Dirac and `g_1 = f(x)`.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expectation::{expect, ExpectError, ExpectOptions, ExpectationResult};
use crate::interval::Interval;
use crate::model::{HybridMeasure, PointSpec, ProductMeasure, TailFunction};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrongApproxError {
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(f64),
    #[error("tolerance {tol} leaves no certification headroom for epsilon {epsilon} (need tol < epsilon/4)")]
    ToleranceTooCoarse { tol: f64, epsilon: f64 },
    #[error("n_max must be at least 1")]
    EmptyScan,
    #[error(transparent)]
    Engine(#[from] ExpectError),
}

/// `g_n(x)` as a certified interval.
pub fn g_n(
    f: &TailFunction,
    sigma: &ProductMeasure,
    x: &PointSpec,
    n: usize,
    opts: &ExpectOptions,
) -> Result<ExpectationResult, ExpectError> {
    assert!(n >= 1, "martingale index starts at 1");
    let hybrid = HybridMeasure::switch_at(sigma, x, n);
    expect(f, &hybrid, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n: usize,
    pub value: Interval,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTrace {
    pub entries: Vec<TraceEntry>,
    pub reference: Interval,
}

impl MartingaleTrace {
    /// Two whitespace-separated columns, `n` and the interval midpoint.
    pub fn to_columns(&self) -> String {
        let mut out = String::from("# n g_n\n");
        for e in &self.entries {
            out.push_str(&format!("{} {:.17e}\n", e.n, e.value.midpoint()));
        }
        out
    }
}

/// `g_1, …, g_N` and the reference `E_σ[f]`.
pub fn trace(
    f: &TailFunction,
    sigma: &ProductMeasure,
    x: &PointSpec,
    n_max: usize,
    opts: &ExpectOptions,
) -> Result<MartingaleTrace, ExpectError> {
    let reference = expect(f, sigma, opts)?.interval;
    let entries = (1..=n_max)
        .into_par_iter()
        .map(|n| {
            g_n(f, sigma, x, n, opts).map(|r| TraceEntry {
                n,
                value: r.interval,
                residual: r.residual,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MartingaleTrace { entries, reference })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Within,
    Violated,
    Undecided,
}

/// Decide `|g − e| ≤ ε` from two enclosures, or report that they do not settle it.
pub fn compare(g: Interval, e: Interval, epsilon: f64) -> Verdict {
    let d = g - e;
    if d.lo >= -epsilon && d.hi <= epsilon {
        Verdict::Within
    } else if d.lo > epsilon || d.hi < -epsilon {
        Verdict::Violated
    } else {
        Verdict::Undecided
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrongOutcome {
    /// Smallest certified index; every earlier index was certified to violate.
    Found { n: usize },
    /// Some earlier index could not be decided. `first_certified` still proves membership.
    Inconclusive {
        undecided: Vec<usize>,
        first_certified: Option<usize>,
    },
    /// Every index up to `n_max` was certified to violate.
    NotFoundUpTo { n_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrongApproxResult {
    pub outcome: StrongOutcome,
    pub epsilon: f64,
    pub reference: Interval,
    /// Largest residual behind any verdict used.
    pub residual: f64,
}

impl StrongApproxResult {
    /// An index at which `|g_n − E| ≤ ε` was certified, if any.
    pub fn certified_index(&self) -> Option<usize> {
        match self.outcome {
            StrongOutcome::Found { n } => Some(n),
            StrongOutcome::Inconclusive {
                first_certified, ..
            } => first_certified,
            StrongOutcome::NotFoundUpTo { .. } => None,
        }
    }
}

/// Scan `n = 1..=n_max` for an index certifying `|g_n(x) − E_σ[f]| ≤ ε`.
pub fn find_strong_approx(
    f: &TailFunction,
    sigma: &ProductMeasure,
    x: &PointSpec,
    epsilon: f64,
    n_max: usize,
    opts: &ExpectOptions,
) -> Result<StrongApproxResult, StrongApproxError> {
    if !(epsilon >= 0.0) {
        return Err(StrongApproxError::NegativeEpsilon(epsilon));
    }
    if epsilon > 0.0 && !(opts.tol < epsilon / 4.0) {
        return Err(StrongApproxError::ToleranceTooCoarse {
            tol: opts.tol,
            epsilon,
        });
    }
    if n_max == 0 {
        return Err(StrongApproxError::EmptyScan);
    }
    let reference = expect(f, sigma, opts)?;
    let e = reference.interval.intersect(&f.range());
    let mut residual = reference.residual;
    let mut undecided = Vec::new();
    for n in 1..=n_max {
        let g = g_n(f, sigma, x, n, opts)?;
        residual = residual.max(g.residual);
        match compare(g.interval.intersect(&f.range()), e, epsilon) {
            Verdict::Within => {
                let outcome = if undecided.is_empty() {
                    StrongOutcome::Found { n }
                } else {
                    StrongOutcome::Inconclusive {
                        undecided,
                        first_certified: Some(n),
                    }
                };
                return Ok(StrongApproxResult {
                    outcome,
                    epsilon,
                    reference: e,
                    residual,
                });
            }
            Verdict::Violated => {}
            Verdict::Undecided => undecided.push(n),
        }
    }
    let outcome = if undecided.is_empty() {
        StrongOutcome::NotFoundUpTo { n_max }
    } else {
        StrongOutcome::Inconclusive {
            undecided,
            first_certified: None,
        }
    };
    Ok(StrongApproxResult {
        outcome,
        epsilon,
        reference: e,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoordinateMeasure, Cylinder, GeometricWeights, ScoreTable, SymbolSequence};

    fn uniform() -> ProductMeasure {
        ProductMeasure::iid(CoordinateMeasure::uniform(2))
    }

    fn discounted() -> TailFunction {
        TailFunction::discounted_sum(
            GeometricWeights::halving(),
            ScoreTable::uniform(vec![0.0, 1.0]),
        )
    }

    #[test]
    fn constant_function_is_flat() {
        let f = TailFunction::constant(3.0);
        let t = trace(
            &f,
            &uniform(),
            &PointSpec::constant(0),
            5,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert!(t.entries.iter().all(|e| e.value == Interval::point(3.0)));
        assert_eq!(t.reference, Interval::point(3.0));
    }

    #[test]
    fn discounted_split_at_three() {
        let g = g_n(
            &discounted(),
            &uniform(),
            &PointSpec::constant(1),
            3,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert_eq!(g.interval, Interval::point(0.625));
    }

    #[test]
    fn discounted_trace_closed_form() {
        let t = trace(
            &discounted(),
            &uniform(),
            &PointSpec::constant(1),
            10,
            &ExpectOptions::default(),
        )
        .unwrap();
        for e in &t.entries {
            assert_eq!(e.value, Interval::point(0.5 + 2f64.powi(-(e.n as i32))));
        }
    }

    #[test]
    fn discounted_found_at_four() {
        let r = find_strong_approx(
            &discounted(),
            &uniform(),
            &PointSpec::constant(1),
            0.1,
            10,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert_eq!(r.outcome, StrongOutcome::Found { n: 4 });
    }

    #[test]
    fn wide_epsilon_found_immediately() {
        let f = TailFunction::product_indicator(SymbolSequence::constant(1));
        let sigma = ProductMeasure::geometric_bernoulli();
        let x = PointSpec::described(SymbolSequence::with_head(vec![0, 1, 0], 1));
        let r = find_strong_approx(&f, &sigma, &x, 1.0, 5, &ExpectOptions::default()).unwrap();
        assert_eq!(r.outcome, StrongOutcome::Found { n: 1 });
    }

    #[test]
    fn zero_epsilon_on_example_never_found() {
        let f = TailFunction::product_indicator(SymbolSequence::constant(1));
        let sigma = ProductMeasure::geometric_bernoulli();
        let r = find_strong_approx(
            &f,
            &sigma,
            &PointSpec::constant(1),
            0.0,
            30,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert!(r.certified_index().is_none());
    }

    #[test]
    fn tolerance_headroom_enforced() {
        let opts = ExpectOptions::default().with_tol(0.01);
        let err = find_strong_approx(
            &discounted(),
            &uniform(),
            &PointSpec::constant(1),
            0.02,
            5,
            &opts,
        )
        .unwrap_err();
        assert!(matches!(err, StrongApproxError::ToleranceTooCoarse { .. }));
        let err = find_strong_approx(
            &discounted(),
            &uniform(),
            &PointSpec::constant(1),
            -1.0,
            5,
            &opts,
        )
        .unwrap_err();
        assert_eq!(err, StrongApproxError::NegativeEpsilon(-1.0));
    }

    #[test]
    fn undecided_verdicts_are_reported() {
        // g and E overlap the threshold, so no verdict is possible.
        assert_eq!(
            compare(Interval::new(0.0, 0.2), Interval::point(0.0), 0.1),
            Verdict::Undecided
        );
        assert_eq!(
            compare(Interval::point(0.05), Interval::point(0.0), 0.1),
            Verdict::Within
        );
        assert_eq!(
            compare(Interval::point(0.5), Interval::point(0.0), 0.1),
            Verdict::Violated
        );
    }

    #[test]
    fn g1_equals_f_for_cylinders() {
        let f = TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| {
            0.7 * p[0] as f64 + 0.3 * p[1] as f64
        }));
        let x = PointSpec::described(SymbolSequence::with_head(vec![1, 0], 1));
        let g1 = g_n(&f, &uniform(), &x, 1, &ExpectOptions::default()).unwrap();
        assert_eq!(g1.interval, Interval::point(0.7));
    }
}
