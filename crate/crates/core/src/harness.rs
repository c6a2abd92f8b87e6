//! Monte Carlo campaigns: sample points under `σ`, run a certifier on each,
//! and report what fraction of the sample space it certified.
//!
//! Sample `i` draws its point from seed `substream_seed(master, i)`, so a
//! report depends only on the scenario, the master seed and the flags, never
//! on the thread count or scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expectation::{expect, ExpectError, ExpectOptions};
use crate::interval::Interval;
use crate::martingale::{find_strong_approx, StrongApproxError, StrongOutcome};
use crate::model::{PointSpec, ProductMeasure, SpaceFamily, TailFunction};
use crate::seeds::substream_seed;
use crate::tail_class::{classify, construct_weak_zero, Verdict, MIXING_TOLERANCE};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error(transparent)]
    Config(#[from] StrongApproxError),
    #[error(transparent)]
    Engine(#[from] ExpectError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    StrongEpsilon,
    WeakZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Certified,
    Inconclusive,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    pub seed: u64,
    pub status: SampleStatus,
    /// Certified martingale index, or the mixing coordinate of a weak certificate.
    pub found: Option<usize>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Identifies the scenario a campaign ran against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampaignMeta {
    pub scenario: String,
    pub digest: String,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub theorem: Theorem,
    pub scenario: String,
    pub scenario_digest: String,
    pub master_seed: u64,
    pub samples: usize,
    pub certified: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub certified_fraction: f64,
    pub inconclusive_fraction: f64,
    pub max_residual: f64,
    pub parameters: BTreeMap<String, f64>,
    pub records: Vec<SampleRecord>,
}

impl VerificationReport {
    fn assemble(
        theorem: Theorem,
        meta: &CampaignMeta,
        parameters: BTreeMap<String, f64>,
        mut records: Vec<SampleRecord>,
    ) -> Self {
        records.sort_by_key(|r| r.index);
        let count = |s| records.iter().filter(|r| r.status == s).count();
        let (certified, inconclusive, failed) = (
            count(SampleStatus::Certified),
            count(SampleStatus::Inconclusive),
            count(SampleStatus::Failed),
        );
        let samples = records.len();
        VerificationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            theorem,
            scenario: meta.scenario.clone(),
            scenario_digest: meta.digest.clone(),
            master_seed: meta.master_seed,
            samples,
            certified,
            inconclusive,
            failed,
            certified_fraction: certified as f64 / samples as f64,
            inconclusive_fraction: inconclusive as f64 / samples as f64,
            max_residual: records.iter().map(|r| r.residual).fold(0.0, f64::max),
            parameters,
            records,
        }
    }

    pub fn meets(&self, threshold: f64) -> bool {
        self.certified_fraction >= threshold
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "theorem:        {:?}", self.theorem);
        let _ = writeln!(
            out,
            "scenario:       {} ({})",
            self.scenario,
            &self.scenario_digest[..12.min(self.scenario_digest.len())]
        );
        let _ = writeln!(out, "master seed:    {}", self.master_seed);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "{:<15} {}", format!("{k}:"), v);
        }
        let _ = writeln!(out, "samples:        {}", self.samples);
        let _ = writeln!(
            out,
            "certified:      {} ({:.4})",
            self.certified, self.certified_fraction
        );
        let _ = writeln!(
            out,
            "inconclusive:   {} ({:.4})",
            self.inconclusive, self.inconclusive_fraction
        );
        let _ = writeln!(out, "failed:         {}", self.failed);
        let _ = writeln!(out, "max residual:   {:e}", self.max_residual);
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for r in &self.records {
            if let Some(n) = r.found {
                *hist.entry(n).or_default() += 1;
            }
        }
        if !hist.is_empty() {
            let cells: Vec<String> = hist.iter().map(|(n, c)| format!("{n}:{c}")).collect();
            let _ = writeln!(out, "found index:    {}", cells.join(" "));
        }
        out
    }
}

fn sample_point(sigma: &Arc<ProductMeasure>, master: u64, index: u64) -> (u64, PointSpec) {
    let seed = substream_seed(master, index);
    (seed, PointSpec::lazy(seed, Arc::clone(sigma)))
}

/// Fraction of sampled points certified to be strong ε-approximations.
pub fn verify_strong(
    f: &TailFunction,
    sigma: &Arc<ProductMeasure>,
    epsilon: f64,
    samples: usize,
    n_max: usize,
    opts: &ExpectOptions,
    meta: &CampaignMeta,
) -> Result<VerificationReport, HarnessError> {
    if samples == 0 {
        return Err(HarnessError::NoSamples);
    }
    // Surface configuration errors once rather than per sample.
    find_strong_approx(f, sigma, &PointSpec::constant(0), epsilon, 1, opts).map(|_| ())?;
    let records = (0..samples as u64)
        .into_par_iter()
        .map(|index| {
            let (seed, x) = sample_point(sigma, meta.master_seed, index);
            match find_strong_approx(f, sigma, &x, epsilon, n_max, opts) {
                Ok(r) => {
                    let (status, note) = match &r.outcome {
                        StrongOutcome::Found { .. } => (SampleStatus::Certified, None),
                        StrongOutcome::Inconclusive {
                            undecided,
                            first_certified: Some(_),
                        } => (
                            SampleStatus::Certified,
                            Some(format!("minimality undecided at n = {undecided:?}")),
                        ),
                        StrongOutcome::Inconclusive { undecided, .. } => (
                            SampleStatus::Inconclusive,
                            Some(format!("undecided at n = {undecided:?}")),
                        ),
                        StrongOutcome::NotFoundUpTo { .. } => (SampleStatus::Failed, None),
                    };
                    SampleRecord {
                        index,
                        seed,
                        status,
                        found: r.certified_index(),
                        residual: r.residual,
                        note,
                    }
                }
                Err(e) => SampleRecord {
                    index,
                    seed,
                    status: SampleStatus::Failed,
                    found: None,
                    residual: 0.0,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    let parameters = BTreeMap::from([
        ("epsilon".to_string(), epsilon),
        ("n_max".to_string(), n_max as f64),
        ("tol".to_string(), opts.tol),
        ("horizon".to_string(), opts.policy.horizon as f64),
        ("eta".to_string(), opts.policy.residual_limit.unwrap_or(0.0)),
    ]);
    Ok(VerificationReport::assemble(
        Theorem::StrongEpsilon,
        meta,
        parameters,
        records,
    ))
}

/// Fraction of sampled points whose depth-`m` hull certifies tail-class
/// membership and yields a verified single-coordinate certificate.
pub fn verify_weak(
    f: &TailFunction,
    spaces: &SpaceFamily,
    sigma: &Arc<ProductMeasure>,
    depth: usize,
    samples: usize,
    opts: &ExpectOptions,
    meta: &CampaignMeta,
) -> Result<VerificationReport, HarnessError> {
    if samples == 0 {
        return Err(HarnessError::NoSamples);
    }
    if depth == 0 {
        return Err(HarnessError::ZeroDepth);
    }
    let expectation = expect(f, sigma.as_ref(), opts)?
        .interval
        .intersect(&f.range());
    let r = expectation.midpoint();
    let records = (0..samples as u64)
        .into_par_iter()
        .map(|index| {
            let (seed, x) = sample_point(sigma, meta.master_seed, index);
            weak_record(f, spaces, &x, r, depth, opts, index, seed)
        })
        .collect();
    let parameters = BTreeMap::from([
        ("depth".to_string(), depth as f64),
        ("r".to_string(), r),
        ("expectation_lo".to_string(), expectation.lo),
        ("expectation_hi".to_string(), expectation.hi),
        ("horizon".to_string(), opts.policy.horizon as f64),
        ("eta".to_string(), opts.policy.residual_limit.unwrap_or(0.0)),
    ]);
    Ok(VerificationReport::assemble(
        Theorem::WeakZero,
        meta,
        parameters,
        records,
    ))
}

#[allow(clippy::too_many_arguments)]
fn weak_record(
    f: &TailFunction,
    spaces: &SpaceFamily,
    x: &PointSpec,
    r: f64,
    depth: usize,
    opts: &ExpectOptions,
    index: u64,
    seed: u64,
) -> SampleRecord {
    let record = |status, found, residual, note: Option<String>| SampleRecord {
        index,
        seed,
        status,
        found,
        residual,
        note,
    };
    let verdict = classify(f, spaces, x, r, depth, opts.policy);
    if verdict.verdict != Verdict::Z0Certified {
        return record(
            SampleStatus::Inconclusive,
            None,
            verdict.hull.residual,
            Some(format!("hull {} misses r", verdict.hull.interval)),
        );
    }
    let hull = verdict.hull;
    match construct_weak_zero(f, spaces, &hull.argmin, &hull.argmax, r, None, opts.policy) {
        Ok(c) => {
            let mixed = c.mixed_expectation(f, opts.policy);
            let ok = (0.0..=1.0).contains(&c.alpha)
                && c.tau.support().len() <= 2
                && (c.achieved - r).abs() <= MIXING_TOLERANCE
                && mixed.is_some_and(|m| (m - r).abs() <= MIXING_TOLERANCE)
                && c.covering_holds();
            let residual = c.residual.max(hull.residual);
            if ok {
                record(SampleStatus::Certified, Some(c.k), residual, None)
            } else {
                record(
                    SampleStatus::Failed,
                    Some(c.k),
                    residual,
                    Some("certificate failed re-verification".into()),
                )
            }
        }
        Err(e) => record(
            SampleStatus::Failed,
            None,
            hull.residual,
            Some(e.to_string()),
        ),
    }
}

/// Interval text with enough digits to compare against published constants.
pub fn format_interval(iv: &Interval) -> String {
    format!("[{:.15}, {:.15}] (width {:.3e})", iv.lo, iv.hi, iv.width())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CoordinateMeasure, Cylinder};

    fn meta(seed: u64) -> CampaignMeta {
        CampaignMeta {
            scenario: "test".into(),
            digest: "0".repeat(64),
            master_seed: seed,
        }
    }

    #[test]
    fn constant_function_strong_campaign() {
        let sigma = Arc::new(ProductMeasure::iid(CoordinateMeasure::uniform(3)));
        let r = verify_strong(
            &TailFunction::constant(2.0),
            &sigma,
            0.0,
            100,
            5,
            &ExpectOptions::default(),
            &meta(1),
        )
        .unwrap();
        assert_eq!(r.certified_fraction, 1.0);
        assert!(r.records.iter().all(|s| s.found == Some(1)));
        assert_eq!(r.certified + r.inconclusive + r.failed, r.samples);
    }

    #[test]
    fn weighted_pair_weak_campaign() {
        let sigma = Arc::new(ProductMeasure::iid(CoordinateMeasure::uniform(2)));
        let f = TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], |p| {
            0.7 * p[0] as f64 + 0.3 * p[1] as f64
        }));
        let r = verify_weak(
            &f,
            &SpaceFamily::binary(),
            &sigma,
            2,
            50,
            &ExpectOptions::default(),
            &meta(3),
        )
        .unwrap();
        assert_eq!(r.certified_fraction, 1.0);
        let again = verify_weak(
            &f,
            &SpaceFamily::binary(),
            &sigma,
            2,
            50,
            &ExpectOptions::default(),
            &meta(3),
        )
        .unwrap();
        assert_eq!(r.to_json(), again.to_json());
    }
}
