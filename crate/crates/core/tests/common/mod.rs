//! Exact rational oracles shared by the integration tests. Deliberately
//! written without the crate's own `exact` helpers.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use infprod::interval::Interval;
use infprod::model::CoordinateMeasure;

pub fn q(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn frac(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn pow(r: &BigRational, k: usize) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..k {
        acc *= r;
    }
    acc
}

/// `∏_{i=1}^{n-1} (1 − 2^{-i})`: the value of `g_n` at the all-ones point.
pub fn halving_partial(n: usize) -> BigRational {
    let half = frac(1, 2);
    (1..n).fold(BigRational::one(), |acc, i| {
        acc * (BigRational::one() - pow(&half, i))
    })
}

/// `[p·(1 − 2^{-m}), p]` with `p` the first `m` factors of `∏_{i≥1}(1 − 2^{-i})`.
/// The lower end uses `∏(1 − a_i) ≥ 1 − Σ a_i`.
pub fn halving_infinite(m: usize) -> (BigRational, BigRational) {
    let p = halving_partial(m + 1);
    let lo = &p * (BigRational::one() - pow(&frac(1, 2), m));
    (lo, p)
}

pub fn encloses(iv: &Interval, v: &BigRational) -> bool {
    q(iv.lo) <= *v && *v <= q(iv.hi)
}

pub fn overlaps(iv: &Interval, lo: &BigRational, hi: &BigRational) -> bool {
    q(iv.lo) <= *hi && *lo <= q(iv.hi)
}

pub fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("representable")
}

/// Random measure on `arity` symbols with weights in multiples of 1/16, so the
/// weights sum to exactly one in floating point.
pub fn dyadic_measure(rng: &mut ChaCha8Rng, arity: usize) -> CoordinateMeasure {
    let mut cuts: Vec<u32> = (0..arity - 1).map(|_| rng.gen_range(0..=16)).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut w = Vec::with_capacity(arity);
    for c in cuts.into_iter().chain(std::iter::once(16)) {
        w.push((c - prev) as f64 / 16.0);
        prev = c;
    }
    CoordinateMeasure::new(w).expect("dyadic weights")
}

/// Every prefix over `radices`, last coordinate varying fastest.
pub fn prefixes(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..r).map(move |s| {
                    let mut p = p.clone();
                    p.push(s);
                    p
                })
            })
            .collect();
    }
    out
}

/// `Σ_prefix table[prefix] · ∏_i μ_i(prefix_i)` over the first `radices.len()` coordinates.
pub fn cylinder_expectation(
    radices: &[usize],
    table: &[f64],
    measures: &[CoordinateMeasure],
) -> BigRational {
    prefixes(radices)
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            p.iter()
                .enumerate()
                .fold(q(table[idx]), |acc, (i, &s)| acc * q(measures[i].weight(s)))
        })
        .fold(BigRational::zero(), |a, b| a + b)
}
