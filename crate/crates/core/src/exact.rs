//! Exact rational helpers: partial products of geometric Bernoulli weights
//! and small-denominator recovery of mixing weights.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};

/// The exact value of a finite `f64`.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

/// `∏_{i=from}^{to} (1 − ratio^i)`.
pub fn geometric_partial_product(ratio: &BigRational, from: usize, to: usize) -> BigRational {
    let mut acc = BigRational::one();
    if from > to {
        return acc;
    }
    let mut power = num_traits::pow(ratio.clone(), from);
    for _ in from..=to {
        acc *= BigRational::one() - &power;
        power *= ratio;
    }
    acc
}

/// Rational bounds `lo ≤ ∏_{i≥1}(1 − ratio^i) ≤ hi` from the first `n` factors
/// and the remainder estimate `∏_{i>n}(1 − ratio^i) ≥ 1 − ratio^{n+1}/(1 − ratio)`.
pub fn geometric_infinite_product_bounds(
    ratio: &BigRational,
    n: usize,
) -> (BigRational, BigRational) {
    let hi = geometric_partial_product(ratio, 1, n);
    let rem = num_traits::pow(ratio.clone(), n + 1) / (BigRational::one() - ratio);
    let lo = &hi * (BigRational::one() - rem);
    (lo, hi)
}

/// The fraction with the smallest denominator inside `[x − tol, x + tol]`,
/// found by walking the Stern–Brocot tree. `None` when it would not fit in `i64`.
pub fn simplest_rational_within(x: f64, tol: f64) -> Option<Ratio<i64>> {
    let lo = rational(x - tol);
    let hi = rational(x + tol);
    let r = simplest_between(&lo, &hi)?;
    Some(Ratio::new(r.numer().to_i64()?, r.denom().to_i64()?))
}

fn simplest_between(lo: &BigRational, hi: &BigRational) -> Option<BigRational> {
    if lo > hi {
        return None;
    }
    if lo.is_negative() && hi.is_positive() || lo.is_zero() || hi.is_zero() {
        return Some(BigRational::zero());
    }
    if hi.is_negative() {
        return simplest_between(&-hi.clone(), &-lo.clone()).map(|r| -r);
    }
    let fl = lo.floor();
    if fl == *lo {
        return Some(fl);
    }
    if fl.clone() + BigRational::one() <= *hi {
        return Some(fl + BigRational::one());
    }
    // Both ends share an integer part; recurse on the reciprocals of the fractional parts.
    let inv_lo = (hi.clone() - &fl).recip();
    let inv_hi = (lo.clone() - &fl).recip();
    let inner = simplest_between(&inv_lo, &inv_hi)?;
    Some(fl + inner.recip())
}

/// Render a big rational as `num/den`.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom() == &BigInt::one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_products_match_hand_values() {
        let half = BigRational::new(1.into(), 2.into());
        let p5 = geometric_partial_product(&half, 1, 5);
        assert_eq!(p5, BigRational::new(9765.into(), 32768.into()));
        let (lo, hi) = geometric_infinite_product_bounds(&half, 60);
        assert!(lo < hi);
        assert!(rational(0.2887880950) < lo && hi < rational(0.2887880952));
    }

    #[test]
    fn recovers_small_fractions() {
        assert_eq!(
            simplest_rational_within(2.0 / 7.0, 1e-12),
            Some(Ratio::new(2, 7))
        );
        assert_eq!(
            simplest_rational_within(0.75, 1e-12),
            Some(Ratio::new(3, 4))
        );
        assert_eq!(simplest_rational_within(1.0, 1e-12), Some(Ratio::new(1, 1)));
        assert_eq!(simplest_rational_within(0.0, 1e-12), Some(Ratio::new(0, 1)));
        let r = simplest_rational_within(-0.4, 1e-12).unwrap();
        assert_eq!(r, Ratio::new(-2, 5));
    }
}
