mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use infprod::expectation::{expect, ExpectOptions};
use infprod::interval::Interval;
use infprod::martingale::{compare, find_strong_approx, g_n, Verdict};
use infprod::model::{
    CoordinateMeasure, Cylinder, EvalPolicy, GeometricWeights, MeasureTail, PointSpec,
    ProductMeasure, ScoreTable, SpaceFamily, SymbolSequence, TailFunction,
};
use infprod::seeds::substream_seed;
use infprod::tail_class::{construct_weak_zero, hull_estimate, ENUMERATION_BUDGET};

fn finite() -> impl Strategy<Value = f64> {
    -1e6f64..1e6
}

fn binary_cylinder(depth: usize) -> impl Strategy<Value = TailFunction> {
    prop::collection::vec(0u8..=8, 1 << depth).prop_map(move |t| {
        let table = t.into_iter().map(|v| v as f64 / 8.0).collect();
        TailFunction::cylinder(Cylinder::new(vec![2; depth], table).unwrap())
    })
}

fn policy() -> EvalPolicy {
    ExpectOptions::default().policy
}

proptest! {
    #[test]
    fn interval_ops_enclose_exact_results(a in finite(), b in finite(), c in finite(), d in finite()) {
        let x = Interval::new(a.min(b), a.max(b));
        let y = Interval::new(c.min(d), c.max(d));
        for (u, v) in [(x.lo, y.lo), (x.lo, y.hi), (x.hi, y.lo), (x.hi, y.hi)] {
            prop_assert!(encloses(&(x + y), &(q(u) + q(v))));
            prop_assert!(encloses(&(x - y), &(q(u) - q(v))));
            prop_assert!(encloses(&(x * y), &(q(u) * q(v))));
        }
    }

    #[test]
    fn hulls_nest_with_depth(f in binary_cylinder(4), seed in any::<u64>()) {
        let sigma = Arc::new(ProductMeasure::iid(CoordinateMeasure::uniform(2)));
        let x = PointSpec::lazy(seed, sigma);
        let spaces = SpaceFamily::binary();
        let mut prev: Option<Interval> = None;
        for m in 0..=4 {
            let h = hull_estimate(&f, &spaces, &x, m, ENUMERATION_BUDGET, policy());
            prop_assert!(f.range().contains_interval(&h.interval));
            if let Some(p) = prev {
                prop_assert!(h.interval.contains_interval(&p), "depth {m}: {} ⊉ {p}", h.interval);
            }
            prev = Some(h.interval);
        }
        // A depth-4 cylinder reaches its whole range once every coordinate may change.
        prop_assert_eq!(prev.unwrap(), f.range());
    }

    #[test]
    fn weak_certificate_hits_any_target_between_values(
        f in binary_cylinder(3),
        xs in prop::collection::vec(0usize..2, 3),
        ys in prop::collection::vec(0usize..2, 3),
        t in 0.0f64..=1.0,
    ) {
        let mut x = PointSpec::described(SymbolSequence::with_head(xs, 0));
        let mut y = PointSpec::described(SymbolSequence::with_head(ys, 0));
        let mut fx = f.eval(&x, 60).exact().unwrap();
        let mut fy = f.eval(&y, 60).exact().unwrap();
        if fx > fy {
            std::mem::swap(&mut x, &mut y);
            std::mem::swap(&mut fx, &mut fy);
        }
        let r = fx + t * (fy - fx);
        let r = r.clamp(fx.min(fy), fx.max(fy));
        let c = construct_weak_zero(&f, &SpaceFamily::binary(), &x, &y, r, None, policy()).unwrap();
        prop_assert!((0.0..=1.0).contains(&c.alpha));
        prop_assert!(c.tau.support().len() <= 2);
        prop_assert!(c.covering_holds());
        let mixed = c.mixed_expectation(&f, policy()).unwrap();
        prop_assert!((mixed - r).abs() <= 1e-12, "mixed {mixed} vs {r}");
    }

    #[test]
    fn reverse_martingale_step_on_cylinders(
        f in binary_cylinder(3),
        p in 1u8..16,
        head in prop::collection::vec(0usize..2, 4),
        n in 1usize..=5,
    ) {
        let m = CoordinateMeasure::new(vec![p as f64 / 16.0, 1.0 - p as f64 / 16.0]).unwrap();
        let sigma = ProductMeasure::iid(m.clone());
        let x = PointSpec::described(SymbolSequence::with_head(head, 1));
        let opts = ExpectOptions::default();
        let lhs = g_n(&f, &sigma, &x, n + 1, &opts).unwrap().interval;
        let mut rhs = Interval::ZERO;
        for t in 0..2 {
            rhs = rhs + g_n(&f, &sigma, &x.modified(n, t), n, &opts).unwrap().interval.scale(m.weight(t));
        }
        prop_assert!((lhs.midpoint() - rhs.midpoint()).abs() <= 4.0 * opts.tol);
    }

    #[test]
    fn discounted_martingale_converges(seed in any::<u64>(), ratio in 0.1f64..0.9) {
        let sigma = Arc::new(ProductMeasure::iid(CoordinateMeasure::uniform(3)));
        let f = TailFunction::discounted_sum(
            GeometricWeights::new(1.0, ratio).unwrap(),
            ScoreTable::uniform(vec![0.0, 0.5, 1.0]),
        );
        let x = PointSpec::lazy(seed, Arc::clone(&sigma));
        let opts = ExpectOptions::default();
        let e = expect(&f, sigma.as_ref(), &opts).unwrap().interval;
        for n in [1usize, 5, 20, 60] {
            let g = g_n(&f, &sigma, &x, n, &opts).unwrap().interval;
            // Only coordinates from n on still differ from σ.
            let bound = ratio.powi(n as i32) / (1.0 - ratio) + 1e-9;
            prop_assert_eq!(compare(g, e, bound), Verdict::Within);
        }
    }

    #[test]
    fn substreams_are_stable(master in any::<u64>(), i in any::<u64>()) {
        prop_assert_eq!(substream_seed(master, i), substream_seed(master, i));
    }
}

#[test]
fn certified_index_is_monotone_in_epsilon() {
    let sigma = Arc::new(ProductMeasure::geometric_bernoulli());
    let f = TailFunction::product_indicator(SymbolSequence::constant(1));
    let opts = ExpectOptions::default();
    for s in 0..20 {
        let x = PointSpec::lazy(substream_seed(7, s), Arc::clone(&sigma));
        let mut prev = usize::MAX;
        for eps in [0.001, 0.01, 0.1, 0.5] {
            let r = find_strong_approx(&f, &sigma, &x, eps, 60, &opts).unwrap();
            let n = r.certified_index().expect("certified");
            assert!(n <= prev, "eps {eps}: {n} > {prev}");
            prev = n;
        }
    }
}

#[test]
fn random_cylinders_match_exact_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let measures: Vec<CoordinateMeasure> =
            (0..3).map(|_| dyadic_measure(&mut rng, 3)).collect();
        let table: Vec<f64> = (0..27).map(|k| ((k * 7) % 11) as f64 / 10.0).collect();
        let f = TailFunction::cylinder(Cylinder::new(vec![3; 3], table.clone()).unwrap());
        let sigma = ProductMeasure::new(
            measures.clone(),
            MeasureTail::Constant(CoordinateMeasure::uniform(3)),
        )
        .unwrap();
        let r = expect(&f, &sigma, &ExpectOptions::default()).unwrap();
        let exact = cylinder_expectation(&[3, 3, 3], &table, &measures);
        assert!(
            encloses(&r.interval, &exact),
            "{} vs {}",
            r.interval,
            to_f64(&exact)
        );
    }
}
