//! Player 0 with finitely many actions against countably many opponents:
//! best-response values, purification of a mixed profile to an eventually
//! pure one, and the naming game whose infinite action set breaks it.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::expectation::{expect, ExpectError, ExpectOptions};
use crate::interval::Interval;
use crate::martingale::{compare, find_strong_approx, g_n, StrongApproxError, Verdict};
use crate::model::{
    Assignment, CoordinateMeasure, HybridMeasure, MeasureRef, MeasureTail, PointSpec,
    ProductMeasure, TailFunction,
};
use crate::seeds::substream_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("a game needs at least one action")]
    NoActions,
    #[error("{actions} action names but {payoffs} payoff functions")]
    ActionCountMismatch { actions: usize, payoffs: usize },
    #[error("epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("purification failed after {attempts} samples: {}", diagnostics.join("; "))]
    PurificationFailed {
        attempts: usize,
        diagnostics: Vec<String>,
    },
    #[error("coordinate {0} is not binary")]
    NotBinary(usize),
    #[error("profile has no Dirac tail")]
    NotFinitistic,
    #[error(transparent)]
    StrongApprox(#[from] StrongApproxError),
    #[error(transparent)]
    Engine(#[from] ExpectError),
}

/// `u(a, ·) = f_a` for each action `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    actions: Vec<String>,
    payoffs: Vec<TailFunction>,
    range: Interval,
}

impl GameSpec {
    pub fn new(actions: Vec<String>, payoffs: Vec<TailFunction>) -> Result<Self, GameError> {
        if actions.is_empty() {
            return Err(GameError::NoActions);
        }
        if actions.len() != payoffs.len() {
            return Err(GameError::ActionCountMismatch {
                actions: actions.len(),
                payoffs: payoffs.len(),
            });
        }
        let range = payoffs
            .iter()
            .map(|f| f.range())
            .reduce(|a, b| a.hull(&b))
            .expect("nonempty");
        Ok(GameSpec {
            actions,
            payoffs,
            range,
        })
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn payoffs(&self) -> &[TailFunction] {
        &self.payoffs
    }

    /// Hull of every action's payoff range.
    pub fn range(&self) -> Interval {
        self.range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestResponse {
    /// Interval maximum over actions.
    pub value: Interval,
    /// Action with the largest upper bound, first in order on ties.
    pub argmax: usize,
    pub per_action: Vec<Interval>,
}

/// `max_a E_{a⊗π}[u]`.
pub fn best_response_value<'a>(
    game: &GameSpec,
    profile: impl Into<MeasureRef<'a>>,
    opts: &ExpectOptions,
) -> Result<BestResponse, GameError> {
    let mu: MeasureRef<'a> = profile.into();
    let per_action = game
        .payoffs
        .par_iter()
        .map(|f| expect(f, mu, opts).map(|r| r.interval.intersect(&f.range())))
        .collect::<Result<Vec<_>, _>>()?;
    let mut argmax = 0;
    for (a, v) in per_action.iter().enumerate() {
        if v.hi > per_action[argmax].hi {
            argmax = a;
        }
    }
    let value = per_action
        .iter()
        .copied()
        .reduce(|a, b| a.max(&b))
        .expect("nonempty");
    Ok(BestResponse {
        value,
        argmax,
        per_action,
    })
}

/// A profile that is Dirac on every coordinate from its switch index on.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitisticProfile {
    hybrid: HybridMeasure,
}

impl FinitisticProfile {
    pub fn new(hybrid: HybridMeasure) -> Self {
        FinitisticProfile { hybrid }
    }

    pub fn hybrid(&self) -> &HybridMeasure {
        &self.hybrid
    }

    pub fn switch_index(&self) -> usize {
        self.hybrid.switch_index()
    }
}

impl<'a> From<&'a FinitisticProfile> for MeasureRef<'a> {
    fn from(p: &'a FinitisticProfile) -> Self {
        MeasureRef::Hybrid(&p.hybrid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    pub action: String,
    /// Smallest certified index found for this action alone.
    pub found: usize,
    /// `E_{a⊗τ}[u]` at the common index.
    pub purified: Interval,
    /// `E_{a⊗σ}[u]`.
    pub mixed: Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    pub profile: FinitisticProfile,
    pub n: usize,
    pub epsilon: f64,
    pub sample_index: usize,
    pub actions: Vec<ActionReport>,
    /// `max_a E_{a⊗τ}[u]`.
    pub purified_value: Interval,
    /// `max_a E_{a⊗σ}[u]`.
    pub mixed_value: Interval,
    pub residual: f64,
}

impl Purification {
    /// `max_a E_{a⊗τ}[u] ≤ max_a E_{a⊗σ}[u] + ε`, decided on the certified enclosures.
    pub fn guarantee_holds(&self) -> bool {
        self.actions
            .iter()
            .all(|a| a.purified.hi - a.mixed.lo <= self.epsilon)
            && self.purified_value.hi - self.mixed_value.lo <= self.epsilon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurifyConfig {
    pub epsilon: f64,
    pub n_max: usize,
    pub seed: u64,
    pub retries: usize,
}

/// Replace `σ` by `σ_1 ⊗ ⋯ ⊗ σ_{n-1} ⊗ x_n ⊗ ⋯` for a sampled `x`, keeping
/// every action's expected payoff within `ε` of its value under `σ`.
pub fn purify(
    game: &GameSpec,
    sigma: &Arc<ProductMeasure>,
    cfg: PurifyConfig,
    opts: &ExpectOptions,
) -> Result<Purification, GameError> {
    let mut diagnostics = Vec::new();
    for j in 0..cfg.retries {
        let x = PointSpec::lazy(substream_seed(cfg.seed, j as u64), Arc::clone(sigma));
        match purify_at(game, sigma, &x, cfg.epsilon, cfg.n_max, opts) {
            Ok(mut p) => {
                p.sample_index = j;
                return Ok(p);
            }
            Err(GameError::PurificationFailed { diagnostics: d, .. }) => {
                diagnostics.extend(d.into_iter().map(|s| format!("sample {j}: {s}")));
            }
            Err(e) => return Err(e),
        }
    }
    Err(GameError::PurificationFailed {
        attempts: cfg.retries,
        diagnostics,
    })
}

/// Purification at a given point `x`.
pub fn purify_at(
    game: &GameSpec,
    sigma: &ProductMeasure,
    x: &PointSpec,
    epsilon: f64,
    n_max: usize,
    opts: &ExpectOptions,
) -> Result<Purification, GameError> {
    if !(epsilon > 0.0) {
        return Err(GameError::NonPositiveEpsilon(epsilon));
    }
    let found = game
        .payoffs
        .par_iter()
        .map(|f| find_strong_approx(f, sigma, x, epsilon, n_max, opts))
        .collect::<Result<Vec<_>, _>>()?;
    let missing: Vec<String> = found
        .iter()
        .zip(&game.actions)
        .filter(|(r, _)| r.certified_index().is_none())
        .map(|(r, a)| format!("action {a}: {:?}", r.outcome))
        .collect();
    if !missing.is_empty() {
        return Err(GameError::PurificationFailed {
            attempts: 1,
            diagnostics: missing,
        });
    }
    let indices: Vec<usize> = found.iter().map(|r| r.certified_index().unwrap()).collect();
    let start = *indices.iter().max().expect("nonempty");
    let mut residual = found.iter().map(|r| r.residual).fold(0.0, f64::max);

    // Closeness at one index does not carry over to larger ones, so re-certify every action.
    let mut last_failure = String::new();
    for n in start..=n_max {
        let values = game
            .payoffs
            .par_iter()
            .map(|f| {
                g_n(f, sigma, x, n, opts).map(|g| (g.interval.intersect(&f.range()), g.residual))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let failing: Vec<&str> = values
            .iter()
            .zip(&found)
            .zip(&game.actions)
            .filter(|(((g, _), r), _)| compare(*g, r.reference, epsilon) != Verdict::Within)
            .map(|(_, a)| a.as_str())
            .collect();
        if !failing.is_empty() {
            last_failure = format!("n = {n} fails for {}", failing.join(", "));
            continue;
        }
        residual = values.iter().map(|v| v.1).fold(residual, f64::max);
        let actions: Vec<ActionReport> = game
            .actions
            .iter()
            .zip(&indices)
            .zip(values.iter().zip(&found))
            .map(|((a, &k), ((g, _), r))| ActionReport {
                action: a.clone(),
                found: k,
                purified: *g,
                mixed: r.reference,
            })
            .collect();
        let purified_value = actions
            .iter()
            .map(|a| a.purified)
            .reduce(|a, b| a.max(&b))
            .unwrap();
        let mixed_value = actions
            .iter()
            .map(|a| a.mixed)
            .reduce(|a, b| a.max(&b))
            .unwrap();
        return Ok(Purification {
            profile: FinitisticProfile::new(HybridMeasure::switch_at(sigma, x, n)),
            n,
            epsilon,
            sample_index: 0,
            actions,
            purified_value,
            mixed_value,
            residual,
        });
    }
    Err(GameError::PurificationFailed {
        attempts: 1,
        diagnostics: vec![last_failure],
    })
}

/// `sup_n max_j σ_n({j})`, with the coordinate attaining it when the supremum is a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NamingValue {
    pub value: f64,
    pub attained_at: Option<(usize, usize)>,
}

/// Value of the naming game, where action `(n, j)` pays 1 iff `x_n = j`.
pub fn naming_game_value(sigma: &ProductMeasure) -> Result<NamingValue, GameError> {
    let mut best = NamingValue {
        value: f64::NEG_INFINITY,
        attained_at: None,
    };
    let mut consider = |i: usize, w: &[f64]| -> Result<(), GameError> {
        if w.len() != 2 {
            return Err(GameError::NotBinary(i));
        }
        for (j, &p) in w.iter().enumerate() {
            if p > best.value {
                best = NamingValue {
                    value: p,
                    attained_at: Some((i, j)),
                };
            }
        }
        Ok(())
    };
    for (k, m) in sigma.head().iter().enumerate() {
        consider(k + 1, m.weights())?;
    }
    let t = sigma.head_len();
    match sigma.tail() {
        MeasureTail::Constant(m) => consider(t + 1, m.weights())?,
        MeasureTail::Periodic(list) => {
            for (k, m) in list.iter().enumerate() {
                consider(t + 1 + k, m.weights())?;
            }
        }
        MeasureTail::Formula(family) => {
            if family.arity() != 2 {
                return Err(GameError::NotBinary(t + 1));
            }
            // σ_i({1}) = 1 − ratio^i approaches 1 without reaching it.
            if best.value < 1.0 {
                best = NamingValue {
                    value: 1.0,
                    attained_at: None,
                };
            }
        }
    }
    Ok(best)
}

/// A profile offered to the naming-game exploiter.
#[derive(Debug, Clone, Copy)]
pub enum Profile<'a> {
    Product(&'a ProductMeasure),
    Finitistic(&'a FinitisticProfile),
}

/// An action `(n, j)` that pays 1 almost surely against an eventually pure profile.
pub fn naming_game_exploit(profile: Profile<'_>) -> Result<(usize, usize), GameError> {
    match profile {
        Profile::Finitistic(p) => {
            let n = p.switch_index();
            Ok((n, p.hybrid().point().coordinate(n)))
        }
        Profile::Product(sigma) => {
            let tail_dirac = match sigma.tail() {
                MeasureTail::Constant(m) => m.as_dirac().is_some(),
                MeasureTail::Periodic(list) => list.iter().all(|m| m.as_dirac().is_some()),
                MeasureTail::Formula(_) => false,
            };
            if !tail_dirac {
                return Err(GameError::NotFinitistic);
            }
            let mut n = sigma.head_len() + 1;
            while n > 1 && sigma.head()[n - 2].as_dirac().is_some() {
                n -= 1;
            }
            Ok((n, sigma.coordinate(n).as_dirac().expect("Dirac from n on")))
        }
    }
}

/// A random eventually pure profile on binary coordinates: between 0 and
/// `max_head` leading coordinates with random Bernoulli weights, then the
/// Dirac tail of a point sampled under `sigma`.
pub fn random_finitistic_profile(
    seed: u64,
    sigma: &Arc<ProductMeasure>,
    max_head: usize,
) -> FinitisticProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(0..=max_head);
    let head = (0..len)
        .map(|_| {
            let p: f64 = rng.gen_range(0.0..=1.0);
            Assignment::Measure(CoordinateMeasure::bernoulli(p).expect("p in [0, 1]"))
        })
        .collect();
    let point = PointSpec::lazy(rng.gen(), Arc::clone(sigma));
    FinitisticProfile::new(HybridMeasure::new(head, point))
}

/// `E_{(n,j)⊗π}[u] = π_n({j})`.
pub fn naming_payoff(profile: Profile<'_>, action: (usize, usize)) -> f64 {
    let (n, j) = action;
    match profile {
        Profile::Product(sigma) => sigma.coordinate(n).weight(j),
        Profile::Finitistic(p) => match p.hybrid().assignment(n) {
            Assignment::Measure(m) => m.weight(j),
            a @ Assignment::Dirac(_) => a.weight(j),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cylinder, SymbolSequence};

    fn coord(f: impl Fn(usize) -> f64) -> TailFunction {
        TailFunction::cylinder(Cylinder::from_fn(vec![2], |p| f(p[0])))
    }

    fn matching_pennies() -> GameSpec {
        GameSpec::new(
            vec!["a".into(), "b".into()],
            vec![coord(|s| s as f64), coord(|s| 1.0 - s as f64)],
        )
        .unwrap()
    }

    fn uniform() -> ProductMeasure {
        ProductMeasure::iid(CoordinateMeasure::uniform(2))
    }

    #[test]
    fn best_response_examples() {
        let opts = ExpectOptions::default();
        let br = best_response_value(&matching_pennies(), &uniform(), &opts).unwrap();
        assert_eq!(br.value, Interval::point(0.5));
        assert_eq!(br.argmax, 0);

        let naming = GameSpec::new(
            vec!["(1,0)".into(), "(1,1)".into()],
            vec![
                coord(|s| (s == 0) as u8 as f64),
                coord(|s| (s == 1) as u8 as f64),
            ],
        )
        .unwrap();
        let br = best_response_value(&naming, &uniform(), &opts).unwrap();
        assert_eq!(br.per_action, vec![Interval::point(0.5); 2]);
        assert_eq!(br.argmax, 0);

        let dirac = HybridMeasure::dirac(PointSpec::constant(1));
        let br = best_response_value(&matching_pennies(), &dirac, &opts).unwrap();
        assert_eq!(br.value, Interval::point(1.0));
        assert_eq!(br.argmax, 0);
    }

    #[test]
    fn purify_matching_pennies() {
        let sigma = Arc::new(uniform());
        let cfg = PurifyConfig {
            epsilon: 0.1,
            n_max: 10,
            seed: 5,
            retries: 3,
        };
        let p = purify(&matching_pennies(), &sigma, cfg, &ExpectOptions::default()).unwrap();
        assert_eq!(p.n, 2);
        assert_eq!(p.purified_value, Interval::point(0.5));
        assert!(p.guarantee_holds());
    }

    #[test]
    fn wide_epsilon_purifies_to_dirac() {
        let sigma = Arc::new(uniform());
        let cfg = PurifyConfig {
            epsilon: 1.0,
            n_max: 10,
            seed: 5,
            retries: 1,
        };
        let p = purify(&matching_pennies(), &sigma, cfg, &ExpectOptions::default()).unwrap();
        assert_eq!(p.n, 1);
        assert_eq!(p.profile.switch_index(), 1);
    }

    #[test]
    fn purify_product_payoffs_at_all_ones() {
        let prod = |neg: bool| {
            TailFunction::cylinder(Cylinder::from_fn(vec![2, 2], move |p| {
                let v = (p[0] * p[1]) as f64;
                if neg {
                    1.0 - v
                } else {
                    v
                }
            }))
        };
        let game =
            GameSpec::new(vec!["a".into(), "b".into()], vec![prod(false), prod(true)]).unwrap();
        let p = purify_at(
            &game,
            &uniform(),
            &PointSpec::constant(1),
            0.3,
            10,
            &ExpectOptions::default(),
        )
        .unwrap();
        assert_eq!(p.n, 2);
        assert_eq!(p.actions[0].purified, Interval::point(0.5));
        assert_eq!(p.actions[1].purified, Interval::point(0.5));
        assert_eq!(p.mixed_value, Interval::point(0.75));
        assert!(p.guarantee_holds());
    }

    #[test]
    fn naming_values() {
        assert_eq!(naming_game_value(&uniform()).unwrap().value, 0.5);
        let mut head = vec![CoordinateMeasure::uniform(2); 2];
        head.push(CoordinateMeasure::bernoulli(0.9).unwrap());
        let sigma = ProductMeasure::new(head, MeasureTail::Constant(CoordinateMeasure::uniform(2)))
            .unwrap();
        let v = naming_game_value(&sigma).unwrap();
        assert_eq!((v.value, v.attained_at), (0.9, Some((3, 1))));
        let dirac = ProductMeasure::iid(CoordinateMeasure::dirac(2, 0));
        assert_eq!(naming_game_value(&dirac).unwrap().value, 1.0);
        assert_eq!(
            naming_game_value(&ProductMeasure::geometric_bernoulli())
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn naming_exploits() {
        let all_dirac = FinitisticProfile::new(HybridMeasure::dirac(PointSpec::described(
            SymbolSequence::with_head(vec![0, 1, 0], 0),
        )));
        assert_eq!(
            naming_game_exploit(Profile::Finitistic(&all_dirac)).unwrap(),
            (1, 0)
        );

        let mixed_head = FinitisticProfile::new(HybridMeasure::switch_at(
            &uniform(),
            &PointSpec::constant(0),
            6,
        ));
        let action = naming_game_exploit(Profile::Finitistic(&mixed_head)).unwrap();
        assert_eq!(action, (6, 0));
        assert_eq!(naming_payoff(Profile::Finitistic(&mixed_head), action), 1.0);

        assert_eq!(
            naming_game_exploit(Profile::Product(&uniform())),
            Err(GameError::NotFinitistic)
        );

        let eventually = ProductMeasure::new(
            vec![
                CoordinateMeasure::uniform(2),
                CoordinateMeasure::dirac(2, 1),
            ],
            MeasureTail::Constant(CoordinateMeasure::dirac(2, 0)),
        )
        .unwrap();
        assert_eq!(
            naming_game_exploit(Profile::Product(&eventually)).unwrap(),
            (2, 1)
        );
    }
}
