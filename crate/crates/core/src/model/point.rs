use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::measure::ProductMeasure;
use super::space::SpaceFamily;
use super::ModelError;

/// Symbols past an explicit head, described finitely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolTail {
    Constant(usize),
    /// Coordinate `T + 1 + k` takes entry `k mod len`.
    Periodic(Vec<usize>),
}

impl SymbolTail {
    fn at_offset(&self, offset: usize) -> usize {
        match self {
            SymbolTail::Constant(s) => *s,
            SymbolTail::Periodic(list) => list[offset % list.len()],
        }
    }

    pub fn period(&self) -> usize {
        match self {
            SymbolTail::Constant(_) => 1,
            SymbolTail::Periodic(list) => list.len(),
        }
    }
}

/// An eventually periodic symbol sequence: explicit head plus a tail rule.
///
/// Used both for described points and for per-coordinate targets of
/// indicator functions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSequence {
    head: Vec<usize>,
    tail: SymbolTail,
}

impl SymbolSequence {
    pub fn new(head: Vec<usize>, tail: SymbolTail) -> Result<Self, ModelError> {
        if let SymbolTail::Periodic(list) = &tail {
            if list.is_empty() {
                return Err(ModelError::EmptyPeriod);
            }
        }
        Ok(SymbolSequence { head, tail })
    }

    pub fn constant(sym: usize) -> Self {
        SymbolSequence {
            head: Vec::new(),
            tail: SymbolTail::Constant(sym),
        }
    }

    pub fn with_head(head: Vec<usize>, tail_sym: usize) -> Self {
        SymbolSequence {
            head,
            tail: SymbolTail::Constant(tail_sym),
        }
    }

    pub fn at(&self, i: usize) -> usize {
        assert!(i >= 1, "coordinates are 1-based");
        match self.head.get(i - 1) {
            Some(&s) => s,
            None => self.tail.at_offset(i - self.head.len() - 1),
        }
    }

    pub fn head(&self) -> &[usize] {
        &self.head
    }

    pub fn head_len(&self) -> usize {
        self.head.len()
    }

    pub fn tail(&self) -> &SymbolTail {
        &self.tail
    }

    pub fn period(&self) -> usize {
        self.tail.period()
    }

    pub fn validate_against(&self, spaces: &SpaceFamily) -> Result<(), ModelError> {
        let check_to = self.head.len().max(spaces.head_len()) + self.period() + 1;
        for i in 1..=check_to {
            let sym = self.at(i);
            if sym >= spaces.arity(i) {
                return Err(ModelError::SymbolOutOfRange {
                    coordinate: i,
                    symbol: sym,
                    arity: spaces.arity(i),
                });
            }
        }
        Ok(())
    }
}

/// A point sampled from a product measure, realized coordinate by coordinate.
///
/// Coordinate `i` is a pure function of `(seed, i)`: it is drawn from `σ_i` with
/// the ChaCha8 stream number `i` under `seed`. The cache only memoizes; the
/// realization order never changes a value.
#[derive(Debug, Clone)]
pub struct LazyPoint {
    seed: u64,
    measure: Arc<ProductMeasure>,
    cache: Arc<RwLock<Vec<usize>>>,
}

impl LazyPoint {
    pub fn new(seed: u64, measure: Arc<ProductMeasure>) -> Self {
        LazyPoint {
            seed,
            measure,
            cache: Arc::new(RwLock::new(Vec::new())),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    fn draw(&self, i: usize) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let u: f64 = rng.gen();
        self.measure.coordinate(i).draw(u)
    }

    pub fn coordinate(&self, i: usize) -> usize {
        assert!(i >= 1, "coordinates are 1-based");
        {
            let cache = self.cache.read().expect("lazy point cache poisoned");
            if let Some(&s) = cache.get(i - 1) {
                return s;
            }
        }
        let mut cache = self.cache.write().expect("lazy point cache poisoned");
        while cache.len() < i {
            let next = cache.len() + 1;
            let s = self.draw(next);
            cache.push(s);
        }
        cache[i - 1]
    }

    pub fn realized_len(&self) -> usize {
        self.cache.read().expect("lazy point cache poisoned").len()
    }

    /// Symbols `1..=n`.
    pub fn prefix(&self, n: usize) -> Vec<usize> {
        if n > 0 {
            self.coordinate(n);
        }
        self.cache.read().expect("lazy point cache poisoned")[..n].to_vec()
    }
}

impl PartialEq for LazyPoint {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
            && (Arc::ptr_eq(&self.measure, &other.measure) || self.measure == other.measure)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointBase {
    Described(SymbolSequence),
    Lazy(LazyPoint),
}

/// A point of the product space: optional overrides on coordinates
/// `1..=prefix.len()` on top of a described or lazily sampled base.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSpec {
    prefix: Vec<usize>,
    base: PointBase,
}

impl PointSpec {
    pub fn described(seq: SymbolSequence) -> Self {
        PointSpec {
            prefix: Vec::new(),
            base: PointBase::Described(seq),
        }
    }

    pub fn constant(sym: usize) -> Self {
        PointSpec::described(SymbolSequence::constant(sym))
    }

    pub fn lazy(seed: u64, measure: Arc<ProductMeasure>) -> Self {
        PointSpec {
            prefix: Vec::new(),
            base: PointBase::Lazy(LazyPoint::new(seed, measure)),
        }
    }

    pub fn base(&self) -> &PointBase {
        &self.base
    }

    pub fn overrides(&self) -> &[usize] {
        &self.prefix
    }

    pub fn is_lazy(&self) -> bool {
        matches!(self.base, PointBase::Lazy(_))
    }

    pub fn coordinate(&self, i: usize) -> usize {
        assert!(i >= 1, "coordinates are 1-based");
        if let Some(&s) = self.prefix.get(i - 1) {
            return s;
        }
        match &self.base {
            PointBase::Described(seq) => seq.at(i),
            PointBase::Lazy(lazy) => lazy.coordinate(i),
        }
    }

    /// Coordinate `i` if it is known without realizing a lazy base past `horizon`.
    pub fn known_coordinate(&self, i: usize, horizon: usize) -> Option<usize> {
        if i <= self.prefix.len() {
            return Some(self.prefix[i - 1]);
        }
        match &self.base {
            PointBase::Described(seq) => Some(seq.at(i)),
            PointBase::Lazy(lazy) if i <= horizon => Some(lazy.coordinate(i)),
            PointBase::Lazy(_) => None,
        }
    }

    /// `(from, period)` such that coordinates `≥ from` repeat with `period`;
    /// `None` for lazily sampled bases.
    pub fn periodic_from(&self) -> Option<(usize, usize)> {
        match &self.base {
            PointBase::Described(seq) => {
                Some((self.prefix.len().max(seq.head_len()) + 1, seq.period()))
            }
            PointBase::Lazy(_) => None,
        }
    }

    /// Same base with coordinates `1..=head.len()` replaced by `head`.
    pub fn with_prefix(&self, head: Vec<usize>) -> PointSpec {
        let mut prefix = head;
        if self.prefix.len() > prefix.len() {
            prefix.extend_from_slice(&self.prefix[prefix.len()..]);
        }
        PointSpec {
            prefix,
            base: self.base.clone(),
        }
    }

    /// Same point with coordinate `i` set to `sym`.
    pub fn modified(&self, i: usize, sym: usize) -> PointSpec {
        let mut head: Vec<usize> = (1..=i.max(self.prefix.len()))
            .map(|j| self.coordinate(j))
            .collect();
        head[i - 1] = sym;
        PointSpec {
            prefix: head,
            base: self.base.clone(),
        }
    }

    /// Symbols `1..=n`.
    pub fn head(&self, n: usize) -> Vec<usize> {
        (1..=n).map(|i| self.coordinate(i)).collect()
    }

    /// An index `n` with `self_i = other_i` for all `i > n`, when it can be
    /// read off the representation: a shared base, or two eventually periodic
    /// points whose tails coincide over one common period.
    pub fn agreement_index(&self, other: &PointSpec) -> Option<usize> {
        if self.base == other.base {
            return Some(self.prefix.len().max(other.prefix.len()));
        }
        let (a, p) = self.periodic_from()?;
        let (b, q) = other.periodic_from()?;
        let start = a.max(b);
        let span = p / gcd(p, q) * q;
        (start..start + span)
            .all(|i| self.coordinate(i) == other.coordinate(i))
            .then_some(start - 1)
    }

    pub fn validate_against(&self, spaces: &SpaceFamily) -> Result<(), ModelError> {
        for (k, &s) in self.prefix.iter().enumerate() {
            if s >= spaces.arity(k + 1) {
                return Err(ModelError::SymbolOutOfRange {
                    coordinate: k + 1,
                    symbol: s,
                    arity: spaces.arity(k + 1),
                });
            }
        }
        match &self.base {
            PointBase::Described(seq) => seq.validate_against(spaces),
            PointBase::Lazy(lazy) => lazy.measure().validate_against(spaces),
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
