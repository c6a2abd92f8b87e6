//! Coordinate spaces, product measures, points and tail-structured functions.

mod function;
mod hybrid;
mod measure;
mod point;
mod space;

pub use function::{
    Bound, Cylinder, DiscountedSum, EvalPolicy, Evaluation, FunctionFamily, GeometricWeights,
    PartialPoint, ProductIndicator, ScoreTable, TailFunction,
};
pub use hybrid::{Assignment, HybridMeasure, MeasureRef};
pub use measure::{
    CoordinateMeasure, FormulaFamily, MeasureTail, ProductMeasure, WEIGHT_TOLERANCE,
};
pub use point::{LazyPoint, PointBase, PointSpec, SymbolSequence, SymbolTail};
pub use space::{CoordinateSpace, SpaceFamily};

pub(crate) use function::TailMatch;
pub(crate) use measure::lcm;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("coordinate indices start at 1")]
    ZeroIndex,
    #[error("coordinate {index} has no symbols")]
    EmptySpace { index: usize },
    #[error("coordinate {index} lists symbol {symbol:?} twice")]
    DuplicateSymbol { index: usize, symbol: String },
    #[error("space for coordinate {found} listed where coordinate {expected} was expected")]
    SpaceIndexMismatch { expected: usize, found: usize },
    #[error("empty probability vector")]
    EmptyWeights,
    #[error("symbol {symbol} has invalid weight {weight}")]
    NegativeWeight { symbol: usize, weight: f64 },
    #[error("weights sum to {sum}, not 1 (tolerance 1e-12)")]
    WeightSum { sum: f64 },
    #[error("periodic tail rule with no entries")]
    EmptyPeriod,
    #[error("formula family {family}: {detail}")]
    FormulaParameter {
        family: &'static str,
        detail: String,
    },
    #[error("coordinate {coordinate}: measure has {found} symbols, space has {expected}")]
    ArityMismatch {
        coordinate: usize,
        expected: usize,
        found: usize,
    },
    #[error("coordinate {coordinate}: symbol {symbol} outside a space of {arity} symbols")]
    SymbolOutOfRange {
        coordinate: usize,
        symbol: usize,
        arity: usize,
    },
    #[error("cylinder table has {found} entries, radices require {expected}")]
    TableShape { expected: usize, found: usize },
    #[error("non-finite function value")]
    NonFiniteValue,
    #[error("weights w_i = {scale}·{ratio}^i are not a summable nonnegative sequence")]
    BadWeights { scale: f64, ratio: f64 },
}
