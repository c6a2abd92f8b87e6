//! Certified expectations of tail-structured functions under countable
//! product measures, together with the point-approximation procedures built
//! on them: reverse-martingale search for strong ε-approximations,
//! single-coordinate mixing for weak 0-approximations, and finitistic
//! purification of minmax profiles.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exact;
pub mod expectation;
pub mod games;
pub mod harness;
pub mod interval;
pub mod martingale;
pub mod model;
pub mod scenario;
pub mod seeds;
pub mod tail_class;
