//! Nested stochastic gradient descent ascent for min-max problems with
//! coupled constraints, its policy-gradient form for zero-sum Markov
//! Stackelberg games, and a reach-avoid pursuit testbed with evaluation tools.
//!
//! The optimization core in [`minmax`], the LP verifier and the car dynamics
//! are generic over [`Scalar`]; the game, training and evaluation layers work
//! in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::result_large_err)]

pub mod algos;
pub mod dual;
pub mod error;
pub mod eval;
pub mod mdpgame;
pub mod minmax;
pub mod reachavoid;
pub mod rng;
pub mod scalar;

pub use dual::Dual;
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Benchmark instance in double precision.
pub type Quadratic = minmax::QuadraticBenchmark<f64>;
/// Benchmark instance in single precision.
pub type Quadratic32 = minmax::QuadraticBenchmark<f32>;
pub type IterateLog = minmax::IterateLog<f64>;
pub type SaddleState = minmax::SaddleState<f64>;
