//! Scalar abstraction shared by the solver, the LP verifier and the car kinematics.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the generic parts of the crate: `f32`, `f64` and
/// the forward-mode [`Dual`](crate::dual::Dual) numbers used for Jacobians.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
{
    /// Lossless-enough conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion from f64")
    }

    /// Plain value of the scalar (drops tangents for dual numbers).
    fn value(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

/// Euclidean norm of the negative parts, `‖min(v, 0)‖`.
pub fn negative_part_norm<T: Scalar>(v: &[T]) -> T {
    v.iter()
        .map(|&g| g.min(T::zero()))
        .map(|g| g * g)
        .sum::<T>()
        .sqrt()
}

pub(crate) fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}
