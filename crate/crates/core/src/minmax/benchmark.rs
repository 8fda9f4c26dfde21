use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::problem::{
    perturb, BoxSet, ConstraintSample, CoupledMinMaxProblem, ObjectiveSample, ProblemMetadata,
};

/// `min_{x ∈ [0,1]} max_{y ∈ [0,1] : 1 − x − y ≥ 0} x² + y`.
///
/// The follower best response is `y*(x) = 1 − x` with multiplier `1`, so the
/// marginal is `V(x) = x² + 1 − x`, minimized at `x* = 0.5` with `V* = 0.75`.
/// Every oracle output carries independent `N(0, σ²)` noise.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticBenchmark<T> {
    pub sigma: T,
}

impl<T: Scalar> QuadraticBenchmark<T> {
    pub fn new(sigma: T) -> Self {
        Self { sigma }
    }

    /// `V(x) = x² + 1 − x`.
    pub fn marginal(x: T) -> T {
        x * x + T::one() - x
    }

    fn objective(x: &[T], y: &[T]) -> ObjectiveSample<T> {
        ObjectiveSample {
            value: x[0] * x[0] + y[0],
            grad_x: vec![T::lit(2.0) * x[0]],
            grad_y: vec![T::one()],
        }
    }

    fn constraints(x: &[T], y: &[T]) -> ConstraintSample<T> {
        ConstraintSample {
            values: vec![T::one() - x[0] - y[0]],
            jac_x: vec![vec![-T::one()]],
            jac_y: vec![vec![-T::one()]],
        }
    }
}

/// Noise-free instance of [`QuadraticBenchmark`].
pub fn benchmark_quadratic<T: Scalar>() -> QuadraticBenchmark<T> {
    QuadraticBenchmark::new(T::zero())
}

/// `quadratic` or `quadratic-noisy:<σ>`.
pub fn benchmark_by_name<T: Scalar>(name: &str) -> Result<QuadraticBenchmark<T>> {
    if name == "quadratic" {
        return Ok(benchmark_quadratic());
    }
    if let Some(s) = name.strip_prefix("quadratic-noisy:") {
        let sigma: f64 = s
            .parse()
            .map_err(|_| Error::Config(format!("bad noise level in `{name}`")))?;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise level must be nonnegative in `{name}`"
            )));
        }
        return Ok(QuadraticBenchmark::new(T::lit(sigma)));
    }
    Err(Error::Config(format!("unknown problem `{name}`")))
}

impl<T: Scalar> CoupledMinMaxProblem<T> for QuadraticBenchmark<T> {
    fn dim_x(&self) -> usize {
        1
    }

    fn dim_y(&self) -> usize {
        1
    }

    fn num_constraints(&self) -> usize {
        1
    }

    fn sample_objective(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ObjectiveSample<T>> {
        let mut s = Self::objective(x, y);
        let mut v = [s.value, s.grad_x[0], s.grad_y[0]];
        perturb(&mut v, self.sigma, rng);
        s.value = v[0];
        s.grad_x[0] = v[1];
        s.grad_y[0] = v[2];
        Ok(s)
    }

    fn sample_constraints(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ConstraintSample<T>> {
        let mut s = Self::constraints(x, y);
        let mut v = [s.values[0], s.jac_x[0][0], s.jac_y[0][0]];
        perturb(&mut v, self.sigma, rng);
        s.values[0] = v[0];
        s.jac_x[0][0] = v[1];
        s.jac_y[0][0] = v[2];
        Ok(s)
    }

    fn x_box(&self) -> Option<BoxSet<T>> {
        Some(BoxSet::cube(1, T::zero(), T::one()))
    }

    fn y_box(&self) -> Option<BoxSet<T>> {
        Some(BoxSet::cube(1, T::zero(), T::one()))
    }

    fn metadata(&self) -> ProblemMetadata<T> {
        let s = self.sigma;
        ProblemMetadata {
            // spectral norm of the Lagrangian Hessian in (x, y, λ) is ≈ 2.48
            smoothness: Some(T::lit(2.5)),
            strong_convexity_x: Some(T::lit(2.0)),
            variance: Some((s, s, s)),
        }
    }

    fn exact_objective(&self, x: &[T], y: &[T]) -> Option<ObjectiveSample<T>> {
        Some(Self::objective(x, y))
    }

    fn exact_constraints(&self, x: &[T], y: &[T]) -> Option<ConstraintSample<T>> {
        Some(Self::constraints(x, y))
    }

    fn best_response(&self, x: &[T]) -> Option<(Vec<T>, Vec<T>)> {
        let x = x[0].max(T::zero()).min(T::one());
        Some((vec![T::one() - x], vec![T::one()]))
    }
}
