use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// One draw of the objective oracle at `(x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSample<T> {
    pub value: T,
    pub grad_x: Vec<T>,
    pub grad_y: Vec<T>,
}

/// One draw of the constraint oracle: `K` values and their Jacobians
/// (`jac_x[k]` is the gradient of `g_k` in `x`).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSample<T> {
    pub values: Vec<T>,
    pub jac_x: Vec<Vec<T>>,
    pub jac_y: Vec<Vec<T>>,
}

impl<T: Scalar> ConstraintSample<T> {
    pub fn empty() -> Self {
        Self {
            values: Vec::new(),
            jac_x: Vec::new(),
            jac_y: Vec::new(),
        }
    }
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
}

impl<T: Scalar> BoxSet<T> {
    pub fn new(lo: Vec<T>, hi: Vec<T>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bounds must have equal length");
        Self { lo, hi }
    }

    pub fn cube(dim: usize, lo: T, hi: T) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn project(&self, v: &mut [T]) {
        for ((x, &lo), &hi) in v.iter_mut().zip(&self.lo).zip(&self.hi) {
            *x = x.max(lo).min(hi);
        }
    }

    pub fn contains(&self, v: &[T]) -> bool {
        v.iter()
            .zip(&self.lo)
            .zip(&self.hi)
            .all(|((&x, &lo), &hi)| x >= lo && x <= hi)
    }

    pub fn center(&self) -> Vec<T> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| (l + h) / T::lit(2.0))
            .collect()
    }
}

/// Optional structural constants of a problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemMetadata<T> {
    /// Lipschitz constant of the Lagrangian gradient.
    pub smoothness: Option<T>,
    /// Strong-convexity modulus of the objective in `x`.
    pub strong_convexity_x: Option<T>,
    /// Variance bounds `(σ_g, σ_∇f, σ_∇g)`.
    pub variance: Option<(T, T, T)>,
}

/// Stochastic min-max problem `min_x max_{y : g(x, y) ≥ 0} f(x, y)` accessed
/// through an unbiased first-order oracle.
pub trait CoupledMinMaxProblem<T: Scalar>: Sync {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn num_constraints(&self) -> usize;

    fn sample_objective(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ObjectiveSample<T>>;
    fn sample_constraints(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ConstraintSample<T>>;

    /// Joint draw of both oracles. Problems whose objective and constraints
    /// come from the same simulation (e.g. trajectory batches) override this.
    fn sample(
        &self,
        x: &[T],
        y: &[T],
        rng: &mut Rng,
    ) -> Result<(ObjectiveSample<T>, ConstraintSample<T>)> {
        let obj = self.sample_objective(x, y, rng)?;
        let con = self.sample_constraints(x, y, rng)?;
        Ok((obj, con))
    }

    /// Constraint values of the draw that `sample` would make with `rng`.
    fn sample_constraint_values(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<Vec<T>> {
        Ok(self.sample(x, y, rng)?.1.values)
    }

    fn x_box(&self) -> Option<BoxSet<T>> {
        None
    }

    fn y_box(&self) -> Option<BoxSet<T>> {
        None
    }

    fn project_x(&self, x: &mut [T]) {
        if let Some(b) = self.x_box() {
            b.project(x);
        }
    }

    fn project_y(&self, y: &mut [T]) {
        if let Some(b) = self.y_box() {
            b.project(y);
        }
    }

    fn initial_x(&self) -> Vec<T> {
        let mut x = vec![T::zero(); self.dim_x()];
        self.project_x(&mut x);
        x
    }

    fn initial_y(&self) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim_y()];
        self.project_y(&mut y);
        y
    }

    fn metadata(&self) -> ProblemMetadata<T> {
        ProblemMetadata::default()
    }

    /// Noise-free objective, when the problem has one.
    fn exact_objective(&self, _x: &[T], _y: &[T]) -> Option<ObjectiveSample<T>> {
        None
    }

    /// Noise-free constraints, when the problem has one.
    fn exact_constraints(&self, _x: &[T], _y: &[T]) -> Option<ConstraintSample<T>> {
        None
    }

    /// Analytic follower best response and KKT multiplier at `x`.
    fn best_response(&self, _x: &[T]) -> Option<(Vec<T>, Vec<T>)> {
        None
    }
}

type ObjectiveFn<T> = Box<dyn Fn(&[T], &[T]) -> ObjectiveSample<T> + Send + Sync>;
type ConstraintFn<T> = Box<dyn Fn(&[T], &[T]) -> ConstraintSample<T> + Send + Sync>;
type ResponseFn<T> = Box<dyn Fn(&[T]) -> (Vec<T>, Vec<T>) + Send + Sync>;

/// Problem assembled from deterministic closures, with optional additive
/// Gaussian noise on every oracle output.
pub struct ClosureProblem<T: Scalar> {
    dim_x: usize,
    dim_y: usize,
    num_constraints: usize,
    objective: ObjectiveFn<T>,
    constraints: ConstraintFn<T>,
    best_response: Option<ResponseFn<T>>,
    x_box: Option<BoxSet<T>>,
    y_box: Option<BoxSet<T>>,
    noise: T,
    metadata: ProblemMetadata<T>,
}

impl<T: Scalar> ClosureProblem<T> {
    pub fn new(
        dim_x: usize,
        dim_y: usize,
        num_constraints: usize,
        objective: impl Fn(&[T], &[T]) -> ObjectiveSample<T> + Send + Sync + 'static,
        constraints: impl Fn(&[T], &[T]) -> ConstraintSample<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim_x,
            dim_y,
            num_constraints,
            objective: Box::new(objective),
            constraints: Box::new(constraints),
            best_response: None,
            x_box: None,
            y_box: None,
            noise: T::zero(),
            metadata: ProblemMetadata::default(),
        }
    }

    pub fn with_boxes(mut self, x_box: Option<BoxSet<T>>, y_box: Option<BoxSet<T>>) -> Self {
        self.x_box = x_box;
        self.y_box = y_box;
        self
    }

    pub fn with_noise(mut self, sigma: T) -> Self {
        self.noise = sigma;
        self
    }

    pub fn with_metadata(mut self, metadata: ProblemMetadata<T>) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_best_response(
        mut self,
        br: impl Fn(&[T]) -> (Vec<T>, Vec<T>) + Send + Sync + 'static,
    ) -> Self {
        self.best_response = Some(Box::new(br));
        self
    }
}

pub(crate) fn perturb<T: Scalar>(v: &mut [T], sigma: T, rng: &mut Rng) {
    if sigma == T::zero() {
        return;
    }
    for x in v {
        let z: f64 = StandardNormal.sample(rng);
        *x += sigma * T::lit(z);
    }
}

impl<T: Scalar> CoupledMinMaxProblem<T> for ClosureProblem<T> {
    fn dim_x(&self) -> usize {
        self.dim_x
    }

    fn dim_y(&self) -> usize {
        self.dim_y
    }

    fn num_constraints(&self) -> usize {
        self.num_constraints
    }

    fn sample_objective(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ObjectiveSample<T>> {
        let mut s = (self.objective)(x, y);
        let mut v = [s.value];
        perturb(&mut v, self.noise, rng);
        s.value = v[0];
        perturb(&mut s.grad_x, self.noise, rng);
        perturb(&mut s.grad_y, self.noise, rng);
        Ok(s)
    }

    fn sample_constraints(&self, x: &[T], y: &[T], rng: &mut Rng) -> Result<ConstraintSample<T>> {
        let mut s = (self.constraints)(x, y);
        perturb(&mut s.values, self.noise, rng);
        for row in s.jac_x.iter_mut().chain(s.jac_y.iter_mut()) {
            perturb(row, self.noise, rng);
        }
        Ok(s)
    }

    fn x_box(&self) -> Option<BoxSet<T>> {
        self.x_box.clone()
    }

    fn y_box(&self) -> Option<BoxSet<T>> {
        self.y_box.clone()
    }

    fn metadata(&self) -> ProblemMetadata<T> {
        self.metadata.clone()
    }

    fn exact_objective(&self, x: &[T], y: &[T]) -> Option<ObjectiveSample<T>> {
        Some((self.objective)(x, y))
    }

    fn exact_constraints(&self, x: &[T], y: &[T]) -> Option<ConstraintSample<T>> {
        Some((self.constraints)(x, y))
    }

    fn best_response(&self, x: &[T]) -> Option<(Vec<T>, Vec<T>)> {
        self.best_response.as_ref().map(|br| br(x))
    }
}
