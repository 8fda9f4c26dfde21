//! Stochastic min-max optimization with coupled constraints.
//!
//! The follower's constrained problem `max_{y : g(x, y) ≥ 0} f(x, y)` is
//! replaced by the saddle problem over `(y, λ)` of the Lagrangian
//! `L(y, λ; x) = f(x, y) + ⟨λ, g(x, y)⟩`, and the leader runs projected
//! stochastic descent on `x` using `∇ₓL` at an approximate saddle point.

mod benchmark;
mod cap;
mod log;
mod problem;
mod residual;
mod schedule;
mod solver;

pub use benchmark::{benchmark_by_name, benchmark_quadratic, QuadraticBenchmark};
pub use cap::{default_probes, default_slater_point, multiplier_cap, resolve_cap};
pub use log::{weighted_average, IterateLog, IterateRecord, SolutionDump, SCHEMA_VERSION};
pub use problem::{
    BoxSet, ClosureProblem, ConstraintSample, CoupledMinMaxProblem, ObjectiveSample,
    ProblemMetadata,
};
pub use residual::{
    marginal_value, maximize_lagrangian, noise_free, saddle_residual, se_residual, ResidualConfig,
    SeResidual,
};
pub use schedule::{lr_schedule, LrSchedule};
pub use solver::{
    nested_sgda, saddle_point_oracle, sgda_inner, simultaneous_sgda, Aborted, InnerLog, InnerMode,
    LambdaCap, OracleResult, SaddleState, Solver, SolverConfig, UpdateRule,
};

use crate::error::{check_len, Result};
use crate::scalar::{dot, Scalar};

/// `f + ⟨λ, g⟩`.
pub fn lagrangian_value<T: Scalar>(f_val: T, g_vals: &[T], lambda: &[T]) -> Result<T> {
    check_len("multipliers vs constraints", g_vals.len(), lambda.len())?;
    Ok(f_val + dot(lambda, g_vals))
}

/// Gradient blocks of the Lagrangian from one oracle draw.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianGrads<T> {
    pub grad_x: Vec<T>,
    pub grad_y: Vec<T>,
    pub grad_lambda: Vec<T>,
}

/// `(∇ₓf + Σ λₖ∇ₓgₖ, ∇ᵧf + Σ λₖ∇ᵧgₖ, g)`.
pub fn lagrangian_grads<T: Scalar>(
    obj: &ObjectiveSample<T>,
    con: &ConstraintSample<T>,
    lambda: &[T],
) -> Result<LagrangianGrads<T>> {
    let k = con.values.len();
    check_len("multipliers vs constraints", k, lambda.len())?;
    check_len("constraint x-jacobian rows", k, con.jac_x.len())?;
    check_len("constraint y-jacobian rows", k, con.jac_y.len())?;
    let mut grad_x = obj.grad_x.clone();
    let mut grad_y = obj.grad_y.clone();
    for ((&l, jx), jy) in lambda.iter().zip(&con.jac_x).zip(&con.jac_y) {
        check_len("constraint x-jacobian columns", grad_x.len(), jx.len())?;
        check_len("constraint y-jacobian columns", grad_y.len(), jy.len())?;
        for (g, &d) in grad_x.iter_mut().zip(jx) {
            *g += l * d;
        }
        for (g, &d) in grad_y.iter_mut().zip(jy) {
            *g += l * d;
        }
    }
    Ok(LagrangianGrads {
        grad_x,
        grad_y,
        grad_lambda: con.values.clone(),
    })
}
