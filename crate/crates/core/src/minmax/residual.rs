use rand::Rng as _;

use crate::error::Result;
use crate::rng::stream;
use crate::scalar::{negative_part_norm, Scalar};

use super::lagrangian_grads;
use super::problem::{ConstraintSample, CoupledMinMaxProblem, ObjectiveSample};
use super::schedule::LrSchedule;
use super::solver::{exact_lagrangian, sgda_inner, LambdaCap, SolverConfig};

/// Stream reserved for "noise-free" evaluation of problems without an exact mode.
const EVAL_SEED: u64 = 0x5EED_0E7A_1000_0001;

/// Noise-free oracle values, falling back to a fixed reserved draw.
pub fn noise_free<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y: &[T],
) -> Result<(ObjectiveSample<T>, ConstraintSample<T>)> {
    match (
        problem.exact_objective(x, y),
        problem.exact_constraints(x, y),
    ) {
        (Some(o), Some(c)) => Ok((o, c)),
        _ => problem.sample(x, y, &mut stream(EVAL_SEED, 0)),
    }
}

const ASCENT_ITERS: usize = 400;
const GRID_POINTS: usize = 201;

/// `max_{y'} L(y', λ; x)` by grid search (one-dimensional boxed `y`) followed
/// by projected gradient ascent from the best candidate and from `start`.
pub fn maximize_lagrangian<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    lambda: &[T],
    start: &[T],
) -> Result<(Vec<T>, T)> {
    let mut starts = vec![start.to_vec()];
    if let Some(b) = problem.y_box() {
        if b.dim() == 1 {
            let mut best: Option<(Vec<T>, T)> = None;
            for i in 0..GRID_POINTS {
                let s = T::lit(i as f64 / (GRID_POINTS - 1) as f64);
                let y = vec![b.lo[0] + s * (b.hi[0] - b.lo[0])];
                let v = exact_lagrangian(problem, x, &y, lambda)?;
                if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                    best = Some((y, v));
                }
            }
            starts.push(best.expect("grid is non-empty").0);
        } else {
            starts.push(b.center());
        }
    }
    let step = problem
        .metadata()
        .smoothness
        .map(|l| T::one() / l.max(T::one()))
        .unwrap_or_else(|| T::lit(0.5));
    let mut best_y = start.to_vec();
    problem.project_y(&mut best_y);
    let mut best_v = exact_lagrangian(problem, x, &best_y, lambda)?;
    for s in starts {
        let mut y = s;
        problem.project_y(&mut y);
        for _ in 0..ASCENT_ITERS {
            let (obj, con) = noise_free(problem, x, &y)?;
            let v = super::lagrangian_value(obj.value, &con.values, lambda)?;
            if v > best_v {
                best_v = v;
                best_y = y.clone();
            }
            let g = lagrangian_grads(&obj, &con, lambda)?;
            for (a, &d) in y.iter_mut().zip(&g.grad_y) {
                *a += step * d;
            }
            problem.project_y(&mut y);
        }
        let v = exact_lagrangian(problem, x, &y, lambda)?;
        if v > best_v {
            best_v = v;
            best_y = y;
        }
    }
    Ok((best_y, best_v))
}

/// `max_{y'} L(y', λ; x) − min_{λ' ∈ [0, cap]^K} L(y, λ'; x)`.
pub fn saddle_residual<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y: &[T],
    lambda: &[T],
    cap: T,
) -> Result<T> {
    let (_, upper) = maximize_lagrangian(problem, x, lambda, y)?;
    let (obj, con) = noise_free(problem, x, y)?;
    let lower = obj.value + cap * con.values.iter().map(|&g| g.min(T::zero())).sum::<T>();
    Ok((upper - lower).max(T::zero()))
}

/// Settings for [`se_residual`].
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualConfig {
    /// Grid points per dimension (`dim_x ≤ 2`) or number of random probes.
    pub eval_budget: usize,
    pub seed: u64,
    pub lambda_cap: f64,
    /// Inner steps per probe when no analytic best response exists.
    pub oracle_iters: usize,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            eval_budget: 101,
            seed: 0,
            lambda_cap: 10.0,
            oracle_iters: 2000,
        }
    }
}

/// `(ε, δ)` certificate of a candidate Stackelberg equilibrium.
#[derive(Clone, Debug, PartialEq)]
pub struct SeResidual<T> {
    pub epsilon: T,
    pub delta: T,
    pub probes: usize,
    pub marginal: T,
    pub marginal_min: T,
}

/// Marginal value `V(x) = max_{y : g(x,y) ≥ 0} f(x, y)`, exact when the
/// problem knows its best response and estimated by a Lagrangian saddle
/// search otherwise.
pub fn marginal_value<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    cfg: &ResidualConfig,
) -> Result<T> {
    if let Some((y, _)) = problem.best_response(x) {
        return Ok(noise_free(problem, x, &y)?.0.value);
    }
    let solver = SolverConfig {
        outer_iters: 1,
        inner_iters: cfg.oracle_iters,
        lr_outer: LrSchedule::InvSqrt,
        lr_inner: LrSchedule::InvSqrt,
        lambda_cap: LambdaCap::Fixed(cfg.lambda_cap),
        seed: cfg.seed,
        target_delta: 0.0,
        ..SolverConfig::default()
    };
    let cap = T::lit(cfg.lambda_cap);
    let lambda0 = vec![T::zero(); problem.num_constraints()];
    let (y, lambda, _) = sgda_inner(
        problem,
        x,
        &problem.initial_y(),
        &lambda0,
        cap,
        cfg.oracle_iters,
        &solver,
        0,
    )?;
    Ok(maximize_lagrangian(problem, x, &lambda, &y)?.1)
}

fn probe_points<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    cfg: &ResidualConfig,
) -> Vec<Vec<T>> {
    let n = cfg.eval_budget.max(2);
    let dim = problem.dim_x();
    let bounds = problem.x_box();
    match bounds {
        Some(b) if dim <= 2 => {
            let axis = |d: usize, i: usize| {
                b.lo[d] + T::lit(i as f64 / (n - 1) as f64) * (b.hi[d] - b.lo[d])
            };
            if dim == 1 {
                (0..n).map(|i| vec![axis(0, i)]).collect()
            } else {
                (0..n * n)
                    .map(|k| vec![axis(0, k / n), axis(1, k % n)])
                    .collect()
            }
        }
        _ => {
            let mut rng = stream(cfg.seed, u64::MAX);
            (0..n)
                .map(|_| {
                    let mut p: Vec<T> = (0..dim)
                        .map(|d| {
                            let u = T::lit(rng.gen::<f64>());
                            match &bounds {
                                Some(b) => b.lo[d] + u * (b.hi[d] - b.lo[d]),
                                None => x[d] + T::lit(2.0) * u - T::one(),
                            }
                        })
                        .collect();
                    problem.project_x(&mut p);
                    p
                })
                .collect()
        }
    }
}

/// `δ = ‖min(g(x, y), 0)‖` and
/// `ε = max(0, V(x) − f(x, y), V(x) − min_probes V)`.
pub fn se_residual<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y: &[T],
    cfg: &ResidualConfig,
) -> Result<SeResidual<T>> {
    let (obj, con) = noise_free(problem, x, y)?;
    let delta = negative_part_norm(&con.values);
    let v = marginal_value(problem, x, cfg)?;
    let probes = probe_points(problem, x, cfg);
    let mut v_min = v;
    for p in &probes {
        v_min = v_min.min(marginal_value(problem, p, cfg)?);
    }
    let epsilon = (v - obj.value).max(v - v_min).max(T::zero());
    Ok(SeResidual {
        epsilon,
        delta,
        probes: probes.len(),
        marginal: v,
        marginal_min: v_min,
    })
}
