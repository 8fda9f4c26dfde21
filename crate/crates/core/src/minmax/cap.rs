use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;

use super::problem::CoupledMinMaxProblem;
use super::residual::{maximize_lagrangian, noise_free};
use super::solver::LambdaCap;

/// Safety factor applied to the estimated bound in `auto` mode.
const AUTO_SAFETY: f64 = 2.0;
const AUTO_FLOOR: f64 = 1.0;

fn min_constraint<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y: &[T],
) -> Result<T> {
    let (_, con) = noise_free(problem, x, y)?;
    Ok(con.values.iter().copied().fold(T::infinity(), T::min))
}

/// Follower action maximizing `min_k g_k(x, ·)`: grid search for a boxed
/// scalar `y`, projected subgradient ascent otherwise. `None` unless the
/// point is strictly feasible.
pub fn default_slater_point<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
) -> Result<Option<Vec<T>>> {
    if problem.num_constraints() == 0 {
        return Ok(Some(problem.initial_y()));
    }
    let mut best = problem.initial_y();
    let mut best_g = min_constraint(problem, x, &best)?;
    let consider = |y: Vec<T>, best: &mut Vec<T>, best_g: &mut T| -> Result<()> {
        let g = min_constraint(problem, x, &y)?;
        if g > *best_g {
            *best_g = g;
            *best = y;
        }
        Ok(())
    };
    match problem.y_box() {
        Some(b) if b.dim() == 1 => {
            for i in 0..=100 {
                let s = T::lit(i as f64 / 100.0);
                consider(
                    vec![b.lo[0] + s * (b.hi[0] - b.lo[0])],
                    &mut best,
                    &mut best_g,
                )?;
            }
        }
        _ => {
            let mut y = best.clone();
            for it in 0..500 {
                let (_, con) = noise_free(problem, x, &y)?;
                let (k, _) =
                    con.values
                        .iter()
                        .enumerate()
                        .fold(
                            (0, T::infinity()),
                            |acc, (k, &g)| if g < acc.1 { (k, g) } else { acc },
                        );
                let step = T::lit(0.5 / (it as f64 + 1.0).sqrt());
                for (a, &d) in y.iter_mut().zip(&con.jac_y[k]) {
                    *a += step * d;
                }
                problem.project_y(&mut y);
                consider(y.clone(), &mut best, &mut best_g)?;
            }
        }
    }
    Ok((best_g > T::zero()).then_some(best))
}

/// Default leader probes: 11 points per axis of a boxed `x` with at most two
/// dimensions, 32 random points otherwise.
pub fn default_probes<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(problem: &P) -> Vec<Vec<T>> {
    let dim = problem.dim_x();
    match problem.x_box() {
        Some(b) if dim <= 2 => {
            let axis = |d: usize, i: usize| b.lo[d] + T::lit(i as f64 / 10.0) * (b.hi[d] - b.lo[d]);
            if dim == 1 {
                (0..=10).map(|i| vec![axis(0, i)]).collect()
            } else {
                (0..121)
                    .map(|k| vec![axis(0, k / 11), axis(1, k % 11)])
                    .collect()
            }
        }
        b => {
            let mut rng = stream(0, 0xCA9);
            let x0 = problem.initial_x();
            (0..32)
                .map(|_| {
                    let mut p: Vec<T> = (0..dim)
                        .map(|d| {
                            let u = T::lit(rng.gen::<f64>());
                            match &b {
                                Some(b) => b.lo[d] + u * (b.hi[d] - b.lo[d]),
                                None => x0[d] + T::lit(2.0) * u - T::one(),
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

/// Bound on optimal multipliers: the maximum over `probes` of
/// `(max_y f(x, y) − f(x, ŷ)) / min_k g_k(x, ŷ)` for a strictly feasible
/// `ŷ = slater(x)`, floored at `floor`. Probes without a Slater point are
/// skipped.
pub fn multiplier_cap<T, P, F>(problem: &P, slater: F, probes: &[Vec<T>], floor: T) -> Result<T>
where
    T: Scalar,
    P: CoupledMinMaxProblem<T> + ?Sized,
    F: Fn(&[T]) -> Result<Option<Vec<T>>>,
{
    let zero_lambda = vec![T::zero(); problem.num_constraints()];
    let mut bound: Option<T> = None;
    for x in probes {
        let Some(y_hat) = slater(x)? else { continue };
        let g_min = min_constraint(problem, x, &y_hat)?;
        if !(g_min > T::zero()) {
            continue;
        }
        let f_hat = noise_free(problem, x, &y_hat)?.0.value;
        let (_, f_max) = maximize_lagrangian(problem, x, &zero_lambda, &y_hat)?;
        let b = (f_max - f_hat).max(T::zero()) / g_min;
        bound = Some(bound.map_or(b, |a: T| a.max(b)));
    }
    match bound {
        Some(b) if b.is_finite() => Ok(b.max(floor)),
        Some(_) => Err(Error::Numerical("multiplier bound is not finite".into())),
        None => Err(Error::SlaterViolation),
    }
}

/// Concrete multiplier cap for a run.
pub fn resolve_cap<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    cap: LambdaCap,
) -> Result<T> {
    match cap {
        LambdaCap::Fixed(c) => Ok(T::lit(c)),
        LambdaCap::Auto if problem.num_constraints() == 0 => Ok(T::lit(AUTO_FLOOR)),
        LambdaCap::Auto => {
            let probes = default_probes(problem);
            let b = multiplier_cap(
                problem,
                |x| default_slater_point(problem, x),
                &probes,
                T::lit(AUTO_FLOOR),
            )?;
            Ok(b * T::lit(AUTO_SAFETY))
        }
    }
}
