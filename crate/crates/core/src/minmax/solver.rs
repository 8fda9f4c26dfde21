use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::{all_finite, negative_part_norm, norm, Scalar};

use super::cap::resolve_cap;
use super::lagrangian_grads;
use super::log::{IterateLog, IterateRecord};
use super::problem::CoupledMinMaxProblem;
use super::residual::{noise_free, saddle_residual};
use super::schedule::LrSchedule;

/// Joint iterate of leader, follower and multipliers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub lambda: Vec<T>,
}

impl<T: Scalar> SaddleState<T> {
    pub fn initial<P: CoupledMinMaxProblem<T> + ?Sized>(problem: &P) -> Self {
        Self {
            x: problem.initial_x(),
            y: problem.initial_y(),
            lambda: vec![T::zero(); problem.num_constraints()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaCap {
    Auto,
    Fixed(f64),
}

/// How the follower block is solved at each outer iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerMode {
    /// `inner_iters` projected SGDA steps.
    #[default]
    Sgda,
    /// Analytic best response where available, SGDA to `target_delta` otherwise.
    Oracle,
}

/// Whether the leader waits for an inner loop or moves on the same sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    #[default]
    Nested,
    Simultaneous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub lr_outer: LrSchedule,
    pub lr_inner: LrSchedule,
    pub lambda_cap: LambdaCap,
    pub seed: u64,
    /// Inner stopping residual; `0` runs the full budget.
    pub target_delta: f64,
    pub inner_mode: InnerMode,
    pub update: UpdateRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_iters: 4000,
            inner_iters: 200,
            lr_outer: LrSchedule::InvSqrt,
            lr_inner: LrSchedule::InvSqrt,
            lambda_cap: LambdaCap::Auto,
            seed: 0,
            target_delta: 0.0,
            inner_mode: InnerMode::Sgda,
            update: UpdateRule::Nested,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::Config("outer_iters must be at least 1".into()));
        }
        self.lr_outer.validate()?;
        self.lr_inner.validate()?;
        if let LambdaCap::Fixed(c) = self.lambda_cap {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!(
                    "lambda_cap must be positive, got {c}"
                )));
            }
        }
        if !(self.target_delta >= 0.0) {
            return Err(Error::Config("target_delta must be nonnegative".into()));
        }
        Ok(())
    }

    fn draws_per_outer(&self) -> u64 {
        match self.update {
            UpdateRule::Nested => self.inner_iters as u64 + 1,
            UpdateRule::Simultaneous => 1,
        }
    }
}

/// Diagnostics of one inner loop.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerLog<T> {
    pub steps: usize,
    pub last_y: Vec<T>,
    pub last_lambda: Vec<T>,
    /// Saddle residual of the returned pair, when it was evaluated.
    pub residual: Option<T>,
    pub grad_y_norm: T,
}

fn project_lambda<T: Scalar>(lambda: &mut [T], cap: T) {
    for l in lambda {
        *l = l.max(T::zero()).min(cap);
    }
}

fn divergence(phase: &'static str, iter: usize) -> Error {
    Error::Divergence { phase, iter }
}

/// Projected stochastic gradient ascent on `y` and descent on `λ ∈ [0, cap]^K`
/// at fixed `x`, starting from `(y0, lambda0)`.
///
/// Each step draws one sample, moves `y`, then moves `λ` using the constraint
/// values of the same sample at the new `y`. The returned pair is the
/// `η`-weighted average of the visited iterates; the last iterate is kept in
/// the log. Draw `s` uses stream index `draw_base + s`.
#[allow(clippy::too_many_arguments)]
pub fn sgda_inner<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y0: &[T],
    lambda0: &[T],
    cap: T,
    steps: usize,
    config: &SolverConfig,
    draw_base: u64,
) -> Result<(Vec<T>, Vec<T>, InnerLog<T>)> {
    let mut y = y0.to_vec();
    let mut lambda = lambda0.to_vec();
    problem.project_y(&mut y);
    project_lambda(&mut lambda, cap);
    let mut sum_w = T::zero();
    let mut sum_y = vec![T::zero(); y.len()];
    let mut sum_l = vec![T::zero(); lambda.len()];
    let target = T::lit(config.target_delta);
    let check_residual = config.target_delta > 0.0;
    let mut grad_y_norm = T::zero();
    let mut residual = None;

    let average = |sum_y: &[T], sum_l: &[T], w: T, y: &[T], l: &[T]| -> (Vec<T>, Vec<T>) {
        if w > T::zero() {
            (
                sum_y.iter().map(|&s| s / w).collect(),
                sum_l.iter().map(|&s| s / w).collect(),
            )
        } else {
            (y.to_vec(), l.to_vec())
        }
    };

    if check_residual {
        let r = saddle_residual(problem, x, &y, &lambda, cap)?;
        residual = Some(r);
        if r <= target {
            let log = InnerLog {
                steps: 0,
                last_y: y.clone(),
                last_lambda: lambda.clone(),
                residual,
                grad_y_norm,
            };
            return Ok((y, lambda, log));
        }
    }

    let mut done = 0;
    for s in 0..steps {
        let eta: T = config.lr_inner.at(s);
        let draw = draw_base + s as u64;
        let (obj, con) = problem.sample(x, &y, &mut stream(config.seed, draw))?;
        let grads = lagrangian_grads(&obj, &con, &lambda)?;
        grad_y_norm = norm(&grads.grad_y);
        for (v, &g) in y.iter_mut().zip(&grads.grad_y) {
            *v += eta * g;
        }
        problem.project_y(&mut y);
        if !lambda.is_empty() {
            let g_new = problem.sample_constraint_values(x, &y, &mut stream(config.seed, draw))?;
            for (l, &g) in lambda.iter_mut().zip(&g_new) {
                *l -= eta * g;
            }
            project_lambda(&mut lambda, cap);
        }
        if !all_finite(&y) || !all_finite(&lambda) {
            return Err(divergence("inner", s));
        }
        sum_w += eta;
        for (a, &v) in sum_y.iter_mut().zip(&y) {
            *a += eta * v;
        }
        for (a, &v) in sum_l.iter_mut().zip(&lambda) {
            *a += eta * v;
        }
        done = s + 1;
        if check_residual && done % 10 == 0 {
            let (ay, al) = average(&sum_y, &sum_l, sum_w, &y, &lambda);
            let r = saddle_residual(problem, x, &ay, &al, cap)?;
            residual = Some(r);
            if r <= target {
                break;
            }
        }
    }
    let (ay, al) = average(&sum_y, &sum_l, sum_w, &y, &lambda);
    let log = InnerLog {
        steps: done,
        last_y: y,
        last_lambda: lambda,
        residual,
        grad_y_norm,
    };
    Ok((ay, al, log))
}

/// Outcome of [`saddle_point_oracle`].
#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult<T> {
    pub y: Vec<T>,
    pub lambda: Vec<T>,
    /// Achieved saddle residual.
    pub residual: T,
    pub reached: bool,
}

/// Hard cap on inner steps spent by [`saddle_point_oracle`].
const ORACLE_HARD_BUDGET: usize = 200_000;

/// Pair `(y, λ)` with saddle residual at most `delta` where achievable.
///
/// Uses the analytic best response when the problem has one, otherwise runs
/// [`sgda_inner`] for `O(1/δ²)` steps (capped) with residual-based stopping.
pub fn saddle_point_oracle<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    delta: T,
    cap: T,
    config: &SolverConfig,
) -> Result<OracleResult<T>> {
    if delta < T::zero() {
        return Err(Error::Config(
            "oracle residual target must be nonnegative".into(),
        ));
    }
    if let Some((y, mut lambda)) = problem.best_response(x) {
        project_lambda(&mut lambda, cap);
        let residual = saddle_residual(problem, x, &y, &lambda, cap)?;
        return Ok(OracleResult {
            reached: residual <= delta,
            y,
            lambda,
            residual,
        });
    }
    let d = delta.value().max(1e-12);
    let budget = ((1.0 / (d * d)).ceil() as usize).clamp(10, ORACLE_HARD_BUDGET);
    let cfg = SolverConfig {
        target_delta: d,
        ..config.clone()
    };
    let lambda0 = vec![T::zero(); problem.num_constraints()];
    let (y, lambda, log) = sgda_inner(
        problem,
        x,
        &problem.initial_y(),
        &lambda0,
        cap,
        budget,
        &cfg,
        0,
    )?;
    let residual = match log.residual {
        Some(r) if log.steps % 10 == 0 => r,
        _ => saddle_residual(problem, x, &y, &lambda, cap)?,
    };
    Ok(OracleResult {
        reached: residual <= delta,
        y,
        lambda,
        residual,
    })
}

/// Error returned when a run aborts, with everything logged before the failure.
#[derive(Debug)]
pub struct Aborted<T> {
    pub error: Error,
    pub partial: IterateLog<T>,
}

impl<T> From<Aborted<T>> for Error {
    fn from(a: Aborted<T>) -> Error {
        a.error
    }
}

/// Step-wise driver for nested and simultaneous SGDA.
pub struct Solver<'p, T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized> {
    problem: &'p P,
    config: SolverConfig,
    cap: T,
    state: SaddleState<T>,
    t: usize,
    log: IterateLog<T>,
}

impl<'p, T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized> Solver<'p, T, P> {
    pub fn new(problem: &'p P, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let cap = resolve_cap(problem, config.lambda_cap)?;
        let state = SaddleState::initial(problem);
        Self::resume(problem, config, cap, IterateLog::new(state, cap))
    }

    /// Continue a run from a previously saved log; iteration numbering and
    /// random draws pick up exactly where the log ends.
    pub fn resume(
        problem: &'p P,
        config: SolverConfig,
        cap: T,
        log: IterateLog<T>,
    ) -> Result<Self> {
        config.validate()?;
        let state = log.last.clone();
        if state.x.len() != problem.dim_x()
            || state.y.len() != problem.dim_y()
            || state.lambda.len() != problem.num_constraints()
        {
            return Err(Error::Config(
                "resumed state does not match problem dimensions".into(),
            ));
        }
        Ok(Self {
            problem,
            t: log.completed,
            config,
            cap,
            state,
            log,
        })
    }

    pub fn cap(&self) -> T {
        self.cap
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn state(&self) -> &SaddleState<T> {
        &self.state
    }

    pub fn log(&self) -> &IterateLog<T> {
        &self.log
    }

    pub fn into_log(self) -> IterateLog<T> {
        self.log
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.outer_iters
    }

    /// One outer iteration.
    pub fn step(&mut self) -> Result<&IterateRecord<T>> {
        match self.config.update {
            UpdateRule::Nested => self.nested_step()?,
            UpdateRule::Simultaneous => self.simultaneous_step()?,
        }
        self.t += 1;
        self.log.last = self.state.clone();
        Ok(self.log.records.last().expect("record pushed"))
    }

    /// Runs the remaining budget.
    pub fn run(mut self) -> Result<IterateLog<T>, Aborted<T>> {
        while !self.is_done() {
            if let Err(error) = self.step() {
                return Err(Aborted {
                    error,
                    partial: self.log,
                });
            }
        }
        Ok(self.log)
    }

    fn nested_step(&mut self) -> Result<()> {
        let p = self.problem;
        let t = self.t;
        let base = t as u64 * self.config.draws_per_outer();
        let x = self.state.x.clone();
        let (y, lambda, grad_y_norm) = match self.config.inner_mode {
            InnerMode::Sgda => {
                let (y, l, log) = sgda_inner(
                    p,
                    &x,
                    &self.state.y,
                    &self.state.lambda,
                    self.cap,
                    self.config.inner_iters,
                    &self.config,
                    base,
                )?;
                (y, l, log.grad_y_norm)
            }
            InnerMode::Oracle => {
                let r = saddle_point_oracle(
                    p,
                    &x,
                    T::lit(self.config.target_delta),
                    self.cap,
                    &self.config,
                )?;
                (r.y, r.lambda, T::zero())
            }
        };
        let draw = base + self.config.inner_iters as u64;
        let (obj, con) = p.sample(&x, &y, &mut stream(self.config.seed, draw))?;
        let grads = lagrangian_grads(&obj, &con, &lambda)?;
        let eta: T = self.config.lr_outer.at(t);
        let mut x_next = x.clone();
        for (v, &g) in x_next.iter_mut().zip(&grads.grad_x) {
            *v -= eta * g;
        }
        p.project_x(&mut x_next);
        if !all_finite(&x_next) {
            return Err(divergence("outer", t));
        }
        self.log.push(IterateRecord {
            t,
            x,
            y: y.clone(),
            lambda: lambda.clone(),
            lr: eta,
            f_hat: obj.value,
            delta_hat: negative_part_norm(&con.values),
            grad_x_norm: norm(&grads.grad_x),
            grad_y_norm,
        });
        self.state = SaddleState {
            x: x_next,
            y,
            lambda,
        };
        Ok(())
    }

    fn simultaneous_step(&mut self) -> Result<()> {
        let p = self.problem;
        let t = self.t;
        let SaddleState { x, y, lambda } = self.state.clone();
        let (obj, con) = p.sample(&x, &y, &mut stream(self.config.seed, t as u64))?;
        let grads = lagrangian_grads(&obj, &con, &lambda)?;
        let eta_y: T = self.config.lr_inner.at(t);
        let eta_x: T = self.config.lr_outer.at(t);
        let mut y_next = y.clone();
        for (v, &g) in y_next.iter_mut().zip(&grads.grad_y) {
            *v += eta_y * g;
        }
        p.project_y(&mut y_next);
        let mut l_next = lambda.clone();
        for (l, &g) in l_next.iter_mut().zip(&grads.grad_lambda) {
            *l -= eta_y * g;
        }
        project_lambda(&mut l_next, self.cap);
        // leader moves on the same sample with the refreshed multipliers
        let mut gx = obj.grad_x.clone();
        for (&l, jx) in l_next.iter().zip(&con.jac_x) {
            for (g, &d) in gx.iter_mut().zip(jx) {
                *g += l * d;
            }
        }
        let mut x_next = x.clone();
        for (v, &g) in x_next.iter_mut().zip(&gx) {
            *v -= eta_x * g;
        }
        p.project_x(&mut x_next);
        if !all_finite(&x_next) || !all_finite(&y_next) || !all_finite(&l_next) {
            return Err(divergence("outer", t));
        }
        self.log.push(IterateRecord {
            t,
            x,
            y,
            lambda,
            lr: eta_x,
            f_hat: obj.value,
            delta_hat: negative_part_norm(&con.values),
            grad_x_norm: norm(&gx),
            grad_y_norm: norm(&grads.grad_y),
        });
        self.state = SaddleState {
            x: x_next,
            y: y_next,
            lambda: l_next,
        };
        Ok(())
    }
}

/// Nested SGDA: `outer_iters` leader descent steps, each after an inner
/// follower/multiplier loop.
pub fn nested_sgda<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    config: &SolverConfig,
) -> Result<IterateLog<T>, Aborted<T>> {
    let cfg = SolverConfig {
        update: UpdateRule::Nested,
        ..config.clone()
    };
    start(problem, cfg)?.run()
}

/// Simultaneous SGDA: one follower/multiplier step and one leader step per
/// shared sample.
pub fn simultaneous_sgda<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    config: &SolverConfig,
) -> Result<IterateLog<T>, Aborted<T>> {
    let cfg = SolverConfig {
        update: UpdateRule::Simultaneous,
        ..config.clone()
    };
    start(problem, cfg)?.run()
}

fn start<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    cfg: SolverConfig,
) -> Result<Solver<'_, T, P>, Aborted<T>> {
    Solver::new(problem, cfg).map_err(|error| {
        let state = SaddleState::initial(problem);
        Aborted {
            error,
            partial: IterateLog::new(state, T::zero()),
        }
    })
}

/// Evaluates `L(y, λ; x)` without noise.
pub(crate) fn exact_lagrangian<T: Scalar, P: CoupledMinMaxProblem<T> + ?Sized>(
    problem: &P,
    x: &[T],
    y: &[T],
    lambda: &[T],
) -> Result<T> {
    let (obj, con) = noise_free(problem, x, y)?;
    super::lagrangian_value(obj.value, &con.values, lambda)
}
