//! Policy GDA: the game wrapped as a coupled min-max problem and driven by
//! the nested or simultaneous SGDA solver.

use std::time::Instant;

use crate::error::Result;
use crate::mdpgame::{as_minmax_problem, EstimatorConfig, MarkovGame};
use crate::minmax::{
    CoupledMinMaxProblem, InnerMode, IterateLog, IterateRecord, LambdaCap, SaddleState, Solver,
    SolverConfig, UpdateRule,
};

use super::state::Progress;
use super::{l2, CheckpointHook, TrainAborted, TrainConfig, TrainInit, TrainOutcome, TrainRecord};

/// Solver settings equivalent to `cfg`.
pub(crate) fn solver_config(cfg: &TrainConfig) -> SolverConfig {
    SolverConfig {
        outer_iters: cfg.outer_iters,
        inner_iters: cfg.inner_iters,
        lr_outer: cfg.lr_leader,
        lr_inner: cfg.lr_follower,
        lambda_cap: LambdaCap::Fixed(cfg.lambda_cap),
        seed: cfg.seed,
        target_delta: 0.0,
        inner_mode: InnerMode::Sgda,
        update: if cfg.algo.is_nested() {
            UpdateRule::Nested
        } else {
            UpdateRule::Simultaneous
        },
    }
}

/// Estimator settings equivalent to `cfg`.
pub(crate) fn estimator_config(cfg: &TrainConfig) -> EstimatorConfig {
    EstimatorConfig {
        estimator: cfg.algo.estimator(),
        batch: cfg.batch_size,
        mask: cfg.mask,
        constraints: true,
        constraint_form: cfg.constraint_form,
        param_box: cfg.param_box,
    }
}

fn record(r: &IterateRecord<f64>, start: &Instant, cfg: &TrainConfig) -> TrainRecord {
    TrainRecord {
        iter: r.t,
        mean_return: r.f_hat,
        violation: r.delta_hat,
        grad_x_norm: r.grad_x_norm,
        grad_y_norm: r.grad_y_norm,
        lambda_norm: l2(&r.lambda),
        sec: if cfg.record_wall_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        },
    }
}

pub(crate) fn run<G: MarkovGame + ?Sized>(
    game: &G,
    cfg: &TrainConfig,
    init: TrainInit,
    mut hook: Option<&mut CheckpointHook<'_>>,
) -> Result<TrainOutcome, TrainAborted> {
    let start = Instant::now();
    let mut progress = match &init {
        TrainInit::Fresh { leader, follower } => {
            Progress::fresh(leader.clone(), follower.clone(), 0)
        }
        TrainInit::Resume(s) => Progress::from_state(s)?,
    };
    let problem = as_minmax_problem(
        game,
        &progress.leader,
        &progress.follower,
        estimator_config(cfg),
    )?;
    let k = problem.num_constraints();
    let scfg = solver_config(cfg);
    let log = match &init {
        TrainInit::Fresh { .. } => {
            progress.lambda = vec![0.0; k];
            progress.sum_lambda = vec![0.0; k];
            IterateLog::new(SaddleState::initial(&problem), cfg.lambda_cap)
        }
        TrainInit::Resume(_) => {
            if progress.lambda.len() != k {
                return Err(crate::Error::Checkpoint(
                    "snapshot multiplier count does not match the game".into(),
                )
                .into());
            }
            IterateLog {
                records: Vec::new(),
                completed: progress.records.len(),
                sum_lr: progress.sum_lr,
                sum_x: progress.sum_x.clone(),
                sum_y: progress.sum_y.clone(),
                sum_lambda: progress.sum_lambda.clone(),
                lambda_cap: cfg.lambda_cap,
                last: SaddleState {
                    x: progress.leader.theta.clone(),
                    y: progress.follower.theta.clone(),
                    lambda: progress.lambda.clone(),
                },
            }
        }
    };
    let mut solver = Solver::resume(&problem, scfg, cfg.lambda_cap, log)?;
    let abort = |error, progress: &Progress| TrainAborted {
        error,
        partial: progress.records.clone(),
    };
    while !solver.is_done() {
        let r = match solver.step() {
            Ok(r) => record(r, &start, cfg),
            Err(e) => return Err(abort(e, &progress)),
        };
        progress.records.push(r);
        let log = solver.log();
        progress.sum_lr = log.sum_lr;
        progress.sum_x.clone_from(&log.sum_x);
        progress.sum_y.clone_from(&log.sum_y);
        progress.sum_lambda.clone_from(&log.sum_lambda);
        let st = solver.state();
        progress.leader.theta.clone_from(&st.x);
        progress.follower.theta.clone_from(&st.y);
        progress.lambda.clone_from(&st.lambda);
        let n = progress.records.len();
        if let Some(h) = hook.as_deref_mut() {
            if cfg.checkpoint_every > 0 && n % cfg.checkpoint_every == 0 {
                if let Err(e) = h(&progress.snapshot(cfg, None)) {
                    return Err(abort(e, &progress));
                }
            }
        }
    }
    let (leader_avg, follower_avg) = progress.averages();
    let state = progress.snapshot(cfg, None);
    let done = progress.records.len();
    Ok(TrainOutcome {
        leader: progress.leader,
        follower: progress.follower,
        leader_avg,
        follower_avg,
        lambda: progress.lambda,
        baseline: None,
        leader_updates: done,
        follower_updates: done * cfg.follower_steps(),
        records: progress.records,
        state,
    })
}
