//! REINFORCE with a state-value baseline for both players.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::mdpgame::projected_constraint;
use crate::mdpgame::{
    baseline_update, discounted_return, reinforce_grad, rollout_batch, ConstraintForm, MarkovGame,
    PolicyParams, Role, Trajectory, ValueBaseline,
};
use crate::rng::stream;
use crate::scalar::negative_part_norm;

use super::state::{Progress, BASELINE_STREAM};
use super::{l2, CheckpointHook, TrainAborted, TrainConfig, TrainInit, TrainOutcome, TrainRecord};

struct Batch {
    trajs: Vec<Trajectory>,
}

impl Batch {
    fn draw<G: MarkovGame + ?Sized>(
        game: &G,
        leader: &PolicyParams,
        follower: &PolicyParams,
        cfg: &TrainConfig,
        draw: u64,
    ) -> Result<Self> {
        use rand::RngCore;
        let seed = stream(cfg.seed, draw).next_u64();
        let trajs = rollout_batch(game, leader, follower, seed, 0, cfg.batch_size, cfg.mask)?;
        Ok(Self { trajs })
    }

    /// Batch mean of the score-function gradient of `role`'s policy.
    fn grad(
        &self,
        policy: &PolicyParams,
        role: Role,
        baseline: &ValueBaseline,
    ) -> Result<Vec<f64>> {
        let n = self.trajs.len() as f64;
        let mut g = vec![0.0; policy.theta.len()];
        for t in &self.trajs {
            for (a, d) in g
                .iter_mut()
                .zip(reinforce_grad(t, policy, role, Some(baseline))?)
            {
                *a += d / n;
            }
        }
        Ok(g)
    }

    fn mean_return(&self) -> f64 {
        self.trajs.iter().map(discounted_return).sum::<f64>() / self.trajs.len() as f64
    }

    fn violation(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let n = self.trajs.len() as f64;
        self.trajs
            .iter()
            .map(|t| negative_part_norm(&projected_constraint(t, k, ConstraintForm::Projected)))
            .sum::<f64>()
            / n
    }

    /// Fits the baseline to every trajectory of the batch in order.
    fn fit(&self, baseline: &mut ValueBaseline, lr: f64, iter: usize) -> Result<()> {
        for t in &self.trajs {
            *baseline = baseline_update(baseline, t, lr).map_err(|e| match e {
                Error::Divergence { phase, .. } => Error::Divergence { phase, iter },
                other => other,
            })?;
        }
        Ok(())
    }
}

/// `θ ← Π[θ + sign·η·g]`.
fn step(
    theta: &mut [f64],
    g: &[f64],
    eta: f64,
    sign: f64,
    bounds: (f64, f64),
    phase: &'static str,
    iter: usize,
) -> Result<()> {
    for (v, &d) in theta.iter_mut().zip(g) {
        *v = (*v + sign * eta * d).clamp(bounds.0, bounds.1);
    }
    if theta.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { phase, iter })
    }
}

pub(crate) fn run<G: MarkovGame + ?Sized>(
    game: &G,
    cfg: &TrainConfig,
    init: TrainInit,
    mut hook: Option<&mut CheckpointHook<'_>>,
) -> Result<TrainOutcome, TrainAborted> {
    let start = Instant::now();
    let n_in = game.feature_dim();
    let (mut progress, mut baseline) = match init {
        TrainInit::Fresh { leader, follower } => {
            let b = ValueBaseline::new(
                n_in,
                cfg.baseline_width,
                &mut stream(cfg.seed, BASELINE_STREAM),
            );
            (Progress::fresh(leader, follower, 0), b)
        }
        TrainInit::Resume(s) => {
            let b = s
                .baseline_network(n_in, cfg.baseline_width)?
                .ok_or_else(|| Error::Checkpoint("snapshot has no baseline weights".into()))?;
            (Progress::from_state(&s)?, b)
        }
    };
    for p in [&progress.leader, &progress.follower] {
        p.validate()?;
        if !p.is_stochastic() {
            return Err(Error::UnsupportedEstimator {
                estimator: "reinforce",
                reason: format!("{} policies", p.kind.name()),
            }
            .into());
        }
    }
    for p in [&mut progress.leader, &mut progress.follower] {
        p.theta
            .iter_mut()
            .for_each(|v| *v = v.clamp(cfg.param_box.0, cfg.param_box.1));
    }
    let k = game.num_constraints();
    let per_outer = cfg.draws_per_outer();
    let nested = cfg.algo.is_nested();

    while progress.records.len() < cfg.outer_iters {
        let t = progress.records.len();
        let outcome = (|| -> Result<TrainRecord> {
            let x0 = progress.leader.theta.clone();
            let y0 = progress.follower.theta.clone();
            let base = t as u64 * per_outer;
            let lr_b = cfg.lr_baseline.at::<f64>(t);
            let eta_x = cfg.lr_leader.at::<f64>(t);
            let mut gy_norm = 0.0;
            let (batch, gx) = if nested {
                for s in 0..cfg.inner_iters {
                    let batch = Batch::draw(
                        game,
                        &progress.leader,
                        &progress.follower,
                        cfg,
                        base + s as u64,
                    )?;
                    let gy = batch.grad(&progress.follower, Role::Follower, &baseline)?;
                    gy_norm = l2(&gy);
                    step(
                        &mut progress.follower.theta,
                        &gy,
                        cfg.lr_follower.at(s),
                        1.0,
                        cfg.param_box,
                        "follower",
                        t,
                    )?;
                    batch.fit(&mut baseline, lr_b, t)?;
                }
                let batch = Batch::draw(
                    game,
                    &progress.leader,
                    &progress.follower,
                    cfg,
                    base + cfg.inner_iters as u64,
                )?;
                let gx = batch.grad(&progress.leader, Role::Leader, &baseline)?;
                (batch, gx)
            } else {
                let batch = Batch::draw(game, &progress.leader, &progress.follower, cfg, base)?;
                let gx = batch.grad(&progress.leader, Role::Leader, &baseline)?;
                let gy = batch.grad(&progress.follower, Role::Follower, &baseline)?;
                gy_norm = l2(&gy);
                step(
                    &mut progress.follower.theta,
                    &gy,
                    cfg.lr_follower.at(t),
                    1.0,
                    cfg.param_box,
                    "follower",
                    t,
                )?;
                (batch, gx)
            };
            let y_used = if nested {
                progress.follower.theta.clone()
            } else {
                y0
            };
            step(
                &mut progress.leader.theta,
                &gx,
                eta_x,
                -1.0,
                cfg.param_box,
                "leader",
                t,
            )?;
            batch.fit(&mut baseline, lr_b, t)?;
            progress.accumulate(eta_x, &x0, &y_used, &[]);
            Ok(TrainRecord {
                iter: t,
                mean_return: batch.mean_return(),
                violation: batch.violation(k),
                grad_x_norm: l2(&gx),
                grad_y_norm: gy_norm,
                lambda_norm: 0.0,
                sec: if cfg.record_wall_time {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            })
        })();
        match outcome {
            Ok(r) => progress.records.push(r),
            Err(error) => {
                return Err(TrainAborted {
                    error,
                    partial: progress.records,
                })
            }
        }
        let n = progress.records.len();
        if let Some(h) = hook.as_deref_mut() {
            if cfg.checkpoint_every > 0 && n % cfg.checkpoint_every == 0 {
                if let Err(error) = h(&progress.snapshot(cfg, Some(&baseline))) {
                    return Err(TrainAborted {
                        error,
                        partial: progress.records,
                    });
                }
            }
        }
    }
    let (leader_avg, follower_avg) = progress.averages();
    let state = progress.snapshot(cfg, Some(&baseline));
    let done = progress.records.len();
    Ok(TrainOutcome {
        leader: progress.leader,
        follower: progress.follower,
        leader_avg,
        follower_avg,
        lambda: Vec::new(),
        baseline: Some(baseline),
        leader_updates: done,
        follower_updates: done * cfg.follower_steps(),
        records: progress.records,
        state,
    })
}
