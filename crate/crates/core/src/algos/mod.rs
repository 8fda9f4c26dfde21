//! Training loops for zero-sum Markov Stackelberg games: nested and
//! simultaneous policy gradient descent ascent (pathwise oracles, bilinear
//! policies, Lagrange multipliers) and nested and simultaneous REINFORCE
//! with a learned state-value baseline (softmax policies).
//!
//! The leader minimizes and the follower maximizes the follower's return.

mod config;
mod pgda;
mod reinforce;
mod state;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use config::{Algo, PolicyFamily, TrainConfig};
pub use state::{TrainState, TRAIN_STATE_SCHEMA};

use crate::error::{Error, Result};
use crate::mdpgame::{MarkovGame, PolicyParams, ValueBaseline};
use crate::rng::stream;

/// Metrics of one outer iteration, measured before the leader step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iter: usize,
    /// Mean discounted return of the batch.
    #[serde(rename = "return")]
    pub mean_return: f64,
    /// Mean `‖min(g, 0)‖` of the visitation-averaged constraints.
    pub violation: f64,
    pub grad_x_norm: f64,
    pub grad_y_norm: f64,
    pub lambda_norm: f64,
    /// Seconds since the run started; `0` unless wall time is recorded.
    pub sec: f64,
}

pub const TRAIN_CSV_HEADER: &str = "iter,return,violation,grad_x_norm,grad_y_norm,lambda_norm,sec";

/// Writes `records` as CSV with [`TRAIN_CSV_HEADER`].
pub fn write_train_csv<W: Write>(records: &[TrainRecord], mut w: W) -> Result<()> {
    writeln!(w, "{TRAIN_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.iter, r.mean_return, r.violation, r.grad_x_norm, r.grad_y_norm, r.lambda_norm, r.sec
        )?;
    }
    Ok(())
}

/// Where a run starts.
#[derive(Clone, Debug)]
pub enum TrainInit {
    /// Fresh policies (their parameters are the starting point).
    Fresh {
        leader: PolicyParams,
        follower: PolicyParams,
    },
    /// A snapshot written by an earlier run with the same configuration.
    Resume(Box<TrainState>),
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub leader: PolicyParams,
    pub follower: PolicyParams,
    /// Step-size weighted averages of the pre-update leader and follower
    /// parameters.
    pub leader_avg: PolicyParams,
    pub follower_avg: PolicyParams,
    pub lambda: Vec<f64>,
    pub baseline: Option<ValueBaseline>,
    pub records: Vec<TrainRecord>,
    pub leader_updates: usize,
    pub follower_updates: usize,
    /// Snapshot of the end of the run.
    pub state: TrainState,
}

/// Error of an aborted run with the records logged before the failure.
#[derive(Debug)]
pub struct TrainAborted {
    pub error: Error,
    pub partial: Vec<TrainRecord>,
}

impl From<TrainAborted> for Error {
    fn from(a: TrainAborted) -> Error {
        a.error
    }
}

impl From<Error> for TrainAborted {
    fn from(error: Error) -> Self {
        Self {
            error,
            partial: Vec::new(),
        }
    }
}

/// Called with a snapshot every `checkpoint_every` outer iterations.
pub type CheckpointHook<'a> = dyn FnMut(&TrainState) -> Result<()> + 'a;

/// Default starting policies for `cfg` on `game`: zero bilinear maps or
/// seeded softmax networks. `states` sizes tabular policies.
pub fn initial_policies<G: MarkovGame + ?Sized>(
    game: &G,
    cfg: &TrainConfig,
    states: Option<usize>,
) -> Result<(PolicyParams, PolicyParams)> {
    let kind = cfg.policy_kind();
    let mut rng = stream(cfg.seed, state::INIT_STREAM);
    let leader = PolicyParams::for_game(&kind, game, game.leader_actions(), states, &mut rng)?;
    let follower = PolicyParams::for_game(&kind, game, game.follower_actions(), states, &mut rng)?;
    Ok((leader, follower))
}

/// Runs `cfg.algo` on `game`.
pub fn train<G: MarkovGame + ?Sized>(
    game: &G,
    cfg: &TrainConfig,
    init: TrainInit,
    hook: Option<&mut CheckpointHook<'_>>,
) -> Result<TrainOutcome, TrainAborted> {
    cfg.validate()?;
    if let TrainInit::Resume(s) = &init {
        s.check_compatible(cfg)?;
    }
    if cfg.algo.is_reinforce() {
        reinforce::run(game, cfg, init, hook)
    } else {
        pgda::run(game, cfg, init, hook)
    }
}

fn fresh(leader: &PolicyParams, follower: &PolicyParams) -> TrainInit {
    TrainInit::Fresh {
        leader: leader.clone(),
        follower: follower.clone(),
    }
}

fn with_algo(cfg: &TrainConfig, algo: Algo) -> TrainConfig {
    TrainConfig {
        algo,
        ..cfg.clone()
    }
}

/// Nested policy GDA: `inner_iters` follower/multiplier steps, then one
/// leader descent step, per outer iteration.
pub fn nested_policy_gda<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainAborted> {
    train(
        game,
        &with_algo(cfg, Algo::NestedPgda),
        fresh(leader, follower),
        None,
    )
}

/// Simultaneous policy GDA: one follower/multiplier step and one leader
/// step on a shared batch per iteration.
pub fn simultaneous_policy_gda<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainAborted> {
    train(
        game,
        &with_algo(cfg, Algo::SimPgda),
        fresh(leader, follower),
        None,
    )
}

/// Nested REINFORCE with a state-value baseline.
pub fn nested_reinforce_baseline<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainAborted> {
    train(
        game,
        &with_algo(cfg, Algo::NestedReinforce),
        fresh(leader, follower),
        None,
    )
}

/// Simultaneous REINFORCE with a state-value baseline.
pub fn simultaneous_reinforce_baseline<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainAborted> {
    train(
        game,
        &with_algo(cfg, Algo::SimReinforce),
        fresh(leader, follower),
        None,
    )
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}
