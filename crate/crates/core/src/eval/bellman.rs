//! Monte-Carlo Bellman error of a policy profile.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdpgame::{
    discounted_return, sample_trajectory_from, MarkovGame, MaskMode, PolicyParams, StepStatus,
};
use crate::rng::{derive_seed, stream, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellmanVariant {
    /// Unrestricted one-step deviations, continuation from the realized next
    /// state of the profile.
    Nash,
    /// Follower deviations restricted to the coupled feasible set,
    /// continuation from the next state of each deviation.
    #[default]
    Stackelberg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellmanConfig {
    pub num_states: usize,
    pub num_rollouts: usize,
    pub variant: BellmanVariant,
    /// Masking used for the value rollouts.
    pub mask: MaskMode,
}

impl Default for BellmanConfig {
    fn default() -> Self {
        Self {
            num_states: 32,
            num_rollouts: 32,
            variant: BellmanVariant::Stackelberg,
            mask: MaskMode::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BellmanEstimate {
    /// Mean over states of `|Q̂(s) − V̂(s)|`.
    pub error: f64,
    /// Standard error of that mean.
    pub std_error: f64,
    pub num_states: usize,
    pub num_rollouts: usize,
    pub variant: BellmanVariant,
    pub per_state: Vec<f64>,
}

struct Profile<'a, G: ?Sized> {
    game: &'a G,
    leader: &'a PolicyParams,
    follower: &'a PolicyParams,
    cfg: &'a BellmanConfig,
}

impl<G: MarkovGame + ?Sized> Profile<'_, G> {
    /// Mean discounted return of rollouts from `s`, keyed by `seed`.
    fn value(&self, s: &[f64], seed: u64) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.cfg.num_rollouts {
            let mut rng = stream(seed, k as u64);
            let t = sample_trajectory_from(
                self.game,
                s.to_vec(),
                self.leader,
                self.follower,
                &mut rng,
                self.cfg.mask,
            )?;
            total += discounted_return(&t);
        }
        Ok(total / self.cfg.num_rollouts as f64)
    }

    /// `r + γ·V̂(next)`, with `V̂ = 0` after a terminal transition.
    fn backup(&self, s: &[f64], a: &[f64], b: &[f64], seed: u64) -> Result<f64> {
        let mut rng = stream(seed, u64::MAX);
        let r = self.game.reward(s, a, b);
        let (next, status) = self.game.transition(s, a, b, &mut rng);
        let v = if status == StepStatus::Continue {
            self.value(&next, derive_seed(seed, &[1]))?
        } else {
            0.0
        };
        Ok(r + self.game.discount() * v)
    }

    fn error_at(&self, s: &[f64], seed: u64) -> Result<f64> {
        let game = self.game;
        let devs_a = game.leader_deviations();
        let devs_b = game.follower_deviations();
        let v = self.value(s, derive_seed(seed, &[0]))?;
        let q = match self.cfg.variant {
            BellmanVariant::Nash => {
                // continuation from the profile's own next state
                let mut rng = stream(derive_seed(seed, &[2]), 0);
                let t = sample_trajectory_from(
                    game,
                    s.to_vec(),
                    self.leader,
                    self.follower,
                    &mut rng,
                    self.cfg.mask,
                )?;
                let cont = match t.steps.get(1) {
                    Some(next) => self.value(&next.state, derive_seed(seed, &[3]))?,
                    None => 0.0,
                };
                let g = game.discount();
                devs_a
                    .iter()
                    .map(|a| {
                        devs_b
                            .iter()
                            .map(|b| game.reward(s, a, b) + g * cont)
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            BellmanVariant::Stackelberg => {
                let mut best = f64::INFINITY;
                for (i, a) in devs_a.iter().enumerate() {
                    let mut inner = f64::NEG_INFINITY;
                    for (j, b) in devs_b.iter().enumerate() {
                        if game.is_feasible(s, a, b) {
                            inner = inner.max(self.backup(
                                s,
                                a,
                                b,
                                derive_seed(seed, &[4, i as u64, j as u64]),
                            )?);
                        }
                    }
                    if inner == f64::NEG_INFINITY {
                        inner = game.infeasible_reward(s);
                    }
                    best = best.min(inner);
                }
                best
            }
        };
        Ok((q - v).abs())
    }
}

/// Key for the random streams of state `s`, so the estimate does not depend
/// on the order in which states are listed.
fn state_key(seed: u64, s: &[f64]) -> u64 {
    let bits: Vec<u64> = s.iter().map(|v| v.to_bits()).collect();
    derive_seed(seed, &bits)
}

/// Bellman error at the given start states.
pub fn bellman_error_at<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    states: &[Vec<f64>],
    cfg: &BellmanConfig,
    seed: u64,
) -> Result<BellmanEstimate> {
    if cfg.num_rollouts == 0 || states.is_empty() {
        return Err(Error::Config(
            "bellman error needs at least one state and one rollout".into(),
        ));
    }
    if game.leader_deviations().is_empty() || game.follower_deviations().is_empty() {
        return Err(Error::UnsupportedEstimator {
            estimator: "bellman error",
            reason: "games without finite deviation sets".into(),
        });
    }
    let profile = Profile {
        game,
        leader,
        follower,
        cfg,
    };
    let per_state: Vec<f64> = states
        .par_iter()
        .map(|s| profile.error_at(s, state_key(seed, s)))
        .collect::<Result<_>>()?;
    let n = per_state.len() as f64;
    let error = per_state.iter().sum::<f64>() / n;
    let var = if per_state.len() > 1 {
        per_state.iter().map(|e| (e - error).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(BellmanEstimate {
        error,
        std_error: (var / n).sqrt(),
        num_states: per_state.len(),
        num_rollouts: cfg.num_rollouts,
        variant: cfg.variant,
        per_state,
    })
}

/// `E_{s∼μ} |Q̂(s, π(s)) − V̂(s)|` over `cfg.num_states` start states drawn
/// from the game's initial distribution.
pub fn bellman_error<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    cfg: &BellmanConfig,
    rng: &mut Rng,
) -> Result<BellmanEstimate> {
    let seed = rng.next_u64();
    let states: Vec<Vec<f64>> = (0..cfg.num_states)
        .map(|i| game.initial_state(&mut stream(seed, i as u64)))
        .collect();
    bellman_error_at(game, leader, follower, &states, cfg, seed)
}
