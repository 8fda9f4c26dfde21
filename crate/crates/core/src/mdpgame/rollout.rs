use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{stream, Rng};

use super::policy::PolicyParams;
use super::{feasible_mask, ActionSpace, MarkovGame, StepStatus};

/// Why a trajectory ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Absorbed,
    Captured,
    /// The follower had no feasible action.
    Infeasible,
}

/// Whether the follower is restricted to actions satisfying the coupling
/// constraint.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    #[default]
    None,
    Follower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Step {
    pub state: Vec<f64>,
    #[serde(skip)]
    pub features: Vec<f64>,
    /// State index for tabular policies.
    #[serde(skip)]
    pub key: Option<usize>,
    pub leader: Vec<f64>,
    pub follower: Vec<f64>,
    pub leader_index: Option<usize>,
    pub follower_index: Option<usize>,
    /// Clamp-inactive flags of bilinear actions.
    #[serde(skip)]
    pub leader_active: Vec<bool>,
    #[serde(skip)]
    pub follower_active: Vec<bool>,
    #[serde(skip)]
    pub mask: Option<Vec<bool>>,
    /// The follower's own action was infeasible and got replaced.
    pub shielded: bool,
    pub reward: f64,
    pub constraint: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub termination: Termination,
    /// `γ^t` for every step.
    pub discount_weights: Vec<f64>,
    pub final_state: Vec<f64>,
    /// Reward paid at `γ^len` on infeasible termination.
    pub terminal_reward: f64,
    pub gamma: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Reward-to-go `G_t = Σ_{k ≥ t} γ^{k−t} r_k` (terminal reward included).
    pub fn rewards_to_go(&self) -> Vec<f64> {
        let gamma = self.gamma;
        let mut g = vec![0.0; self.steps.len()];
        let mut acc = self.terminal_reward;
        for t in (0..self.steps.len()).rev() {
            acc = self.steps[t].reward + gamma * acc;
            g[t] = acc;
        }
        g
    }
}

/// `Σ_t γ^t r_t`, plus the discounted terminal reward.
pub fn discounted_return(traj: &Trajectory) -> f64 {
    let stage: f64 = traj
        .steps
        .iter()
        .zip(&traj.discount_weights)
        .map(|(s, w)| w * s.reward)
        .sum();
    stage + traj.gamma.powi(traj.steps.len() as i32) * traj.terminal_reward
}

fn sample_index(p: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &q) in p.iter().enumerate() {
        if q > 0.0 {
            acc += q;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Action of `policy` at `phi`: `(action, discrete index, clamp-inactive flags)`.
fn act(
    policy: &PolicyParams,
    space: &ActionSpace,
    phi: &[f64],
    key: Option<usize>,
    mask: Option<&[bool]>,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Option<usize>, Vec<bool>)> {
    if policy.is_stochastic() {
        let p = policy.probabilities(phi, key, mask)?;
        let i = sample_index(&p, rng);
        let ActionSpace::Discrete(actions) = space else {
            return Err(crate::Error::Config(
                "stochastic policies need discrete actions".into(),
            ));
        };
        Ok((actions[i].clone(), Some(i), Vec::new()))
    } else {
        let (a, active) = policy.bilinear_action(phi, space)?;
        Ok((a, None, active))
    }
}

/// Action of `policy` at features `phi`: sampled for softmax policies
/// (restricted to `mask` when given), deterministic for bilinear ones.
pub fn policy_action(
    policy: &PolicyParams,
    space: &ActionSpace,
    phi: &[f64],
    key: Option<usize>,
    mask: Option<&[bool]>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mask = if policy.is_stochastic() { mask } else { None };
    Ok(act(policy, space, phi, key, mask, rng)?.0)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest feasible deviation to `b`; ties go to the smaller-norm action.
pub(crate) fn shield(devs: &[Vec<f64>], mask: &[bool], b: &[f64]) -> Option<usize> {
    let zero = vec![0.0; b.len()];
    devs.iter()
        .enumerate()
        .filter(|(i, _)| mask[*i])
        .min_by(|(_, x), (_, y)| {
            sq_dist(x, b)
                .total_cmp(&sq_dist(y, b))
                .then(sq_dist(x, &zero).total_cmp(&sq_dist(y, &zero)))
        })
        .map(|(i, _)| i)
}

/// Rolls out one episode of at most `H` steps; the leader acts first and
/// the follower (optionally restricted to feasible actions) responds.
pub fn sample_trajectory<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    rng: &mut Rng,
    mask: MaskMode,
) -> Result<Trajectory> {
    let s0 = game.initial_state(rng);
    sample_trajectory_from(game, s0, leader, follower, rng, mask)
}

/// As [`sample_trajectory`], starting from `s0` instead of the initial
/// distribution.
pub fn sample_trajectory_from<G: MarkovGame + ?Sized>(
    game: &G,
    s0: Vec<f64>,
    leader: &PolicyParams,
    follower: &PolicyParams,
    rng: &mut Rng,
    mask: MaskMode,
) -> Result<Trajectory> {
    let gamma = game.discount();
    let horizon = game.horizon().saturating_sub(game.elapsed(&s0));
    let mut s = s0;
    let mut steps = Vec::with_capacity(horizon);
    let mut termination = Termination::Horizon;
    let mut terminal_reward = 0.0;
    let masked = mask == MaskMode::Follower && game.num_constraints() > 0;
    for _ in 0..horizon {
        let phi = game.features(&s);
        let key = game.state_index(&s);
        let (a, a_idx, a_active) = act(leader, game.leader_actions(), &phi, key, None, rng)?;
        let fmask = masked.then(|| feasible_mask(game, &s, &a));
        if let Some(m) = &fmask {
            if !m.iter().any(|&f| f) {
                termination = Termination::Infeasible;
                terminal_reward = game.infeasible_reward(&s);
                break;
            }
        }
        let stochastic_mask = if follower.is_stochastic() {
            fmask.as_deref()
        } else {
            None
        };
        let (mut b, mut b_idx, mut b_active) = act(
            follower,
            game.follower_actions(),
            &phi,
            key,
            stochastic_mask,
            rng,
        )?;
        let mut shielded = false;
        if let (Some(m), false) = (&fmask, follower.is_stochastic()) {
            if !game.is_feasible(&s, &a, &b) {
                let devs = game.follower_deviations();
                let i = shield(&devs, m, &b).expect("mask has a feasible action");
                b = devs[i].clone();
                b_idx = Some(i);
                b_active = vec![false; b.len()];
                shielded = true;
            }
        }
        let reward = game.reward(&s, &a, &b);
        let constraint = game.constraint(&s, &a, &b);
        let (next, status) = game.transition(&s, &a, &b, rng);
        steps.push(Step {
            state: std::mem::replace(&mut s, next),
            features: phi,
            key,
            leader: a,
            follower: b,
            leader_index: a_idx,
            follower_index: b_idx,
            leader_active: a_active,
            follower_active: b_active,
            mask: fmask,
            shielded,
            reward,
            constraint,
        });
        match status {
            StepStatus::Continue => {}
            StepStatus::Absorbed => {
                termination = Termination::Absorbed;
                break;
            }
            StepStatus::Captured => {
                termination = Termination::Captured;
                break;
            }
        }
    }
    let discount_weights = (0..steps.len()).map(|t| gamma.powi(t as i32)).collect();
    Ok(Trajectory {
        steps,
        termination,
        discount_weights,
        final_state: s,
        terminal_reward,
        gamma,
    })
}

/// `batch` trajectories; trajectory `i` uses stream `(seed, base + i)`.
/// Rollouts run in parallel and come back in index order.
pub fn rollout_batch<G: MarkovGame + ?Sized>(
    game: &G,
    leader: &PolicyParams,
    follower: &PolicyParams,
    seed: u64,
    base: u64,
    batch: usize,
    mask: MaskMode,
) -> Result<Vec<Trajectory>> {
    (0..batch)
        .into_par_iter()
        .map(|i| {
            sample_trajectory(
                game,
                leader,
                follower,
                &mut stream(seed, base + i as u64),
                mask,
            )
        })
        .collect()
}

#[derive(Serialize)]
struct StepRecord<'a> {
    t: usize,
    #[serde(flatten)]
    step: &'a Step,
    discount: f64,
}

/// One JSON object per step.
pub fn write_jsonl<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    for (t, (step, &discount)) in traj.steps.iter().zip(&traj.discount_weights).enumerate() {
        serde_json::to_writer(&mut w, &StepRecord { t, step, discount })?;
        writeln!(w)?;
    }
    Ok(())
}
