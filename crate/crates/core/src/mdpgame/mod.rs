//! Zero-sum Markov Stackelberg games, parametric policies, trajectory
//! sampling and the stochastic first-order oracles that turn a game into a
//! [`CoupledMinMaxProblem`](crate::minmax::CoupledMinMaxProblem).
//!
//! The leader minimizes and the follower maximizes the expected discounted
//! reward. Actions are real vectors; discrete action sets are lists of them.

mod adapter;
mod baseline;
mod checkpoint;
mod grad;
mod mlp;
mod policy;
mod rollout;
pub mod testgames;

pub(crate) use adapter::projected_constraint;
pub use adapter::{as_minmax_problem, Estimator, EstimatorConfig, GameProblem};
pub use baseline::{baseline_update, ValueBaseline};
pub use checkpoint::{base64_f64s, decode_f64s, encode_f64s, Checkpoint, CHECKPOINT_SCHEMA};
pub use grad::{
    constraint_expectation, det_pg_grad, pathwise_batch, reinforce_grad, ConstraintEstimate,
    ConstraintForm, PathwiseEstimate,
};
pub use mlp::Mlp;
pub use policy::{PolicyKind, PolicyParams};
pub(crate) use rollout::shield;
pub use rollout::{
    discounted_return, policy_action, rollout_batch, sample_trajectory, sample_trajectory_from,
    write_jsonl, MaskMode, Step, Termination, Trajectory,
};

use crate::rng::Rng;

/// Action set of one player.
#[derive(Clone, Debug, PartialEq)]
pub enum ActionSpace {
    /// Finite list of action vectors.
    Discrete(Vec<Vec<f64>>),
    /// Box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(a) => a.first().map_or(0, Vec::len),
            ActionSpace::Box { lo, .. } => lo.len(),
        }
    }

    pub fn num_discrete(&self) -> Option<usize> {
        match self {
            ActionSpace::Discrete(a) => Some(a.len()),
            ActionSpace::Box { .. } => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionSpace::Discrete(_))
    }
}

/// Which side of the game a policy plays.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
}

/// Outcome of one transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepStatus {
    Continue,
    /// Terminal success state for the follower (e.g. target reached).
    Absorbed,
    /// Terminal capture of the follower.
    Captured,
}

/// First-order local model of one transition; all derivatives are taken at
/// `(s, a, b)`. Matrices are row-major `Vec` of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalJacobians {
    pub next: Vec<f64>,
    pub reward: f64,
    pub constraint: Vec<f64>,
    pub dnext_ds: Vec<Vec<f64>>,
    pub dnext_da: Vec<Vec<f64>>,
    pub dnext_db: Vec<Vec<f64>>,
    pub dr_ds: Vec<f64>,
    pub dr_da: Vec<f64>,
    pub dr_db: Vec<f64>,
    pub dg_ds: Vec<Vec<f64>>,
    pub dg_da: Vec<Vec<f64>>,
    pub dg_db: Vec<Vec<f64>>,
}

/// A discounted zero-sum game between a minimizing leader and a maximizing
/// follower who moves after observing the leader's action.
pub trait MarkovGame: Sync {
    fn state_dim(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn leader_actions(&self) -> &ActionSpace;
    fn follower_actions(&self) -> &ActionSpace;
    /// Number of coupling constraints `g(s, a, b) ≥ 0`.
    fn num_constraints(&self) -> usize;
    fn discount(&self) -> f64;
    fn horizon(&self) -> usize;
    /// Bound on `|r|`.
    fn reward_bound(&self) -> f64;

    fn initial_state(&self, rng: &mut Rng) -> Vec<f64>;
    fn features(&self, s: &[f64]) -> Vec<f64>;
    fn reward(&self, s: &[f64], a: &[f64], b: &[f64]) -> f64;
    fn constraint(&self, s: &[f64], a: &[f64], b: &[f64]) -> Vec<f64>;
    fn transition(&self, s: &[f64], a: &[f64], b: &[f64], rng: &mut Rng) -> (Vec<f64>, StepStatus);

    /// Reward paid when the follower is left without a feasible action.
    fn infeasible_reward(&self, _s: &[f64]) -> f64 {
        0.0
    }

    /// Steps already played when the episode reached `s`; rollouts from `s`
    /// stop at the episode's horizon. Games without a clock return `0`.
    fn elapsed(&self, _s: &[f64]) -> usize {
        0
    }

    /// Index of `s` for tabular policies.
    fn state_index(&self, _s: &[f64]) -> Option<usize> {
        None
    }

    /// Finite action sets used for one-step deviations and shielding when
    /// the native action space is continuous.
    fn leader_deviations(&self) -> Vec<Vec<f64>> {
        discrete_or_empty(self.leader_actions())
    }

    fn follower_deviations(&self) -> Vec<Vec<f64>> {
        discrete_or_empty(self.follower_actions())
    }

    /// Local Jacobians of a deterministic transition; `None` for games that
    /// are not differentiable.
    fn local_jacobians(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Option<LocalJacobians> {
        None
    }

    /// `∂φ/∂s` (rows per feature).
    fn feature_jacobian(&self, _s: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn is_feasible(&self, s: &[f64], a: &[f64], b: &[f64]) -> bool {
        self.constraint(s, a, b).iter().all(|&g| g >= 0.0)
    }
}

fn discrete_or_empty(space: &ActionSpace) -> Vec<Vec<f64>> {
    match space {
        ActionSpace::Discrete(a) => a.clone(),
        ActionSpace::Box { .. } => Vec::new(),
    }
}

/// Feasibility of each follower deviation after leader action `a`.
pub fn feasible_mask<G: MarkovGame + ?Sized>(game: &G, s: &[f64], a: &[f64]) -> Vec<bool> {
    game.follower_deviations()
        .iter()
        .map(|b| game.is_feasible(s, a, b))
        .collect()
}

pub(crate) fn game_seed(rng: &mut Rng) -> u64 {
    use rand::RngCore;
    rng.next_u64()
}
