//! Small games with known answers, used to check estimators and solvers.

use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;

use super::{ActionSpace, LocalJacobians, MarkovGame, StepStatus};

fn index_actions(n: usize) -> ActionSpace {
    ActionSpace::Discrete((0..n).map(|i| vec![i as f64]).collect())
}

/// One-shot matrix game: the leader picks a row, the follower a column and
/// the follower receives `payoff[row][col]`. Single state, features `[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBandit {
    pub payoff: Vec<Vec<f64>>,
    pub gamma: f64,
    leader: ActionSpace,
    follower: ActionSpace,
}

impl MatrixBandit {
    pub fn new(payoff: Vec<Vec<f64>>) -> Self {
        let rows = payoff.len();
        let cols = payoff.first().map_or(0, Vec::len);
        Self {
            payoff,
            gamma: 0.99,
            leader: index_actions(rows),
            follower: index_actions(cols),
        }
    }

    /// Single-row bandit: only the follower has a choice.
    pub fn arms(rewards: Vec<f64>) -> Self {
        Self::new(vec![rewards])
    }
}

impl MarkovGame for MatrixBandit {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        1
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.leader
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.follower
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        self.gamma
    }
    fn horizon(&self) -> usize {
        1
    }
    fn reward_bound(&self) -> f64 {
        self.payoff
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
    fn initial_state(&self, _rng: &mut Rng) -> Vec<f64> {
        vec![0.0]
    }
    fn features(&self, _s: &[f64]) -> Vec<f64> {
        vec![1.0]
    }
    fn reward(&self, _s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.payoff[a[0] as usize][b[0] as usize]
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        _b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (s.to_vec(), StepStatus::Absorbed)
    }
    fn state_index(&self, _s: &[f64]) -> Option<usize> {
        Some(0)
    }
}

/// Constant-reward chain without choices. The state is the step count `t`;
/// by default the features are `[t mod 2]` (two alternating states), with
/// [`Chain::clocked`] they are `[t / H]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub reward: f64,
    pub gamma: f64,
    pub horizon: usize,
    clock: bool,
    single: ActionSpace,
}

impl Chain {
    pub fn new(reward: f64, gamma: f64, horizon: usize) -> Self {
        Self {
            reward,
            gamma,
            horizon,
            clock: false,
            single: index_actions(1),
        }
    }

    pub fn clocked(reward: f64, gamma: f64, horizon: usize) -> Self {
        Self {
            clock: true,
            ..Self::new(reward, gamma, horizon)
        }
    }
}

impl MarkovGame for Chain {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        1
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.single
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.single
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        self.gamma
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn reward_bound(&self) -> f64 {
        self.reward.abs()
    }
    fn initial_state(&self, _rng: &mut Rng) -> Vec<f64> {
        vec![0.0]
    }
    fn features(&self, s: &[f64]) -> Vec<f64> {
        if self.clock {
            vec![s[0] / self.horizon as f64]
        } else {
            vec![s[0] % 2.0]
        }
    }
    fn reward(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> f64 {
        self.reward
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        _b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (vec![s[0] + 1.0], StepStatus::Continue)
    }
    fn elapsed(&self, s: &[f64]) -> usize {
        s[0] as usize
    }
    fn state_index(&self, s: &[f64]) -> Option<usize> {
        let t = s[0] as usize;
        Some(if self.clock { t } else { t % 2 })
    }
}

/// One-step game with payoff `a² + b (+ σz)` and coupling `1 − a − b ≥ 0`
/// on `a, b ∈ [0, 1]`. Its min-max value is `0.75` at `a = b = 0.5`.
///
/// The state is `[z]` with `z ~ N(0, 1)`; it only enters the reward.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticStepGame {
    pub sigma: f64,
    unit: ActionSpace,
}

impl QuadraticStepGame {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            unit: ActionSpace::Box {
                lo: vec![0.0],
                hi: vec![1.0],
            },
        }
    }
}

impl MarkovGame for QuadraticStepGame {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        0
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.unit
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.unit
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn discount(&self) -> f64 {
        0.99
    }
    fn horizon(&self) -> usize {
        1
    }
    fn reward_bound(&self) -> f64 {
        2.0 + 10.0 * self.sigma
    }
    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        if self.sigma == 0.0 {
            vec![0.0]
        } else {
            vec![StandardNormal.sample(rng)]
        }
    }
    fn features(&self, _s: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn reward(&self, s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        a[0] * a[0] + b[0] + self.sigma * s[0]
    }
    fn constraint(&self, _s: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        vec![1.0 - a[0] - b[0]]
    }
    fn transition(
        &self,
        s: &[f64],
        _a: &[f64],
        _b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (s.to_vec(), StepStatus::Continue)
    }
    fn local_jacobians(&self, s: &[f64], a: &[f64], b: &[f64]) -> Option<LocalJacobians> {
        Some(LocalJacobians {
            next: s.to_vec(),
            reward: self.reward(s, a, b),
            constraint: self.constraint(s, a, b),
            dnext_ds: vec![vec![1.0]],
            dnext_da: vec![vec![0.0]],
            dnext_db: vec![vec![0.0]],
            dr_ds: vec![self.sigma],
            dr_da: vec![2.0 * a[0]],
            dr_db: vec![1.0],
            dg_ds: vec![vec![0.0]],
            dg_da: vec![vec![-1.0]],
            dg_db: vec![vec![-1.0]],
        })
    }
    fn feature_jacobian(&self, _s: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(Vec::new())
    }
}

/// Two-step game with affine dynamics `s' = s + a + b` from `s₀ = 0.5` and
/// reward `−(s − 1)² + 2a² − b²`, discount `0.9`, actions in `[−10, 10]`.
///
/// With open-loop (feature-free) bilinear policies the payoff is concave in
/// the follower parameter and the marginal is convex in the leader's.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineConcaveGame {
    space: ActionSpace,
}

impl Default for AffineConcaveGame {
    fn default() -> Self {
        Self {
            space: ActionSpace::Box {
                lo: vec![-10.0],
                hi: vec![10.0],
            },
        }
    }
}

impl AffineConcaveGame {
    pub const S0: f64 = 0.5;
    pub const GAMMA: f64 = 0.9;

    /// Closed-form payoff for constant actions `a`, `b`.
    pub fn payoff(a: f64, b: f64) -> f64 {
        (0..2)
            .map(|t| {
                let s = Self::S0 + t as f64 * (a + b);
                Self::GAMMA.powi(t) * (-(s - 1.0).powi(2) + 2.0 * a * a - b * b)
            })
            .sum()
    }

    /// Follower best response to a constant leader action.
    pub fn best_response(a: f64) -> f64 {
        -Self::GAMMA * (Self::S0 + a - 1.0) / (1.0 + 2.0 * Self::GAMMA)
    }
}

impl MarkovGame for AffineConcaveGame {
    fn state_dim(&self) -> usize {
        1
    }
    fn feature_dim(&self) -> usize {
        0
    }
    fn leader_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn follower_actions(&self) -> &ActionSpace {
        &self.space
    }
    fn num_constraints(&self) -> usize {
        0
    }
    fn discount(&self) -> f64 {
        Self::GAMMA
    }
    fn horizon(&self) -> usize {
        2
    }
    fn reward_bound(&self) -> f64 {
        1500.0
    }
    fn initial_state(&self, _rng: &mut Rng) -> Vec<f64> {
        vec![Self::S0]
    }
    fn features(&self, _s: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn reward(&self, s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        -(s[0] - 1.0).powi(2) + 2.0 * a[0] * a[0] - b[0] * b[0]
    }
    fn constraint(&self, _s: &[f64], _a: &[f64], _b: &[f64]) -> Vec<f64> {
        Vec::new()
    }
    fn transition(
        &self,
        s: &[f64],
        a: &[f64],
        b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        (vec![s[0] + a[0] + b[0]], StepStatus::Continue)
    }
    fn local_jacobians(&self, s: &[f64], a: &[f64], b: &[f64]) -> Option<LocalJacobians> {
        Some(LocalJacobians {
            next: vec![s[0] + a[0] + b[0]],
            reward: self.reward(s, a, b),
            constraint: Vec::new(),
            dnext_ds: vec![vec![1.0]],
            dnext_da: vec![vec![1.0]],
            dnext_db: vec![vec![1.0]],
            dr_ds: vec![-2.0 * (s[0] - 1.0)],
            dr_da: vec![4.0 * a[0]],
            dr_db: vec![-2.0 * b[0]],
            dg_ds: Vec::new(),
            dg_da: Vec::new(),
            dg_db: Vec::new(),
        })
    }
    fn feature_jacobian(&self, _s: &[f64]) -> Option<Vec<Vec<f64>>> {
        Some(Vec::new())
    }
}
