//! Reach-avoid pursuit game between two Dubins cars on a square plane.
//!
//! The defender (leader) starts in front of a goal ball on the lower edge;
//! the attacker (follower) tries to reach the goal without being caught.
//! Each car turns by at most `ω` per step and then moves a fixed distance.
//! Turns are `−1, 0, +1` multiples of `ω` in discrete mode and any value in
//! `[−1, 1]` in continuous mode (used by bilinear policies).
//!
//! State layout: `[defender x, y, θ, attacker x, y, θ, step]`.

mod kinematics;
mod render;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::mdpgame::{ActionSpace, LocalJacobians, MarkovGame, StepStatus};
use crate::rng::Rng;

pub use kinematics::{
    advance, bounce, captured, displacement, features, goal_gap, in_goal, safety, split,
    state_reward, wrap_angle, wrap_signed, CarState,
};
pub use render::{render_svg, write_trajectory_csv};

/// Number of policy features.
pub const NUM_FEATURES: usize = 13;
/// Length of the state vector.
pub const STATE_DIM: usize = 7;
/// The three turn actions.
pub const TURNS: [f64; 3] = [-1.0, 0.0, 1.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Capture is ruled out by the coupling constraint.
    #[default]
    StackelbergHard,
    /// Capture is penalized in the reward and ends the episode.
    GneSoft,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    #[default]
    ReachDistance,
    ReachProbability,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Next-step distance between the cars minus the capture radius.
    #[default]
    Hard,
    /// `exp(distance to the capture ball) − 1 − attacker displacement`.
    Exponential,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    /// Turns in `[−1, 1]`; deviations and shielding use `{−1, 0, 1}`.
    #[default]
    Continuous,
    Discrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReachAvoidConfig {
    pub env_min: f64,
    pub env_max: f64,
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub capture_radius: f64,
    pub speed: f64,
    pub turn_angle_deg: f64,
    pub max_steps: usize,
    pub discount: f64,
    pub reward_mode: RewardMode,
    pub reward_kind: RewardKind,
    pub target_bonus: f64,
    pub capture_penalty: f64,
    pub constraint: ConstraintKind,
    pub action_mode: ActionMode,
    /// The defender never moves.
    pub static_defender: bool,
}

impl Default for ReachAvoidConfig {
    fn default() -> Self {
        Self {
            env_min: -3.0,
            env_max: 3.0,
            goal_center: [0.0, -3.0],
            goal_radius: 1.0,
            capture_radius: 0.3,
            speed: 0.25,
            turn_angle_deg: 30.0,
            max_steps: 50,
            discount: 0.99,
            reward_mode: RewardMode::StackelbergHard,
            reward_kind: RewardKind::ReachDistance,
            target_bonus: 200.0,
            capture_penalty: 200.0,
            constraint: ConstraintKind::Hard,
            action_mode: ActionMode::Continuous,
            static_defender: false,
        }
    }
}

impl ReachAvoidConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("env: {m}")));
        if !(self.env_min < self.env_max) {
            return bad("env_min must be below env_max");
        }
        if !(self.capture_radius > 0.0 && self.capture_radius < self.goal_radius) {
            return bad("need 0 < capture_radius < goal_radius");
        }
        if !(self.speed > 0.0) {
            return bad("speed must be positive");
        }
        if !(self.turn_angle_deg > 0.0 && self.turn_angle_deg < 180.0) {
            return bad("turn_angle_deg must lie in (0, 180)");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be at least 1");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount must lie in (0, 1)");
        }
        if self.target_bonus < 0.0 || self.capture_penalty < 0.0 {
            return bad("bonus and penalty must be nonnegative");
        }
        Ok(())
    }
}

/// The reach-avoid game.
#[derive(Clone, Debug, PartialEq)]
pub struct ReachAvoid {
    cfg: ReachAvoidConfig,
    space: ActionSpace,
}

const JAC_VARS: usize = 8;
type D = Dual<JAC_VARS>;

impl ReachAvoid {
    pub fn new(cfg: ReachAvoidConfig) -> Result<Self> {
        cfg.validate()?;
        let space = match cfg.action_mode {
            ActionMode::Continuous => ActionSpace::Box {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
            ActionMode::Discrete => ActionSpace::Discrete(TURNS.iter().map(|&t| vec![t]).collect()),
        };
        Ok(Self { cfg, space })
    }

    pub fn config(&self) -> &ReachAvoidConfig {
        &self.cfg
    }

    /// Same game with a different reward mode.
    pub fn with_mode(&self, mode: RewardMode) -> Self {
        let mut g = self.clone();
        g.cfg.reward_mode = mode;
        g
    }

    /// Attacker turns from `{−1, 0, 1}` that keep the next step safe after
    /// the defender's turn `defender_turn`.
    pub fn feasible_actions(&self, s: &[f64], defender_turn: f64) -> Vec<f64> {
        TURNS
            .iter()
            .copied()
            .filter(|&b| advance(&s[..6], defender_turn, b, &self.cfg).3 >= 0.0)
            .collect()
    }

    /// Whether the attacker is inside the capture ball in state `s`.
    pub fn is_captured(&self, s: &[f64]) -> bool {
        let (d, a) = split(&s[..6]);
        captured(&d, &a, &self.cfg)
    }

    pub fn is_reached(&self, s: &[f64]) -> bool {
        let (_, a) = split(&s[..6]);
        in_goal(&a, &self.cfg)
    }
}

/// Defender turn from `{−1, 0, 1}` that minimizes its next distance to the
/// attacker's current position; ties (within `1e-12`) go to `0`, then `−1`.
pub fn pursuit_defender(s: &[f64], cfg: &ReachAvoidConfig) -> f64 {
    let (d, a) = split(&s[..6]);
    let mut best = (f64::INFINITY, 0.0);
    for turn in [0.0, -1.0, 1.0] {
        let dist = displacement(d, turn, cfg).distance(&a);
        if dist < best.0 - 1e-12 {
            best = (dist, turn);
        }
    }
    best.1
}

/// Defender fixed at `(0, −2)` heading up; attacker uniform on
/// `[env_min, env_max] × [0, env_max]` heading down.
pub fn initial_state(rng: &mut Rng, cfg: &ReachAvoidConfig) -> Vec<f64> {
    let ax = rng.gen_range(cfg.env_min..=cfg.env_max);
    let ay = rng.gen_range(0.0..=cfg.env_max);
    let half = std::f64::consts::FRAC_PI_2;
    vec![0.0, -2.0, half, ax, ay, 3.0 * half, 0.0]
}

impl MarkovGame for ReachAvoid {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn feature_dim(&self) -> usize {
        NUM_FEATURES
    }

    fn leader_actions(&self) -> &ActionSpace {
        &self.space
    }

    fn follower_actions(&self) -> &ActionSpace {
        &self.space
    }

    fn num_constraints(&self) -> usize {
        match self.cfg.reward_mode {
            RewardMode::StackelbergHard => 1,
            RewardMode::GneSoft => 0,
        }
    }

    fn discount(&self) -> f64 {
        self.cfg.discount
    }

    fn horizon(&self) -> usize {
        self.cfg.max_steps
    }

    fn reward_bound(&self) -> f64 {
        let diameter2 = 2.0 * (self.cfg.env_max - self.cfg.env_min).powi(2);
        self.cfg
            .target_bonus
            .max(self.cfg.capture_penalty)
            .max(diameter2)
    }

    fn initial_state(&self, rng: &mut Rng) -> Vec<f64> {
        initial_state(rng, &self.cfg)
    }

    fn features(&self, s: &[f64]) -> Vec<f64> {
        features(&s[..6], &self.cfg)
    }

    fn reward(&self, s: &[f64], a: &[f64], b: &[f64]) -> f64 {
        advance(&s[..6], a[0], b[0], &self.cfg).2
    }

    fn constraint(&self, s: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
        if self.num_constraints() == 0 {
            return Vec::new();
        }
        vec![advance(&s[..6], a[0], b[0], &self.cfg).3]
    }

    fn transition(
        &self,
        s: &[f64],
        a: &[f64],
        b: &[f64],
        _rng: &mut Rng,
    ) -> (Vec<f64>, StepStatus) {
        let (d, at, _, _) = advance(&s[..6], a[0], b[0], &self.cfg);
        let next = vec![d.x, d.y, d.theta, at.x, at.y, at.theta, s[6] + 1.0];
        let status = if in_goal(&at, &self.cfg) {
            StepStatus::Absorbed
        } else if self.cfg.reward_mode == RewardMode::GneSoft && captured(&d, &at, &self.cfg) {
            StepStatus::Captured
        } else {
            StepStatus::Continue
        };
        (next, status)
    }

    fn elapsed(&self, s: &[f64]) -> usize {
        s[6] as usize
    }

    fn infeasible_reward(&self, _s: &[f64]) -> f64 {
        -self.cfg.capture_penalty
    }

    fn leader_deviations(&self) -> Vec<Vec<f64>> {
        TURNS.iter().map(|&t| vec![t]).collect()
    }

    fn follower_deviations(&self) -> Vec<Vec<f64>> {
        TURNS.iter().map(|&t| vec![t]).collect()
    }

    fn local_jacobians(&self, s: &[f64], a: &[f64], b: &[f64]) -> Option<LocalJacobians> {
        let mut vars = D::seed(&s[..6], 0);
        vars.push(D::variable(a[0], 6));
        vars.push(D::variable(b[0], 7));
        let (d, at, r, g) = advance(&vars[..6], vars[6], vars[7], &self.cfg);
        let next = [d.x, d.y, d.theta, at.x, at.y, at.theta];
        let row_s = |v: &D| {
            let mut row = v.eps[..6].to_vec();
            row.push(0.0);
            row
        };
        let mut dnext_ds: Vec<Vec<f64>> = next.iter().map(row_s).collect();
        let mut step_row = vec![0.0; STATE_DIM];
        step_row[6] = 1.0;
        dnext_ds.push(step_row);
        let mut dnext_da: Vec<Vec<f64>> = next.iter().map(|v| vec![v.eps[6]]).collect();
        dnext_da.push(vec![0.0]);
        let mut dnext_db: Vec<Vec<f64>> = next.iter().map(|v| vec![v.eps[7]]).collect();
        dnext_db.push(vec![0.0]);
        let k = self.num_constraints();
        let mut next_vals: Vec<f64> = next.iter().map(|v| v.re).collect();
        next_vals.push(s[6] + 1.0);
        Some(LocalJacobians {
            next: next_vals,
            reward: r.re,
            constraint: if k == 1 { vec![g.re] } else { Vec::new() },
            dnext_ds,
            dnext_da,
            dnext_db,
            dr_ds: row_s(&r),
            dr_da: vec![r.eps[6]],
            dr_db: vec![r.eps[7]],
            dg_ds: if k == 1 { vec![row_s(&g)] } else { Vec::new() },
            dg_da: if k == 1 {
                vec![vec![g.eps[6]]]
            } else {
                Vec::new()
            },
            dg_db: if k == 1 {
                vec![vec![g.eps[7]]]
            } else {
                Vec::new()
            },
        })
    }

    fn feature_jacobian(&self, s: &[f64]) -> Option<Vec<Vec<f64>>> {
        let vars = D::seed(&s[..6], 0);
        Some(
            features(&vars, &self.cfg)
                .iter()
                .map(|f| {
                    let mut row = f.eps[..6].to_vec();
                    row.push(0.0);
                    row
                })
                .collect(),
        )
    }
}
