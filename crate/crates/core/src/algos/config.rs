use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdpgame::{ConstraintForm, Estimator, MaskMode, PolicyKind};
use crate::minmax::LrSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    NestedPgda,
    SimPgda,
    NestedReinforce,
    SimReinforce,
}

impl Algo {
    pub const ALL: [Algo; 4] = [
        Algo::NestedPgda,
        Algo::SimPgda,
        Algo::NestedReinforce,
        Algo::SimReinforce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algo::NestedPgda => "nested_pgda",
            Algo::SimPgda => "sim_pgda",
            Algo::NestedReinforce => "nested_reinforce",
            Algo::SimReinforce => "sim_reinforce",
        }
    }

    pub fn is_nested(self) -> bool {
        matches!(self, Algo::NestedPgda | Algo::NestedReinforce)
    }

    pub fn is_reinforce(self) -> bool {
        matches!(self, Algo::NestedReinforce | Algo::SimReinforce)
    }

    pub fn estimator(self) -> Estimator {
        if self.is_reinforce() {
            Estimator::Reinforce
        } else {
            Estimator::Pathwise
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    /// Accepts `nested_pgda` as well as `nested-pgda`.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_");
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm `{s}` (expected one of nested_pgda, sim_pgda, nested_reinforce, sim_reinforce)"
                ))
            })
    }
}

/// Policy parameterization chosen in a config; `auto` picks bilinear maps
/// for policy GDA and MLP softmax policies for REINFORCE.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFamily {
    #[default]
    Auto,
    Bilinear,
    Tabular,
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algo: Algo,
    pub outer_iters: usize,
    /// Follower updates per leader update (nested variants only).
    pub inner_iters: usize,
    pub lr_leader: LrSchedule,
    pub lr_follower: LrSchedule,
    pub lr_baseline: LrSchedule,
    pub batch_size: usize,
    /// Multipliers are projected onto `[0, lambda_cap]`.
    pub lambda_cap: f64,
    pub seed: u64,
    pub policy: PolicyFamily,
    pub policy_layers: usize,
    pub policy_width: usize,
    pub baseline_width: usize,
    /// Snapshot interval in outer iterations; `0` disables snapshots.
    pub checkpoint_every: usize,
    /// Box every policy parameter is projected onto.
    pub param_box: (f64, f64),
    pub mask: MaskMode,
    pub constraint_form: ConstraintForm,
    /// Fill `sec` in the records (makes them non-reproducible).
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algo: Algo::NestedPgda,
            outer_iters: 10_000,
            inner_iters: 3,
            lr_leader: LrSchedule::Fixed(1e-3),
            lr_follower: LrSchedule::Fixed(1e-3),
            lr_baseline: LrSchedule::Fixed(1e-3),
            batch_size: 32,
            lambda_cap: 10.0,
            seed: 0,
            policy: PolicyFamily::Auto,
            policy_layers: 4,
            policy_width: 64,
            baseline_width: 64,
            checkpoint_every: 0,
            param_box: (-10.0, 10.0),
            mask: MaskMode::None,
            constraint_form: ConstraintForm::Projected,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iters == 0 {
            return Err(Error::Config("train.outer_iters must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if !(self.lambda_cap > 0.0 && self.lambda_cap.is_finite()) {
            return Err(Error::Config(format!(
                "train.lambda_cap must be positive, got {}",
                self.lambda_cap
            )));
        }
        let (lo, hi) = self.param_box;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!(
                "invalid train.param_box [{lo}, {hi}]"
            )));
        }
        if self.policy == PolicyFamily::Mlp && (self.policy_layers == 0 || self.policy_width == 0) {
            return Err(Error::Config(
                "mlp policies need at least one hidden unit".into(),
            ));
        }
        if self.algo.is_reinforce() && self.baseline_width == 0 {
            return Err(Error::Config(
                "train.baseline_width must be at least 1".into(),
            ));
        }
        self.lr_leader.validate()?;
        self.lr_follower.validate()?;
        self.lr_baseline.validate()
    }

    /// Follower updates per outer iteration.
    pub fn follower_steps(&self) -> usize {
        if self.algo.is_nested() {
            self.inner_iters
        } else {
            1
        }
    }

    /// Independent batches drawn per outer iteration.
    pub fn draws_per_outer(&self) -> u64 {
        if self.algo.is_nested() {
            self.inner_iters as u64 + 1
        } else {
            1
        }
    }

    pub fn policy_kind(&self) -> PolicyKind {
        let mlp = PolicyKind::Mlp {
            layers: self.policy_layers,
            width: self.policy_width,
        };
        match self.policy {
            PolicyFamily::Auto if self.algo.is_reinforce() => mlp,
            PolicyFamily::Auto | PolicyFamily::Bilinear => PolicyKind::Bilinear,
            PolicyFamily::Tabular => PolicyKind::TabularSoftmax,
            PolicyFamily::Mlp => mlp,
        }
    }
}
