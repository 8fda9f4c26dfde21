//! Run configuration: a TOML file with `env`, `train`, `minmax` and `eval`
//! sections. Dotted keys (`train.outer_iters = 10`) and tables are
//! interchangeable; unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use stackgame_core::algos::TrainConfig;
use stackgame_core::eval::{BellmanConfig, TournamentConfig};
use stackgame_core::minmax::{InnerMode, LambdaCap, LrSchedule, SolverConfig, UpdateRule};
use stackgame_core::reachavoid::ReachAvoidConfig;

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: ReachAvoidConfig,
    pub train: TrainConfig,
    pub minmax: MinmaxSection,
    pub eval: EvalSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MinmaxSection {
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub lr_outer: LrSchedule,
    pub lr_inner: LrSchedule,
    /// `"auto"` or a positive number.
    pub lambda_cap: String,
    pub seed: u64,
    pub target_delta: f64,
    pub inner_mode: InnerMode,
    pub update: UpdateRule,
    /// Oracle noise for the plain `quadratic` problem.
    pub noise: f64,
    /// Leader probes used by the residual report.
    pub eval_budget: usize,
}

impl Default for MinmaxSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            outer_iters: s.outer_iters,
            inner_iters: s.inner_iters,
            lr_outer: s.lr_outer,
            lr_inner: s.lr_inner,
            lambda_cap: "auto".into(),
            seed: s.seed,
            target_delta: s.target_delta,
            inner_mode: s.inner_mode,
            update: s.update,
            noise: 0.05,
            eval_budget: 101,
        }
    }
}

impl MinmaxSection {
    pub fn solver_config(&self) -> Result<SolverConfig, CliError> {
        let lambda_cap = match self.lambda_cap.trim() {
            "auto" => LambdaCap::Auto,
            v => LambdaCap::Fixed(v.parse().map_err(|_| {
                CliError::Usage(format!(
                    "minmax.lambda_cap: expected `auto` or a number, got `{v}`"
                ))
            })?),
        };
        let cfg = SolverConfig {
            outer_iters: self.outer_iters,
            inner_iters: self.inner_iters,
            lr_outer: self.lr_outer,
            lr_inner: self.lr_inner,
            lambda_cap,
            seed: self.seed,
            target_delta: self.target_delta,
            inner_mode: self.inner_mode,
            update: self.update,
        };
        cfg.validate().map_err(CliError::usage)?;
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::Usage("minmax.noise must be nonnegative".into()));
        }
        if self.eval_budget < 2 {
            return Err(CliError::Usage(
                "minmax.eval_budget must be at least 2".into(),
            ));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Seed of Bellman-error and pursuit runs and of random policies.
    pub seed: u64,
    pub pursuit_episodes: usize,
    pub tournament: TournamentConfig,
    pub bellman: BellmanConfig,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            seed: 0,
            pursuit_episodes: 100,
            tournament: TournamentConfig::default(),
            bellman: BellmanConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    /// Applies `--seed` to every section.
    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.train.seed = s;
            self.minmax.seed = s;
            self.eval.seed = s;
        }
        self
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}
