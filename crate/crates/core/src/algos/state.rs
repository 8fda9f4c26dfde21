use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdpgame::{base64_f64s, Checkpoint, PolicyParams, ValueBaseline};
use crate::rng::stream;

use super::{Algo, TrainConfig, TrainRecord};

pub const TRAIN_STATE_SCHEMA: u32 = 1;

/// Stream index reserved for drawing initial parameters.
pub(crate) const INIT_STREAM: u64 = u64::MAX - 1;
/// Stream index reserved for the baseline's initial weights.
pub(crate) const BASELINE_STREAM: u64 = u64::MAX - 2;

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub schema_version: u32,
    pub algo: Algo,
    pub seed: u64,
    /// Completed outer iterations.
    pub iteration: usize,
    pub leader: Checkpoint,
    pub follower: Checkpoint,
    #[serde(with = "base64_f64s")]
    pub lambda: Vec<f64>,
    pub lambda_cap: f64,
    pub sum_lr: f64,
    #[serde(with = "base64_f64s")]
    pub sum_x: Vec<f64>,
    #[serde(with = "base64_f64s")]
    pub sum_y: Vec<f64>,
    #[serde(with = "base64_f64s")]
    pub sum_lambda: Vec<f64>,
    /// Baseline weights (REINFORCE variants).
    #[serde(default, with = "option_b64")]
    pub baseline: Option<Vec<f64>>,
    pub records: Vec<TrainRecord>,
}

mod option_b64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::mdpgame::{decode_f64s, encode_f64s};

    pub fn serialize<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|w| encode_f64s(w)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| decode_f64s(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

impl TrainState {
    pub fn leader_policy(&self) -> Result<PolicyParams> {
        self.leader.to_policy()
    }

    pub fn follower_policy(&self) -> Result<PolicyParams> {
        self.follower.to_policy()
    }

    /// Baseline network of a REINFORCE run.
    pub fn baseline_network(&self, n_in: usize, width: usize) -> Result<Option<ValueBaseline>> {
        let Some(w) = &self.baseline else {
            return Ok(None);
        };
        let mut b = ValueBaseline::new(n_in, width, &mut stream(0, 0));
        if b.w.len() != w.len() {
            return Err(Error::Checkpoint(format!(
                "baseline has {} weights, expected {}",
                w.len(),
                b.w.len()
            )));
        }
        b.w.clone_from(w);
        Ok(Some(b))
    }

    pub(crate) fn check_compatible(&self, cfg: &TrainConfig) -> Result<()> {
        if self.schema_version != TRAIN_STATE_SCHEMA {
            return Err(Error::Checkpoint(format!(
                "unsupported training state schema {} (expected {TRAIN_STATE_SCHEMA})",
                self.schema_version
            )));
        }
        if self.algo != cfg.algo {
            return Err(Error::Checkpoint(format!(
                "snapshot was written by {}, not {}",
                self.algo, cfg.algo
            )));
        }
        if self.seed != cfg.seed {
            return Err(Error::Checkpoint(format!(
                "snapshot seed {} differs from configured seed {}",
                self.seed, cfg.seed
            )));
        }
        if self.records.len() != self.iteration {
            return Err(Error::Checkpoint(
                "record count does not match iteration".into(),
            ));
        }
        let dims_ok = self.sum_x.len() == self.leader_policy()?.theta.len()
            && self.sum_y.len() == self.follower_policy()?.theta.len()
            && self.sum_lambda.len() == self.lambda.len();
        if !dims_ok {
            return Err(Error::Checkpoint(
                "snapshot dimensions are inconsistent".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Running state shared by both training loops.
pub(crate) struct Progress {
    pub leader: PolicyParams,
    pub follower: PolicyParams,
    pub lambda: Vec<f64>,
    pub sum_lr: f64,
    pub sum_x: Vec<f64>,
    pub sum_y: Vec<f64>,
    pub sum_lambda: Vec<f64>,
    pub records: Vec<TrainRecord>,
}

impl Progress {
    pub fn snapshot(&self, cfg: &TrainConfig, baseline: Option<&ValueBaseline>) -> TrainState {
        let meta = |role: &str| serde_json::json!({ "role": role, "algo": cfg.algo.name(), "iteration": self.records.len() });
        TrainState {
            schema_version: TRAIN_STATE_SCHEMA,
            algo: cfg.algo,
            seed: cfg.seed,
            iteration: self.records.len(),
            leader: Checkpoint::from_policy(&self.leader, meta("leader")),
            follower: Checkpoint::from_policy(&self.follower, meta("follower")),
            lambda: self.lambda.clone(),
            lambda_cap: cfg.lambda_cap,
            sum_lr: self.sum_lr,
            sum_x: self.sum_x.clone(),
            sum_y: self.sum_y.clone(),
            sum_lambda: self.sum_lambda.clone(),
            baseline: baseline.map(|b| b.w.clone()),
            records: self.records.clone(),
        }
    }

    pub fn from_state(s: &TrainState) -> Result<Self> {
        Ok(Self {
            leader: s.leader_policy()?,
            follower: s.follower_policy()?,
            lambda: s.lambda.clone(),
            sum_lr: s.sum_lr,
            sum_x: s.sum_x.clone(),
            sum_y: s.sum_y.clone(),
            sum_lambda: s.sum_lambda.clone(),
            records: s.records.clone(),
        })
    }

    pub fn fresh(leader: PolicyParams, follower: PolicyParams, k: usize) -> Self {
        Self {
            sum_x: vec![0.0; leader.theta.len()],
            sum_y: vec![0.0; follower.theta.len()],
            leader,
            follower,
            lambda: vec![0.0; k],
            sum_lr: 0.0,
            sum_lambda: vec![0.0; k],
            records: Vec::new(),
        }
    }

    /// Adds the pre-update iterate with weight `w`.
    pub fn accumulate(&mut self, w: f64, x: &[f64], y: &[f64], lambda: &[f64]) {
        self.sum_lr += w;
        for (s, v) in [
            (&mut self.sum_x, x),
            (&mut self.sum_y, y),
            (&mut self.sum_lambda, lambda),
        ] {
            for (a, &b) in s.iter_mut().zip(v) {
                *a += w * b;
            }
        }
    }

    pub fn averages(&self) -> (PolicyParams, PolicyParams) {
        if self.sum_lr > 0.0 {
            let avg = |s: &[f64]| s.iter().map(|v| v / self.sum_lr).collect::<Vec<_>>();
            (
                self.leader.with_theta(&avg(&self.sum_x)),
                self.follower.with_theta(&avg(&self.sum_y)),
            )
        } else {
            (self.leader.clone(), self.follower.clone())
        }
    }
}
