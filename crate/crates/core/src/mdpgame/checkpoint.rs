use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::policy::{PolicyKind, PolicyParams};

pub const CHECKPOINT_SCHEMA: u32 = 1;

/// Serialized policy: parameters as base64 of little-endian `f64`s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub kind: String,
    /// `[actions, features]` (bilinear), `[states, actions]` (tabular) or
    /// the layer sizes (mlp).
    pub shape: Vec<usize>,
    pub theta: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// Base64 of the little-endian bytes of `values`.
pub fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

/// Inverse of [`encode_f64s`].
pub fn decode_f64s(s: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Checkpoint(format!("not valid base64: {e}")))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Checkpoint(
            "byte length is not a multiple of 8".into(),
        ));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

/// `#[serde(with = "...")]` adapter storing a `Vec<f64>` as base64 so values
/// round-trip bit for bit.
pub mod base64_f64s {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::encode_f64s(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let text = String::deserialize(d)?;
        super::decode_f64s(&text).map_err(D::Error::custom)
    }
}

impl Checkpoint {
    pub fn from_policy(policy: &PolicyParams, metadata: serde_json::Value) -> Self {
        let shape = match &policy.kind {
            PolicyKind::Bilinear => vec![policy.n_out, policy.n_in],
            PolicyKind::TabularSoftmax => vec![policy.n_in, policy.n_out],
            PolicyKind::Mlp { .. } => policy.net().expect("mlp").sizes,
        };
        Self {
            schema_version: CHECKPOINT_SCHEMA,
            kind: policy.kind.name().to_string(),
            shape,
            theta: encode_f64s(&policy.theta),
            metadata,
        }
    }

    pub fn to_policy(&self) -> Result<PolicyParams> {
        if self.schema_version != CHECKPOINT_SCHEMA {
            return Err(Error::Checkpoint(format!(
                "unsupported schema version {} (expected {CHECKPOINT_SCHEMA})",
                self.schema_version
            )));
        }
        let theta = decode_f64s(&self.theta)?;
        let bad_shape =
            || Error::Checkpoint(format!("bad shape {:?} for {}", self.shape, self.kind));
        let policy = match self.kind.as_str() {
            "bilinear" => {
                let [n_out, n_in] = self.shape[..] else {
                    return Err(bad_shape());
                };
                PolicyParams {
                    kind: PolicyKind::Bilinear,
                    theta,
                    n_in,
                    n_out,
                }
            }
            "tabular_softmax" => {
                let [states, actions] = self.shape[..] else {
                    return Err(bad_shape());
                };
                PolicyParams {
                    kind: PolicyKind::TabularSoftmax,
                    theta,
                    n_in: states,
                    n_out: actions,
                }
            }
            "mlp" => {
                if self.shape.len() < 2 {
                    return Err(bad_shape());
                }
                let hidden = &self.shape[1..self.shape.len() - 1];
                let width = hidden.first().copied().unwrap_or(0);
                if hidden.iter().any(|&w| w != width) {
                    return Err(bad_shape());
                }
                PolicyParams {
                    kind: PolicyKind::Mlp {
                        layers: hidden.len(),
                        width,
                    },
                    theta,
                    n_in: self.shape[0],
                    n_out: *self.shape.last().expect("len ≥ 2"),
                }
            }
            other => return Err(Error::Checkpoint(format!("unknown policy kind `{other}`"))),
        };
        policy
            .validate()
            .map_err(|e| Error::Checkpoint(format!("parameter count does not match shape: {e}")))?;
        Ok(policy)
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
