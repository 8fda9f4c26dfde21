//! Loading policies from checkpoint or training-state files.

use std::fs;
use std::path::{Path, PathBuf};

use stackgame_core::algos::TrainState;
use stackgame_core::mdpgame::{Checkpoint, PolicyParams, Role};

use crate::error::CliError;

/// Reads a policy checkpoint, or the `role` policy of a training state.
pub fn load_policy(path: &Path, role: Role) -> Result<PolicyParams, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Failed(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: stackgame_core::Error| CliError::Failed(format!("{}: {e}", path.display()));
    if let Ok(ck) = Checkpoint::from_json(&text) {
        return ck.to_policy().map_err(bad);
    }
    let state = TrainState::from_json(&text).map_err(|_| {
        CliError::Failed(format!(
            "{}: neither a policy checkpoint nor a training state",
            path.display()
        ))
    })?;
    match role {
        Role::Leader => state.leader_policy(),
        Role::Follower => state.follower_policy(),
    }
    .map_err(bad)
}

/// Splits `NAME=PATH`; a bare path is named after its file stem.
pub fn named_path(arg: &str) -> Result<(String, PathBuf), CliError> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => {
            Ok((name.to_string(), PathBuf::from(path)))
        }
        Some(_) => Err(CliError::Usage(format!("expected NAME=PATH, got `{arg}`"))),
        None => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .filter(|s| !s.is_empty())
                .ok_or_else(|| CliError::Usage(format!("expected NAME=PATH, got `{arg}`")))?
                .to_string();
            Ok((name, path))
        }
    }
}
