//! Run directory layout:
//! `out/{config.resolved, metrics.csv, checkpoints/, tables/, figures/}`.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Entries a run may create; `--force` removes exactly these.
const LAYOUT: [&str; 6] = [
    "config.resolved",
    "metrics.csv",
    "solution.json",
    "checkpoints",
    "tables",
    "figures",
];

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    /// Creates `root`, which must be missing or empty unless `force` is set.
    pub fn prepare(root: &Path, force: bool) -> Result<Self, CliError> {
        if root.exists() {
            if !root.is_dir() {
                return Err(CliError::Usage(format!(
                    "{} exists and is not a directory",
                    root.display()
                )));
            }
            let occupied = fs::read_dir(root)?.next().is_some();
            if occupied && !force {
                return Err(CliError::Usage(format!(
                    "output directory {} is not empty (use --force to overwrite)",
                    root.display()
                )));
            }
            for name in LAYOUT {
                let p = root.join(name);
                if p.is_dir() {
                    fs::remove_dir_all(&p)?;
                } else if p.exists() {
                    fs::remove_file(&p)?;
                }
            }
        }
        for sub in ["checkpoints", "tables", "figures"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        fs::write(&p, contents)?;
        Ok(p)
    }
}
