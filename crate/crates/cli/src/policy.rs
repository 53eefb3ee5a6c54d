use std::path::{Path, PathBuf};
use std::sync::Arc;

use ddz_core::bidding::BidStrategy;
use ddz_core::dmc::RoleNets;
use ddz_core::evaluation::{DmcPolicy, Policy, RandomPolicy, RulePolicy};

use crate::error::CliError;

/// Checkpoints `ckpt_<step>.ddz` in `dir`, by step.
pub fn checkpoints_in(dir: &Path) -> Result<Vec<(u64, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        let step = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("ckpt_"))
            .and_then(|n| n.strip_suffix(".ddz"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(step) = step {
            out.push((step, path));
        }
    }
    out.sort();
    Ok(out)
}

pub fn latest_checkpoint(dir: &Path) -> Result<PathBuf, CliError> {
    checkpoints_in(dir)?
        .pop()
        .map(|(_, p)| p)
        .ok_or_else(|| CliError::Data(format!("no ckpt_*.ddz checkpoints in {}", dir.display())))
}

pub fn checkpoint_policy(path: &Path, bidding: &str) -> Result<Arc<dyn Policy>, CliError> {
    let nets = RoleNets::load(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dmc").to_string();
    Ok(Arc::new(DmcPolicy::new(name, Arc::new(nets), BidStrategy::parse(bidding)?)))
}

/// `random`, `rule`, a checkpoint file, or a directory (its latest checkpoint).
pub fn load_policy(spec: &str, bidding: &str) -> Result<Arc<dyn Policy>, CliError> {
    match spec {
        "random" => Ok(Arc::new(RandomPolicy)),
        "rule" => Ok(Arc::new(RulePolicy)),
        path => {
            let p = Path::new(path);
            if p.is_dir() {
                checkpoint_policy(&latest_checkpoint(p)?, bidding)
            } else if p.exists() {
                checkpoint_policy(p, bidding)
            } else {
                Err(CliError::Config(format!("policy {path:?} is neither random, rule nor an existing path")))
            }
        }
    }
}
