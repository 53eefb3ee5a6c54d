use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::Variant;
use crate::networks::{Arch, QNetConfig, RmsProp};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    /// ±1 by winning side.
    #[default]
    Wp,
    /// ±(multiplier × 2^bombs).
    Score,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected key=value")]
    Syntax { line: usize },
    #[error("config: {0}")]
    Schema(String),
    #[error("config: {0}")]
    Invalid(String),
}

/// Training configuration. Every field has a default, so files only list overrides.
///
/// File formats: a JSON object, or UTF-8 `key = value` lines with `#` comments.
/// Keys are the field names below.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub arch: Arch,
    pub hidden: usize,
    pub depth: usize,
    pub blocks_after_mlp: bool,
    pub block_norm: bool,
    pub variant: Variant,
    pub epsilon: f64,
    pub lr: f64,
    pub alpha: f64,
    pub rms_eps: f64,
    /// Global gradient-norm clip; 0 disables.
    pub max_grad_norm: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub actors: usize,
    /// Learner steps between snapshot publications to the actors.
    pub snapshot_every: u64,
    pub total_steps: u64,
    /// Wall-clock limit in seconds; training stops after the step in progress. 0 disables.
    pub max_secs: f64,
    pub seed: u64,
    pub reward: RewardMode,
    /// Learner steps between WP-vs-random evaluations; 0 disables.
    pub eval_every: u64,
    pub eval_decks: usize,
    /// Learner steps between checkpoints; 0 writes only the initial and final ones.
    pub checkpoint_every: u64,
    /// Single actor interleaved with the learner on one thread.
    pub deterministic: bool,
    /// Append every episode to `episodes.jsonl`.
    pub episode_log: bool,
    /// Include per-ply chosen Q values in the episode log.
    pub verbose: bool,
    /// Bidding during standard-deck training: `scripted`, `heuristic`, or a bid checkpoint path.
    pub bidding: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let net = QNetConfig::default();
        let opt = RmsProp::default();
        TrainConfig {
            arch: net.arch,
            hidden: net.hidden,
            depth: net.depth,
            blocks_after_mlp: net.blocks_after_mlp,
            block_norm: net.block_norm,
            variant: Variant::Standard,
            epsilon: 0.01,
            lr: opt.lr,
            alpha: opt.alpha,
            rms_eps: opt.eps,
            max_grad_norm: opt.max_grad_norm.unwrap_or(0.0),
            batch_size: 32,
            buffer_capacity: 4096,
            actors: 1,
            snapshot_every: 1,
            total_steps: 1000,
            max_secs: 0.0,
            seed: 0,
            reward: RewardMode::Wp,
            eval_every: 0,
            eval_decks: 100,
            checkpoint_every: 0,
            deterministic: true,
            episode_log: false,
            verbose: false,
            bidding: "scripted".into(),
        }
    }
}

impl TrainConfig {
    /// Desk-scale setting on the reduced 24-card game.
    pub fn smoke() -> TrainConfig {
        TrainConfig {
            variant: Variant::Reduced,
            hidden: 64,
            lr: 1e-3,
            total_steps: 3000,
            eval_decks: 1000,
            ..TrainConfig::default()
        }
    }

    pub fn net(&self) -> QNetConfig {
        QNetConfig {
            arch: self.arch,
            hidden: self.hidden,
            depth: self.depth,
            blocks_after_mlp: self.blocks_after_mlp,
            block_norm: self.block_norm,
            ..QNetConfig::default()
        }
    }

    pub fn optimizer(&self) -> RmsProp {
        RmsProp {
            lr: self.lr,
            alpha: self.alpha,
            eps: self.rms_eps,
            max_grad_norm: (self.max_grad_norm > 0.0).then_some(self.max_grad_norm),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.hidden == 0 || self.depth < 2 || self.batch_size == 0 || self.actors == 0 || self.snapshot_every == 0 {
            return bad("hidden, batch_size, actors and snapshot_every must be positive; depth at least 2");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("buffer_capacity must be at least batch_size");
        }
        if !(self.lr >= 0.0 && self.alpha > 0.0 && self.alpha < 1.0 && self.rms_eps > 0.0) {
            return bad("optimizer needs lr >= 0, 0 < alpha < 1, rms_eps > 0");
        }
        if !(self.max_secs >= 0.0 && self.max_secs.is_finite()) {
            return bad("max_secs must be a non-negative number");
        }
        if self.eval_every > 0 && self.eval_decks == 0 {
            return bad("eval_decks must be positive when evaluating");
        }
        if matches!(self.arch, crate::networks::Arch::A(0)) {
            return bad("arch A needs at least one block");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<TrainConfig, ConfigError> {
        let c: TrainConfig = serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Parses `key = value` lines into a JSON object, so both formats share
    /// one schema. Values are read as JSON when possible, else as strings.
    pub fn from_key_values(text: &str) -> Result<TrainConfig, ConfigError> {
        let c: TrainConfig = serde_json::from_value(serde_json::Value::Object(key_value_map(text)?))
            .map_err(|e| ConfigError::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// JSON when the file starts with `{`, key=value otherwise.
    pub fn from_file(path: &Path) -> Result<TrainConfig, ConfigError> {
        TrainConfig::default().with_file(path)
    }

    /// Applies the keys present in a config file on top of `self`.
    pub fn with_file(&self, path: &Path) -> Result<TrainConfig, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let file = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<serde_json::Value>(&text) {
                Ok(serde_json::Value::Object(m)) => m,
                Ok(_) => return Err(ConfigError::Schema("config file must hold a JSON object".into())),
                Err(e) => return Err(ConfigError::Schema(e.to_string())),
            }
        } else {
            key_value_map(&text)?
        };
        let mut value = serde_json::to_value(self).expect("config serializes");
        value.as_object_mut().expect("config is an object").extend(file);
        let c: TrainConfig = serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Applies `key=value` overrides on top of `self`.
    pub fn with_overrides<'a>(&self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<TrainConfig, ConfigError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let map = value.as_object_mut().expect("config is an object");
        for (k, v) in pairs {
            map.insert(k.to_string(), scalar_value(v));
        }
        let c: TrainConfig = serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn key_value_map(text: &str) -> Result<serde_json::Map<String, serde_json::Value>, ConfigError> {
    let mut map = serde_json::Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        map.insert(k.trim().to_string(), scalar_value(v.trim()));
    }
    Ok(map)
}

pub(crate) fn scalar_value(v: &str) -> serde_json::Value {
    let v = v.trim_matches('"');
    match serde_json::from_str::<serde_json::Value>(v) {
        Ok(j @ (serde_json::Value::Number(_) | serde_json::Value::Bool(_))) => j,
        _ => serde_json::Value::String(v.to_string()),
    }
}
