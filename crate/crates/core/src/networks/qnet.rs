use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, ArrayView2};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Activation, DenseLayer, Mode, NetError, ResidualBlock, Scalar, Sequential, Stage};
use crate::encoding::{ActionFeatures, StateFeatures, ACTION_FEATURES_WIDTH, STATE_FEATURES_WIDTH};
use crate::rng::GameRng;

/// Q-network layout. `A(k)` inserts `k` residual blocks; `B` replaces the
/// hidden MLP with `depth / 2` blocks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Arch {
    Baseline,
    A(usize),
    B,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Baseline => f.write_str("baseline"),
            Arch::A(k) => write!(f, "A({k})"),
            Arch::B => f.write_str("B"),
        }
    }
}

impl FromStr for Arch {
    type Err = String;

    /// Accepts `baseline`, `B`, `A(4)` and the shorthand `A4`.
    fn from_str(s: &str) -> Result<Arch, String> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "baseline" => return Ok(Arch::Baseline),
            "b" => return Ok(Arch::B),
            _ => {}
        }
        let rest = t
            .strip_prefix('A')
            .or_else(|| t.strip_prefix('a'))
            .ok_or_else(|| format!("unknown architecture `{s}`"))?;
        let digits = rest.trim_start_matches('(').trim_end_matches(')');
        digits
            .parse()
            .map(Arch::A)
            .map_err(|_| format!("unknown architecture `{s}`"))
    }
}

impl Serialize for Arch {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Arch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Arch, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QNetConfig {
    pub arch: Arch,
    pub input: usize,
    pub hidden: usize,
    /// Dense layers in the baseline MLP, head included.
    pub depth: usize,
    pub blocks_after_mlp: bool,
    pub block_norm: bool,
}

impl Default for QNetConfig {
    fn default() -> Self {
        QNetConfig {
            arch: Arch::Baseline,
            input: STATE_FEATURES_WIDTH + ACTION_FEATURES_WIDTH,
            hidden: 512,
            depth: 6,
            blocks_after_mlp: false,
            block_norm: false,
        }
    }
}

impl QNetConfig {
    pub fn descriptor(&self) -> String {
        format!(
            "qnet arch={} input={} hidden={} depth={} blocks_after_mlp={} norm={}",
            self.arch, self.input, self.hidden, self.depth, self.blocks_after_mlp, self.block_norm
        )
    }

    pub fn from_descriptor(s: &str) -> Result<QNetConfig, NetError> {
        let bad = || NetError::CorruptCheckpoint(format!("bad q-network descriptor `{s}`"));
        let mut parts = s.split_whitespace();
        if parts.next() != Some("qnet") {
            return Err(NetError::ArchMismatch {
                expected: "qnet".into(),
                found: s.into(),
            });
        }
        let mut c = QNetConfig::default();
        for kv in parts {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            match k {
                "arch" => c.arch = v.parse().map_err(|_| bad())?,
                "input" => c.input = v.parse().map_err(|_| bad())?,
                "hidden" => c.hidden = v.parse().map_err(|_| bad())?,
                "depth" => c.depth = v.parse().map_err(|_| bad())?,
                "blocks_after_mlp" => c.blocks_after_mlp = v.parse().map_err(|_| bad())?,
                "norm" => c.block_norm = v.parse().map_err(|_| bad())?,
                _ => return Err(bad()),
            }
        }
        Ok(c)
    }

    pub fn residual_blocks(&self) -> usize {
        match self.arch {
            Arch::Baseline => 0,
            Arch::A(k) => k,
            Arch::B => self.depth / 2,
        }
    }
}

/// Weight-layer counts by role, read off the built network.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct LayerSummary {
    pub projection: usize,
    pub block_layers: usize,
    pub hidden_layers: usize,
    pub head: usize,
}

impl LayerSummary {
    pub fn total(&self) -> usize {
        self.projection + self.block_layers + self.hidden_layers + self.head
    }
}

/// Q(s, a) regressor over concatenated state and action features.
#[derive(Clone, Debug, PartialEq)]
pub struct QNetwork<F> {
    config: QNetConfig,
    seq: Sequential<F>,
}

impl<F: Scalar> QNetwork<F> {
    pub fn new(config: QNetConfig, rng: &mut GameRng) -> QNetwork<F> {
        let h = config.hidden;
        let mut seq = Sequential::new();
        let blocks = |seq: &mut Sequential<F>, rng: &mut GameRng| {
            for i in 0..config.residual_blocks() {
                seq.push(format!("block{i}"), Stage::Block(ResidualBlock::new(h, config.block_norm, rng)));
            }
        };
        seq.push("mlp0", Stage::Dense(DenseLayer::new(config.input, h, Activation::Relu, rng)));
        if !config.blocks_after_mlp {
            blocks(&mut seq, rng);
        }
        if config.arch != Arch::B {
            for i in 1..config.depth.saturating_sub(1) {
                seq.push(format!("mlp{i}"), Stage::Dense(DenseLayer::new(h, h, Activation::Relu, rng)));
            }
        }
        if config.blocks_after_mlp {
            blocks(&mut seq, rng);
        }
        seq.push("head", Stage::Dense(DenseLayer::new(h, 1, Activation::Identity, rng)));
        QNetwork { config, seq }
    }

    pub fn zeros(config: QNetConfig) -> QNetwork<F> {
        let mut net = QNetwork::new(config, &mut GameRng::new(0));
        net.seq.visit_mut(&mut |_, v| v.fill(F::zero()));
        net
    }

    pub fn config(&self) -> &QNetConfig {
        &self.config
    }

    pub fn descriptor(&self) -> String {
        self.config.descriptor()
    }

    pub fn seq(&self) -> &Sequential<F> {
        &self.seq
    }

    pub fn seq_mut(&mut self) -> &mut Sequential<F> {
        &mut self.seq
    }

    pub fn num_params(&self) -> usize {
        self.seq.num_params()
    }

    pub fn layer_summary(&self) -> LayerSummary {
        let mut s = LayerSummary {
            projection: 0,
            block_layers: 0,
            hidden_layers: 0,
            head: 0,
        };
        for (name, stage) in self.seq.stages() {
            match (name, stage) {
                ("mlp0", _) => s.projection += 1,
                ("head", _) => s.head += 1,
                (_, Stage::Block(_)) => s.block_layers += 2,
                (_, Stage::Dense(_)) => s.hidden_layers += 1,
                (_, Stage::Dropout(_)) => {}
            }
        }
        s
    }

    /// Forward over a batch of already concatenated rows; returns one Q per row.
    pub fn forward_rows(&self, x: ArrayView2<F>, mode: &mut Mode<'_>) -> Result<Vec<F>, NetError> {
        Ok(self.seq.forward(x, mode)?.column(0).to_vec())
    }

    pub fn forward(
        &self,
        s: &StateFeatures,
        a: &ActionFeatures,
        mode: &mut Mode<'_>,
    ) -> Result<F, NetError> {
        Ok(self.q_values(s.as_slice(), std::slice::from_ref(a), mode)?[0])
    }

    /// Q for one state against many candidate actions. Agrees with
    /// [`QNetwork::forward_rows`] on the concatenated rows up to float
    /// summation order.
    pub fn q_values(
        &self,
        state: &[f32],
        actions: &[ActionFeatures],
        mode: &mut Mode<'_>,
    ) -> Result<Vec<F>, NetError> {
        let width = state.len() + ACTION_FEATURES_WIDTH;
        if width != self.config.input {
            return Err(NetError::ShapeMismatch {
                expected: self.config.input,
                found: width,
            });
        }
        let Some((_, Stage::Dense(first))) = self.seq.stages().next() else {
            return self.forward_rows(concat_rows(state, actions).view(), mode);
        };
        // The state half of the first layer is shared by every candidate.
        let split = state.len();
        let s: Array1<F> = state.iter().map(|&v| F::from(v).expect("feature value")).collect();
        let mut shared = first.weight.slice(s![.., ..split]).dot(&s);
        shared += &first.bias;
        let mut a = Array2::<F>::zeros((actions.len(), ACTION_FEATURES_WIDTH));
        for (mut row, act) in a.rows_mut().into_iter().zip(actions) {
            for (dst, &v) in row.iter_mut().zip(act.0.iter()) {
                *dst = F::from(v).expect("feature value");
            }
        }
        let mut z = a.dot(&first.weight.slice(s![.., split..]).t());
        z += &shared;
        if first.activation == Activation::Relu {
            z.mapv_inplace(|v| if v > F::zero() { v } else { F::zero() });
        }
        Ok(self.seq.forward_tail(1, z, mode).column(0).to_vec())
    }

    pub fn backward(
        &self,
        x: ArrayView2<F>,
        targets: &[F],
        mode: &mut Mode<'_>,
    ) -> Result<(F, Sequential<F>), NetError> {
        self.seq.mse_backward(x, targets, mode)
    }

    pub fn cast<G: Scalar>(&self) -> QNetwork<G> {
        QNetwork {
            config: self.config,
            seq: self.seq.cast(),
        }
    }
}

/// Rows of `[state | action]`, one per action.
pub fn concat_rows<F: Scalar>(state: &[f32], actions: &[ActionFeatures]) -> Array2<F> {
    let width = state.len() + ACTION_FEATURES_WIDTH;
    let mut x = Array2::zeros((actions.len(), width));
    for (mut row, a) in x.rows_mut().into_iter().zip(actions) {
        for (dst, &v) in row.iter_mut().zip(state.iter().chain(a.0.iter())) {
            *dst = F::from(v).expect("feature value");
        }
    }
    x
}
