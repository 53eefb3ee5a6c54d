use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, Dropout, Mode, NetError, Scalar, Sequential, Stage};
use crate::encoding::{BidFeatures, BID_FEATURES_WIDTH};
use crate::rng::GameRng;

/// Layer widths from input to the scalar output.
pub const BID_WIDTHS: [usize; 7] = [BID_FEATURES_WIDTH, 256, 256, 128, 64, 32, 1];

/// Dropout after hidden layers 1-4; layer 5 feeds the head undropped.
pub const BID_DEFAULT_DROPOUT: [f64; 4] = [0.5, 0.5, 0.3, 0.3];

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BidNetConfig {
    pub widths: Vec<usize>,
    /// Dropout probability after each hidden layer, in order; missing entries mean none.
    pub dropout: Vec<f64>,
}

impl Default for BidNetConfig {
    fn default() -> Self {
        BidNetConfig {
            widths: BID_WIDTHS.to_vec(),
            dropout: BID_DEFAULT_DROPOUT.to_vec(),
        }
    }
}

impl BidNetConfig {
    pub fn descriptor(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        let drops: Vec<String> = self.dropout.iter().map(|p| p.to_string()).collect();
        format!("bidnet widths={} dropout={}", widths.join(","), drops.join(","))
    }

    pub fn from_descriptor(s: &str) -> Result<BidNetConfig, NetError> {
        let bad = || NetError::CorruptCheckpoint(format!("bad bid-network descriptor `{s}`"));
        let mut parts = s.split_whitespace();
        if parts.next() != Some("bidnet") {
            return Err(NetError::ArchMismatch {
                expected: "bidnet".into(),
                found: s.into(),
            });
        }
        let mut c = BidNetConfig {
            widths: Vec::new(),
            dropout: Vec::new(),
        };
        for kv in parts {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let items = v.split(',').filter(|t| !t.is_empty());
            match k {
                "widths" => c.widths = items.map(|t| t.parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
                "dropout" => c.dropout = items.map(|t| t.parse().map_err(|_| bad())).collect::<Result<_, _>>()?,
                _ => return Err(bad()),
            }
        }
        if c.widths.len() < 2 || *c.widths.last().unwrap() != 1 {
            return Err(bad());
        }
        Ok(c)
    }
}

/// Call-scoring MLP: ReLU hidden layers with dropout, linear scalar head.
#[derive(Clone, Debug, PartialEq)]
pub struct BidNetwork<F> {
    config: BidNetConfig,
    seq: Sequential<F>,
}

impl<F: Scalar> BidNetwork<F> {
    pub fn new(config: BidNetConfig, rng: &mut GameRng) -> BidNetwork<F> {
        let mut seq = Sequential::new();
        let layers = config.widths.len() - 1;
        for i in 0..layers {
            let last = i + 1 == layers;
            let act = if last { Activation::Identity } else { Activation::Relu };
            let name = if last { "head".to_string() } else { format!("fc{i}") };
            seq.push(name, Stage::Dense(DenseLayer::new(config.widths[i], config.widths[i + 1], act, rng)));
            match config.dropout.get(i) {
                Some(&p) if !last && p > 0.0 => seq.push(format!("drop{i}"), Stage::Dropout(Dropout { p })),
                _ => {}
            }
        }
        BidNetwork { config, seq }
    }

    pub fn config(&self) -> &BidNetConfig {
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

    pub fn weight_layers(&self) -> usize {
        self.seq.stages().filter(|(_, s)| matches!(s, Stage::Dense(_))).count()
    }

    pub fn forward_rows(&self, x: ArrayView2<F>, mode: &mut Mode<'_>) -> Result<Vec<F>, NetError> {
        Ok(self.seq.forward(x, mode)?.column(0).to_vec())
    }

    /// Inference-mode score of one bid context.
    pub fn score(&self, features: &BidFeatures) -> F {
        let x = features_matrix::<F>(std::slice::from_ref(features));
        self.forward_rows(x.view(), &mut Mode::Infer).expect("bid feature width")[0]
    }

    pub fn backward(
        &self,
        x: ArrayView2<F>,
        targets: &[F],
        mode: &mut Mode<'_>,
    ) -> Result<(F, Sequential<F>), NetError> {
        self.seq.mse_backward(x, targets, mode)
    }
}

pub fn features_matrix<F: Scalar>(features: &[BidFeatures]) -> Array2<F> {
    let mut x = Array2::zeros((features.len(), BID_FEATURES_WIDTH));
    for (mut row, f) in x.rows_mut().into_iter().zip(features) {
        for (dst, v) in row.iter_mut().zip(f.flatten()) {
            *dst = F::from(v).expect("feature value");
        }
    }
    x
}
