use serde::{Deserialize, Serialize};

use super::{BidSample, BiddingError};
use crate::encoding::BidFeatures;
use crate::networks::{features_matrix, BidNetConfig, BidNetwork, Mode, OptimizerState, RmsProp};
use crate::rng::{derive_seed, GameRng};

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BidTrainConfig {
    pub widths: Vec<usize>,
    pub dropout: Vec<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Share of samples held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for BidTrainConfig {
    fn default() -> Self {
        let net = BidNetConfig::default();
        BidTrainConfig {
            widths: net.widths.clone(),
            dropout: net.dropout.clone(),
            epochs: 20,
            batch_size: 64,
            lr: 1e-3,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

impl BidTrainConfig {
    pub fn net(&self) -> BidNetConfig {
        BidNetConfig {
            widths: self.widths.clone(),
            dropout: self.dropout.clone(),
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct BidTrainReport {
    /// Mean minibatch loss per epoch, with dropout active.
    pub epoch_losses: Vec<f64>,
    /// Inference-mode loss over the training split after the last epoch.
    pub train_loss: f64,
    /// Inference-mode loss over the held-out split; `None` when it is empty.
    pub val_loss: Option<f64>,
    pub train_samples: usize,
    pub val_samples: usize,
}

fn eval_loss(net: &BidNetwork<f32>, samples: &[&BidSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let feats: Vec<BidFeatures> = samples.iter().map(|s| s.features).collect();
    let x = features_matrix::<f32>(&feats);
    let out = net.forward_rows(x.view(), &mut Mode::Infer).expect("bid feature width");
    out.iter()
        .zip(samples)
        .map(|(&v, s)| ((v - s.label) as f64).powi(2))
        .sum::<f64>()
        / samples.len() as f64
}

/// MSE regression of the network output toward the sample labels, RMSprop
/// with the play-network defaults except the learning rate.
pub fn train_bid_network(
    dataset: &[BidSample],
    config: &BidTrainConfig,
) -> Result<(BidNetwork<f32>, BidTrainReport), BiddingError> {
    let batch = config.batch_size.max(1);
    if dataset.len() < batch {
        return Err(BiddingError::EmptyDataset {
            have: dataset.len(),
            need: batch,
        });
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    GameRng::new(derive_seed(config.seed, 1)).shuffle(&mut order);
    let n_val = ((dataset.len() as f64 * config.val_fraction.clamp(0.0, 1.0)) as usize).min(dataset.len() - batch);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train: Vec<&BidSample> = train_idx.iter().map(|&i| &dataset[i]).collect();
    let val: Vec<&BidSample> = val_idx.iter().map(|&i| &dataset[i]).collect();

    let mut net = BidNetwork::<f32>::new(config.net(), &mut GameRng::new(derive_seed(config.seed, 0)));
    let rms = RmsProp {
        lr: config.lr,
        ..RmsProp::default()
    };
    let mut opt = OptimizerState::new(net.seq());
    let mut shuffle = GameRng::new(derive_seed(config.seed, 2));
    let mut dropout = GameRng::new(derive_seed(config.seed, 3));
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut idx: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        shuffle.shuffle(&mut idx);
        let mut sum = 0.0;
        let mut batches = 0;
        for chunk in idx.chunks(batch) {
            let feats: Vec<BidFeatures> = chunk.iter().map(|&i| train[i].features).collect();
            let targets: Vec<f32> = chunk.iter().map(|&i| train[i].label).collect();
            let x = features_matrix::<f32>(&feats);
            let (loss, grads) = net.backward(x.view(), &targets, &mut Mode::Train(&mut dropout))?;
            rms.step(net.seq_mut(), &grads, &mut opt)?;
            sum += loss as f64;
            batches += 1;
        }
        epoch_losses.push(sum / batches.max(1) as f64);
    }
    let report = BidTrainReport {
        epoch_losses,
        train_loss: eval_loss(&net, &train),
        val_loss: (!val.is_empty()).then(|| eval_loss(&net, &val)),
        train_samples: train.len(),
        val_samples: val.len(),
    };
    Ok((net, report))
}
