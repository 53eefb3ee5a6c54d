//! Call scoring: when to bid and how high.
//!
//! A [`BidNetwork`] scores the bid context (own 17 cards plus the opponents'
//! bids so far) and [`BidPolicy`] maps the score to a bid with three
//! thresholds. The network is regressed on rollout outcomes of taking the
//! landlord seat, see [`generate_bid_dataset`].

mod dataset;
mod train;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{Hand, Rank};
use crate::encoding::{encode_bid_context, EncodingError};
use crate::game::{Bid, GameState};
use crate::networks::{BidNetwork, Checkpoint, NetError};
use crate::rng::GameRng;

pub use dataset::{
    generate_bid_dataset, read_dataset, rollout_label, write_dataset, BidSample, DatasetConfig, SampleContext,
    DATASET_MAGIC,
};
pub use train::{train_bid_network, BidTrainConfig, BidTrainReport};

#[derive(Debug, Error)]
pub enum BiddingError {
    #[error("dataset has {have} samples, need at least {need}")]
    EmptyDataset { have: usize, need: usize },
    #[error("bad dataset: {0}")]
    BadDataset(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("thresholds must be strictly increasing, got {0:?}")]
    Thresholds([f32; 3]),
}

pub const DEFAULT_THRESHOLDS: [f32; 3] = [0.0, 0.3, 0.6];

/// Score-to-bid map over a trained network.
#[derive(Clone, Debug, PartialEq)]
pub struct BidPolicy {
    pub net: BidNetwork<f32>,
    pub thresholds: [f32; 3],
}

impl BidPolicy {
    pub fn new(net: BidNetwork<f32>, thresholds: [f32; 3]) -> Result<BidPolicy, BiddingError> {
        let [t1, t2, t3] = thresholds;
        if !(t1 < t2 && t2 < t3) {
            return Err(BiddingError::Thresholds(thresholds));
        }
        Ok(BidPolicy { net, thresholds })
    }

    pub fn load(path: &Path, thresholds: [f32; 3]) -> Result<BidPolicy, BiddingError> {
        BidPolicy::new(BidNetwork::from_checkpoint(&Checkpoint::load(path)?)?, thresholds)
    }

    pub fn score(&self, hand: &Hand, opponent_bids: &[Bid]) -> Result<f32, EncodingError> {
        Ok(self.net.score(&encode_bid_context(hand, opponent_bids)?))
    }

    /// `v < t1` Pass, `t1 ≤ v < t2` one, `t2 ≤ v < t3` two, otherwise three.
    pub fn map_value(&self, v: f32) -> Bid {
        let [t1, t2, t3] = self.thresholds;
        if v.is_nan() || v < t1 {
            Bid::Pass
        } else if v < t2 {
            Bid::One
        } else if v < t3 {
            Bid::Two
        } else {
            Bid::Three
        }
    }
}

/// Highest legal bid not above `wanted`, else Pass. `legal` must contain Pass
/// whenever `wanted` is below every legal bid; legal-bid lists always do.
pub fn clip_bid(wanted: Bid, legal: &[Bid]) -> Bid {
    legal
        .iter()
        .copied()
        .filter(|&b| b <= wanted)
        .max()
        .unwrap_or(Bid::Pass)
}

/// Network decision for a 17-card hand. Callers never reach an opponent bid of
/// 3: it ends the auction before anyone else acts.
pub fn decide_bid(policy: &BidPolicy, hand: &Hand, opponent_bids: &[Bid], legal: &[Bid]) -> Result<Bid, EncodingError> {
    let v = policy.score(hand, opponent_bids)?;
    Ok(clip_bid(policy.map_value(v), legal))
}

/// Rule-of-thumb hand strength: jokers, twos, bombs and aces.
pub fn heuristic_strength(hand: &Hand) -> f32 {
    let c = |r: Rank| hand.count(r) as f32;
    let mut s = 3.0 * c(Rank::RED_JOKER) + 2.0 * c(Rank::BLACK_JOKER) + 1.5 * c(Rank::TWO) + 0.5 * c(Rank::ACE);
    for r in Rank::all().filter(|r| !r.is_joker()) {
        if hand.count(r) == 4 {
            s += 3.0;
        }
    }
    s
}

pub fn heuristic_bid(hand: &Hand, legal: &[Bid]) -> Bid {
    let s = heuristic_strength(hand);
    let wanted = if s >= 8.0 {
        Bid::Three
    } else if s >= 6.0 {
        Bid::Two
    } else if s >= 4.0 {
        Bid::One
    } else {
        Bid::Pass
    };
    clip_bid(wanted, legal)
}

/// Auction behaviour for simulated seats.
#[derive(Clone)]
pub enum BidStrategy {
    /// Bid 1 at the first opportunity, otherwise pass.
    Scripted,
    Heuristic,
    Random,
    Network(Box<BidPolicy>),
}

impl fmt::Debug for BidStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BidStrategy::Scripted => f.write_str("Scripted"),
            BidStrategy::Heuristic => f.write_str("Heuristic"),
            BidStrategy::Random => f.write_str("Random"),
            BidStrategy::Network(p) => write!(f, "Network({})", p.net.descriptor()),
        }
    }
}

impl BidStrategy {
    /// `scripted`, `heuristic`, `random`, or a bid-network checkpoint path.
    pub fn parse(s: &str) -> Result<BidStrategy, BiddingError> {
        Ok(match s {
            "scripted" => BidStrategy::Scripted,
            "heuristic" => BidStrategy::Heuristic,
            "random" => BidStrategy::Random,
            path => BidStrategy::Network(Box::new(BidPolicy::load(Path::new(path), DEFAULT_THRESHOLDS)?)),
        })
    }

    /// A legal bid for the seat to act in `state`.
    pub fn decide(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        let hand = state.hand(state.current());
        match self {
            BidStrategy::Scripted => {
                if legal.contains(&Bid::One) {
                    Bid::One
                } else {
                    Bid::Pass
                }
            }
            BidStrategy::Heuristic => heuristic_bid(hand, legal),
            BidStrategy::Random => legal[rng.index(legal.len())],
            BidStrategy::Network(p) => {
                let prior: Vec<Bid> = state.bids().iter().map(|&(_, b)| b).collect();
                decide_bid(p, hand, &prior, legal).unwrap_or(Bid::Pass)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct ThresholdSweepRow {
    pub value: f32,
    pub bid: Bid,
}

/// Mapped bid at evenly spaced scores over `[lo, hi]`.
pub fn threshold_sweep(policy: &BidPolicy, lo: f32, hi: f32, points: usize) -> Vec<ThresholdSweepRow> {
    (0..points)
        .map(|i| {
            let value = lo + (hi - lo) * i as f32 / (points.max(2) - 1) as f32;
            ThresholdSweepRow {
                value,
                bid: policy.map_value(value),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;
