//! Rollout-labelled bid contexts and their file format.
//!
//! File layout, little-endian:
//!
//! ```text
//! magic     8 bytes  "DDZBIDS\0"
//! version   u32      1
//! count     u64
//! records   count × 312 bytes:
//!   features  68 × f32   hand matrix (row-major 4×15) then bid matrix (4×2)
//!   label     f32
//!   deal_seed u64
//!   rollout_seed u64
//!   first_bidder, focal, n_prior, prior[0], prior[1]   5 × u8
//!   hand      15 × u8    focal seat's per-rank counts
//! crc32     u32      over everything above
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{heuristic_bid, BiddingError};
use crate::cards::{deal, Deal, Hand, NUM_RANKS};
use crate::encoding::{encode_bid_context, BidFeatures, BID_FEATURES_WIDTH};
use crate::evaluation::Policy;
use crate::game::{Bid, GameState, Phase, Seat};
use crate::rng::{derive_seed, GameRng};

pub const DATASET_MAGIC: &[u8; 8] = b"DDZBIDS\0";
const DATASET_VERSION: u32 = 1;
const RECORD_BYTES: usize = BID_FEATURES_WIDTH * 4 + 4 + 16 + 5 + NUM_RANKS;

/// Where a sample came from; enough to recompute its label.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SampleContext {
    pub deal_seed: u64,
    pub first_bidder: Seat,
    pub focal: Seat,
    pub prior: Vec<Bid>,
    pub rollout_seed: u64,
    pub hand: Hand,
}

#[derive(Clone, PartialEq, Debug)]
pub struct BidSample {
    pub features: BidFeatures,
    /// Mean of ±1 landlord outcomes over the rollouts.
    pub label: f32,
    pub context: SampleContext,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DatasetConfig {
    pub n_deals: usize,
    pub rollouts_per_deal: usize,
    pub seed: u64,
    /// Each rollout decision is uniform random with this probability.
    pub rollout_epsilon: f64,
    pub threads: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_deals: 1000,
            rollouts_per_deal: 8,
            seed: 0,
            rollout_epsilon: 0.1,
            threads: 1,
        }
    }
}

/// Mean landlord result of `rollouts` games in which `focal` takes the
/// landlord seat of `deal`, every seat played by `policy`.
pub fn rollout_label(deal: Deal, focal: Seat, policy: &dyn Policy, rollouts: usize, epsilon: f64, seed: u64) -> f32 {
    let mut total = 0i64;
    for r in 0..rollouts {
        let mut rng = GameRng::new(derive_seed(seed, r as u64));
        let mut state = GameState::with_landlord(deal, focal);
        while state.phase() == Phase::Play {
            let legal = state.legal_moves().expect("play phase");
            let mv = if rng.bernoulli(epsilon) {
                legal[rng.index(legal.len())]
            } else {
                policy.choose_move(&state, &legal, &mut rng)
            };
            let mv = if legal.contains(&mv) { mv } else { legal[0] };
            state.play_in_place(&mv).expect("legal move");
        }
        total += if state.winner() == Some(focal) { 1 } else { -1 };
    }
    total as f32 / rollouts.max(1) as f32
}

/// Samples the auction position of one deal. Seats before the focal one bid
/// with the heuristic bidder; a seat whose bid would close the auction
/// becomes the focal seat instead.
fn sample_context(config: &DatasetConfig, index: usize) -> (Deal, SampleContext) {
    let deal_seed = derive_seed(config.seed, 2 * index as u64);
    let mut ctx = GameRng::new(derive_seed(config.seed, 2 * index as u64 + 1));
    let first = Seat::new(ctx.index(3) as u8).expect("seat");
    let wanted_prior = ctx.index(3);
    let rollout_seed = ctx.next_u64();
    let d = deal(deal_seed);
    let mut state = GameState::from_deal(d, first);
    let mut prior = Vec::new();
    while prior.len() < wanted_prior {
        let legal = state.legal_bids().expect("bidding phase");
        let bid = heuristic_bid(state.hand(state.current()), &legal);
        if bid == Bid::Three {
            break;
        }
        state.bid_in_place(bid).expect("legal bid");
        prior.push(bid);
    }
    let focal = state.current();
    let context = SampleContext {
        deal_seed,
        first_bidder: first,
        focal,
        prior,
        rollout_seed,
        hand: d.hands[focal.index()],
    };
    (d, context)
}

fn make_sample(config: &DatasetConfig, policy: &dyn Policy, index: usize) -> BidSample {
    let (d, context) = sample_context(config, index);
    let label = rollout_label(
        d,
        context.focal,
        policy,
        config.rollouts_per_deal,
        config.rollout_epsilon,
        context.rollout_seed,
    );
    let features = encode_bid_context(&context.hand, &context.prior).expect("17-card hand, at most 2 prior bids");
    BidSample {
        features,
        label,
        context,
    }
}

/// One sample per deal, in deal order regardless of `threads`.
pub fn generate_bid_dataset(policy: &dyn Policy, config: &DatasetConfig) -> Vec<BidSample> {
    let n = config.n_deals;
    let threads = config.threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(|i| make_sample(config, policy, i)).collect();
    }
    let mut out: Vec<Option<BidSample>> = vec![None; n];
    let chunk = n.div_ceil(threads);
    std::thread::scope(|s| {
        for (ci, slots) in out.chunks_mut(chunk).enumerate() {
            s.spawn(move || {
                for (j, slot) in slots.iter_mut().enumerate() {
                    *slot = Some(make_sample(config, policy, ci * chunk + j));
                }
            });
        }
    });
    out.into_iter().map(|s| s.expect("every deal sampled")).collect()
}

pub fn write_dataset(path: &Path, samples: &[BidSample]) -> Result<(), BiddingError> {
    let mut buf = Vec::with_capacity(24 + samples.len() * RECORD_BYTES);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        for v in s.features.flatten() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&s.label.to_le_bytes());
        let c = &s.context;
        buf.extend_from_slice(&c.deal_seed.to_le_bytes());
        buf.extend_from_slice(&c.rollout_seed.to_le_bytes());
        let p = |i: usize| c.prior.get(i).map_or(0, |b| b.value());
        buf.extend_from_slice(&[
            c.first_bidder.index() as u8,
            c.focal.index() as u8,
            c.prior.len() as u8,
            p(0),
            p(1),
        ]);
        buf.extend_from_slice(c.hand.counts());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    let tmp = path.with_extension("tmp");
    std::fs::File::create(&tmp)?.write_all(&buf)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], BiddingError> {
    if buf.len() < n {
        return Err(BiddingError::BadDataset("truncated".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn u64_at(buf: &mut &[u8]) -> Result<u64, BiddingError> {
    Ok(u64::from_le_bytes(take(buf, 8)?.try_into().expect("8 bytes")))
}

fn f32_at(buf: &mut &[u8]) -> Result<f32, BiddingError> {
    Ok(f32::from_le_bytes(take(buf, 4)?.try_into().expect("4 bytes")))
}

/// Reads a dataset, checking the checksum and that every stored feature
/// vector matches the encoding of its stored context.
pub fn read_dataset(path: &Path) -> Result<Vec<BidSample>, BiddingError> {
    let mut all = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut all)?;
    let bad = |m: &str| BiddingError::BadDataset(m.to_string());
    if all.len() < 24 || &all[..8] != DATASET_MAGIC {
        return Err(bad("not a bid dataset"));
    }
    let (body, crc) = all.split_at(all.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
        return Err(bad("checksum mismatch"));
    }
    let mut buf = &body[8..];
    let version = u32::from_le_bytes(take(&mut buf, 4)?.try_into().expect("4 bytes"));
    if version != DATASET_VERSION {
        return Err(BiddingError::BadDataset(format!("unsupported version {version}")));
    }
    let count = u64_at(&mut buf)? as usize;
    if buf.len() != count * RECORD_BYTES {
        return Err(bad("record count does not match length"));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut stored = [0f32; BID_FEATURES_WIDTH];
        for v in stored.iter_mut() {
            *v = f32_at(&mut buf)?;
        }
        let label = f32_at(&mut buf)?;
        let deal_seed = u64_at(&mut buf)?;
        let rollout_seed = u64_at(&mut buf)?;
        let b = take(&mut buf, 5)?;
        let seat = |v: u8| Seat::new(v).ok_or_else(|| BiddingError::BadDataset(format!("record {i}: seat {v}")));
        let bid = |v: u8| Bid::from_value(v).ok_or_else(|| BiddingError::BadDataset(format!("record {i}: bid {v}")));
        let n_prior = b[2] as usize;
        if n_prior > 2 {
            return Err(BiddingError::BadDataset(format!("record {i}: {n_prior} prior bids")));
        }
        let prior = b[3..3 + n_prior].iter().map(|&v| bid(v)).collect::<Result<Vec<_>, _>>()?;
        let counts: [u8; NUM_RANKS] = take(&mut buf, NUM_RANKS)?.try_into().expect("15 bytes");
        let hand = Hand::from_counts(counts).map_err(|e| BiddingError::BadDataset(format!("record {i}: {e}")))?;
        let features = encode_bid_context(&hand, &prior)?;
        if features.flatten() != stored {
            return Err(BiddingError::BadDataset(format!("record {i}: features disagree with context")));
        }
        if !label.is_finite() || !(-1.0..=1.0).contains(&label) {
            return Err(BiddingError::BadDataset(format!("record {i}: label {label}")));
        }
        out.push(BidSample {
            features,
            label,
            context: SampleContext {
                deal_seed,
                first_bidder: seat(b[0])?,
                focal: seat(b[1])?,
                prior,
                rollout_seed,
                hand,
            },
        });
    }
    Ok(out)
}
