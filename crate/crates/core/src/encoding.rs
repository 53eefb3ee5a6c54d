//! Fixed-width numeric features for the networks.
//!
//! Card multisets become a 4×15 thermometer matrix: column `r` has its first
//! `count(r)` rows set, so jokers only ever use row 0. Matrices flatten row-major
//! (`index = row * 15 + column`).
//!
//! Play-phase state layout (1,195 values):
//!
//! | block                                   | width |
//! |-----------------------------------------|-------|
//! | viewer's hand                           | 60    |
//! | union of the two other hands            | 60    |
//! | most recent non-Pass move               | 60    |
//! | cards left, next seat then previous seat | 2×20 |
//! | bombs played (one-hot, capped at 14)    | 15    |
//! | every card played so far                | 60    |
//! | last 15 moves, oldest first, zero-padded | 15×60 |
//!
//! The union of the other hands is public information: it equals the deck minus
//! the viewer's hand minus every played card, so it is computed that way and
//! never looks at the concealed hands themselves.

use std::fmt::Write as _;

use thiserror::Error;

use crate::cards::{Hand, Move, Rank, NUM_RANKS};
use crate::game::{Bid, GameState, Phase, Seat};

pub const CARD_MATRIX_WIDTH: usize = 4 * NUM_RANKS;
pub const BID_SCORE_WIDTH: usize = 8;
pub const BID_FEATURES_WIDTH: usize = CARD_MATRIX_WIDTH + BID_SCORE_WIDTH;
pub const CARDS_LEFT_WIDTH: usize = 20;
pub const BOMBS_WIDTH: usize = 15;
pub const HISTORY_MOVES: usize = 15;
pub const STATE_FEATURES_WIDTH: usize =
    4 * CARD_MATRIX_WIDTH + 2 * CARDS_LEFT_WIDTH + BOMBS_WIDTH + HISTORY_MOVES * CARD_MATRIX_WIDTH;
pub const ACTION_FEATURES_WIDTH: usize = CARD_MATRIX_WIDTH;

/// Named sub-blocks of the state vector as (label, offset, width).
pub const STATE_BLOCKS: [(&str, usize, usize); 7] = [
    ("own_hand", 0, 60),
    ("others_union", 60, 60),
    ("last_move", 120, 60),
    ("cards_left", 180, 40),
    ("bombs", 220, 15),
    ("played", 235, 60),
    ("history", 295, 900),
];

const RANK_HEADER: &str = "3 4 5 6 7 8 9 T J Q K A 2 B R";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("bid context needs a 17-card hand, got {0}")]
    HandSize(usize),
    #[error("at most two opponent bids, got {0}")]
    TooManyBids(usize),
    #[error("state encoding requires the play phase, found {0:?}")]
    WrongPhase(Phase),
    #[error("matrix column {column} is not a thermometer code")]
    NotThermometer { column: usize },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct CardMatrix {
    cells: [[u8; NUM_RANKS]; 4],
}

impl CardMatrix {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row][col]
    }

    pub fn total(&self) -> usize {
        self.cells.iter().flatten().map(|&v| v as usize).sum()
    }

    pub fn write_to(&self, out: &mut [f32]) {
        for (row, cells) in self.cells.iter().enumerate() {
            for (col, &v) in cells.iter().enumerate() {
                out[row * NUM_RANKS + col] = v as f32;
            }
        }
    }

    pub fn flatten(&self) -> [f32; CARD_MATRIX_WIDTH] {
        let mut out = [0.0; CARD_MATRIX_WIDTH];
        self.write_to(&mut out);
        out
    }

    pub fn grid(&self) -> String {
        let mut s = format!("    {RANK_HEADER}\n");
        for (row, cells) in self.cells.iter().enumerate() {
            let _ = write!(s, "r{row} ");
            for v in cells {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn encode_hand(hand: &Hand) -> CardMatrix {
    let mut m = CardMatrix::default();
    for (col, &count) in hand.counts().iter().enumerate() {
        for row in 0..count as usize {
            m.cells[row][col] = 1;
        }
    }
    m
}

/// Inverse of [`encode_hand`]: sums each column after checking its shape.
pub fn decode_hand(m: &CardMatrix) -> Result<Hand, EncodingError> {
    let mut counts = [0u8; NUM_RANKS];
    for (col, count) in counts.iter_mut().enumerate() {
        let column: Vec<u8> = (0..4).map(|row| m.cells[row][col]).collect();
        let n = column.iter().take_while(|&&v| v == 1).count();
        if column[n..].iter().any(|&v| v != 0) {
            return Err(EncodingError::NotThermometer { column: col });
        }
        *count = n as u8;
    }
    Hand::from_counts(counts).map_err(|_| EncodingError::NotThermometer {
        column: counts
            .iter()
            .enumerate()
            .position(|(i, &c)| c > Rank::new(i as u8).map_or(0, |r| r.copies()))
            .unwrap_or(0),
    })
}

/// Rows index the call (Pass, 1, 2, 3), columns the opponents in the order they bid.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct BidScoreMatrix {
    cells: [[u8; 2]; 4],
}

impl BidScoreMatrix {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row][col]
    }

    pub fn grid(&self) -> String {
        let mut s = String::from("      opp0 opp1\n");
        for (row, label) in ["Pass", "1", "2", "3"].iter().enumerate() {
            let _ = writeln!(s, "{label:<5} {:>4} {:>4}", self.cells[row][0], self.cells[row][1]);
        }
        s
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct BidFeatures {
    pub hand: CardMatrix,
    pub scores: BidScoreMatrix,
}

impl BidFeatures {
    pub fn flatten(&self) -> [f32; BID_FEATURES_WIDTH] {
        let mut out = [0.0; BID_FEATURES_WIDTH];
        self.hand.write_to(&mut out[..CARD_MATRIX_WIDTH]);
        for row in 0..4 {
            for col in 0..2 {
                out[CARD_MATRIX_WIDTH + row * 2 + col] = self.scores.cells[row][col] as f32;
            }
        }
        out
    }
}

pub fn encode_bid_context(hand: &Hand, opponent_bids: &[Bid]) -> Result<BidFeatures, EncodingError> {
    if hand.len() != 17 {
        return Err(EncodingError::HandSize(hand.len()));
    }
    if opponent_bids.len() > 2 {
        return Err(EncodingError::TooManyBids(opponent_bids.len()));
    }
    let mut scores = BidScoreMatrix::default();
    for (col, bid) in opponent_bids.iter().enumerate() {
        scores.cells[bid.value() as usize][col] = 1;
    }
    Ok(BidFeatures {
        hand: encode_hand(hand),
        scores,
    })
}

/// Fixed-width play-phase observation; see the module docs for the layout.
#[derive(Clone, PartialEq, Debug)]
pub struct StateFeatures(Vec<f32>);

impl StateFeatures {
    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn block(&self, label: &str) -> Option<&[f32]> {
        STATE_BLOCKS
            .iter()
            .find(|(l, _, _)| *l == label)
            .map(|&(_, off, w)| &self.0[off..off + w])
    }

    pub fn from_vec(values: Vec<f32>) -> Option<StateFeatures> {
        (values.len() == STATE_FEATURES_WIDTH).then_some(StateFeatures(values))
    }
}

pub fn encode_state(state: &GameState, viewer: Seat) -> Result<StateFeatures, EncodingError> {
    let mut out = vec![0.0; STATE_FEATURES_WIDTH];
    encode_state_into(state, viewer, &mut out)?;
    Ok(StateFeatures(out))
}

/// Writes the state encoding into `out[..STATE_FEATURES_WIDTH]`, which must be zeroed.
pub fn encode_state_into(state: &GameState, viewer: Seat, out: &mut [f32]) -> Result<(), EncodingError> {
    if state.phase() != Phase::Play {
        return Err(EncodingError::WrongPhase(state.phase()));
    }
    let own = *state.hand(viewer);
    let played = state.played_cards();
    let others = state
        .variant()
        .deck()
        .minus(&own)
        .and_then(|h| h.minus(&played))
        .expect("own hand and played cards come from the deck");

    encode_hand(&own).write_to(&mut out[0..60]);
    encode_hand(&others).write_to(&mut out[60..120]);
    if let Some((_, last)) = state.history().iter().rev().find(|(_, m)| !m.is_pass()) {
        encode_hand(last.cards()).write_to(&mut out[120..180]);
    }
    for (i, seat) in [viewer.next(), viewer.prev()].into_iter().enumerate() {
        let left = state.hand(seat).len();
        if (1..=CARDS_LEFT_WIDTH).contains(&left) {
            out[180 + i * CARDS_LEFT_WIDTH + left - 1] = 1.0;
        }
    }
    out[220 + (state.bomb_count() as usize).min(BOMBS_WIDTH - 1)] = 1.0;
    encode_hand(&played).write_to(&mut out[235..295]);
    let history = state.history();
    let recent = &history[history.len().saturating_sub(HISTORY_MOVES)..];
    let first_slot = HISTORY_MOVES - recent.len();
    for (i, (_, m)) in recent.iter().enumerate() {
        let off = 295 + (first_slot + i) * CARD_MATRIX_WIDTH;
        encode_hand(m.cards()).write_to(&mut out[off..off + CARD_MATRIX_WIDTH]);
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ActionFeatures(pub [f32; ACTION_FEATURES_WIDTH]);

/// The move's cards as a flattened matrix; Pass is all zeros.
pub fn encode_action(mv: &Move) -> ActionFeatures {
    ActionFeatures(encode_hand(mv.cards()).flatten())
}

/// Labeled text dump of a state vector, one block per section.
pub fn state_grid(features: &StateFeatures) -> String {
    let mut s = String::new();
    for &(label, off, width) in &STATE_BLOCKS {
        let values = &features.0[off..off + width];
        match label {
            "cards_left" => {
                let _ = writeln!(s, "[{label}]");
                for (i, chunk) in values.chunks(CARDS_LEFT_WIDTH).enumerate() {
                    let hot = chunk.iter().position(|&v| v == 1.0).map(|p| p + 1).unwrap_or(0);
                    let _ = writeln!(s, "opponent{i} = {hot}");
                }
            }
            "bombs" => {
                let hot = values.iter().position(|&v| v == 1.0).unwrap_or(0);
                let _ = writeln!(s, "[{label}]\nplayed = {hot}");
            }
            "history" => {
                for (i, chunk) in values.chunks(CARD_MATRIX_WIDTH).enumerate() {
                    let _ = writeln!(s, "[history {i:02}]");
                    s.push_str(&matrix_from_slice(chunk).grid());
                }
            }
            _ => {
                let _ = writeln!(s, "[{label}]");
                s.push_str(&matrix_from_slice(values).grid());
            }
        }
    }
    s
}

fn matrix_from_slice(values: &[f32]) -> CardMatrix {
    let mut m = CardMatrix::default();
    for row in 0..4 {
        for col in 0..NUM_RANKS {
            m.cells[row][col] = (values[row * NUM_RANKS + col] != 0.0) as u8;
        }
    }
    m
}
