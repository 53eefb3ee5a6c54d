//! Newline-delimited JSON game records.
//!
//! One line per finished game:
//! `{"seed":..,"first_bidder":..,"bids":[..],"moves":[{"category":..,"cards":..},..],"settlement":{..}}`.
//! Bids are multipliers with 0 for Pass. Role-assigned games (no auction) carry
//! `"landlord"`, reduced-deck games carry `"variant":"reduced"`, and verbose
//! training logs add the chosen move's Q value per ply as `"q"`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Bid, GameError, GameState, Phase, Seat, Settlement};
use crate::cards::{deal_variant, Move, Variant};

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub seed: u64,
    pub first_bidder: Seat,
    #[serde(default, skip_serializing_if = "Variant::is_standard")]
    pub variant: Variant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landlord: Option<Seat>,
    pub bids: Vec<Bid>,
    pub moves: Vec<Move>,
    pub settlement: Settlement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f32>>,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: malformed record: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: bid {index}: {source}")]
    Bid {
        line: usize,
        index: usize,
        #[source]
        source: GameError,
    },
    #[error("line {line}: ply {ply}: {source}")]
    Move {
        line: usize,
        ply: usize,
        #[source]
        source: GameError,
    },
    #[error("line {line}: {detail}")]
    Inconsistent { line: usize, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl ReplayRecord {
    /// Builds the record of a finished game dealt from its seed.
    pub fn from_state(state: &GameState) -> Result<ReplayRecord, GameError> {
        let settlement = state.settle()?;
        let assigned = state.bids().is_empty();
        Ok(ReplayRecord {
            seed: state.deal().seed,
            first_bidder: state.first_bidder(),
            variant: state.variant(),
            landlord: if assigned { state.landlord() } else { None },
            bids: state.bids().iter().map(|&(_, b)| b).collect(),
            moves: state.history().iter().map(|&(_, m)| m).collect(),
            settlement,
            q: None,
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("replay records serialize")
    }

    pub fn from_line(line: &str) -> Result<ReplayRecord, serde_json::Error> {
        serde_json::from_str(line)
    }

    /// Re-plays the record through the rules engine and checks the outcome.
    /// `line` only labels errors.
    pub fn replay(&self, line: usize) -> Result<GameState, ReplayError> {
        let deal = deal_variant(self.seed, self.variant);
        let mut state = match self.landlord {
            Some(seat) => {
                if !self.bids.is_empty() {
                    return Err(ReplayError::Inconsistent {
                        line,
                        detail: "assigned landlord with auction bids".into(),
                    });
                }
                GameState::with_landlord(deal, seat)
            }
            None => {
                if !self.variant.has_auction() {
                    return Err(ReplayError::Inconsistent {
                        line,
                        detail: "variant has no auction but no landlord given".into(),
                    });
                }
                GameState::from_deal(deal, self.first_bidder)
            }
        };
        for (index, bid) in self.bids.iter().enumerate() {
            state
                .bid_in_place(*bid)
                .map_err(|source| ReplayError::Bid { line, index, source })?;
        }
        if state.phase() != Phase::Play {
            return Err(ReplayError::Inconsistent {
                line,
                detail: format!("auction ended in phase {:?}", state.phase()),
            });
        }
        for (ply, mv) in self.moves.iter().enumerate() {
            state
                .play_in_place(mv)
                .map_err(|source| ReplayError::Move { line, ply, source })?;
        }
        let settled = state.settle().map_err(|_| ReplayError::Inconsistent {
            line,
            detail: "game did not reach a terminal state".into(),
        })?;
        if settled != self.settlement {
            return Err(ReplayError::Inconsistent {
                line,
                detail: format!("settlement {:?} does not match recorded {:?}", settled, self.settlement),
            });
        }
        if let Some(q) = &self.q {
            if q.len() != self.moves.len() {
                return Err(ReplayError::Inconsistent {
                    line,
                    detail: format!("{} q values for {} moves", q.len(), self.moves.len()),
                });
            }
        }
        Ok(state)
    }
}

pub fn write_replays<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a ReplayRecord>,
) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_line())?;
    }
    Ok(())
}

/// Parses every non-empty line; line numbers are 1-based.
pub fn read_replays<R: BufRead>(input: R) -> Result<Vec<(usize, ReplayRecord)>, ReplayError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = ReplayRecord::from_line(&line).map_err(|source| ReplayError::Parse { line: i + 1, source })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}
