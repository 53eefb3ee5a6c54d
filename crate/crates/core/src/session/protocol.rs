//! Wire messages between a play server and one client seat.
//!
//! Every message is a JSON object tagged by `"type"`. Cards use the rank
//! notation `3456789TJQKA2BR` in ascending order, with `""` for a pass. Bids
//! are multipliers, 0 for Pass.
//!
//! Client to server: `hello{protocol_version}`, `new_game{mode, seed?}`,
//! `bid{value}`, `move{cards}`.
//!
//! Server to client: `hello{protocol_version, session}`, `state{view}`,
//! `your_turn{legal_bids | legal_moves, timeout_ms?}`,
//! `error{code, detail, legal_bids?, legal_moves?}`,
//! `game_over{settlement, won}`.

use serde::{Deserialize, Serialize};

use crate::game::Settlement;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameMode {
    /// Full auction; agents bid with their policy.
    #[default]
    Auction,
    /// Landlord seat drawn uniformly from the game seed, no auction.
    Assigned,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Hello {
        protocol_version: u32,
    },
    NewGame {
        #[serde(default)]
        mode: GameMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Bid {
        value: u8,
    },
    Move {
        cards: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    VersionMismatch,
    NotReady,
    NotYourTurn,
    WrongPhase,
    IllegalBid,
    IllegalMove,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BidEntry {
    pub seat: u8,
    pub value: u8,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct PlayEntry {
    pub seat: u8,
    pub cards: String,
}

/// What one seat may know: its own cards, everyone's counts, the public
/// auction and play history, and the landlord's extra cards once revealed.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct View {
    pub seat: u8,
    pub phase: String,
    pub hand: String,
    pub counts: [usize; 3],
    pub first_bidder: u8,
    pub bids: Vec<BidEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landlord: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landlord_cards: Option<String>,
    pub history: Vec<PlayEntry>,
    pub current: u8,
    pub multiplier: i64,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServerMessage {
    Hello {
        protocol_version: u32,
        session: String,
    },
    State {
        view: View,
    },
    YourTurn {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        legal_bids: Option<Vec<u8>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        legal_moves: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_ms: Option<u64>,
    },
    Error {
        code: ErrorCode,
        detail: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        legal_bids: Option<Vec<u8>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        legal_moves: Option<Vec<String>>,
    },
    GameOver {
        settlement: Settlement,
        won: bool,
    },
}

impl ServerMessage {
    pub fn error(code: ErrorCode, detail: impl Into<String>) -> ServerMessage {
        ServerMessage::Error {
            code,
            detail: detail.into(),
            legal_bids: None,
            legal_moves: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

impl ClientMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }
}

/// Parses one client frame; malformed input maps to `error{bad_request}`.
pub fn parse_client(text: &str) -> Result<ClientMessage, ServerMessage> {
    serde_json::from_str(text).map_err(|e| ServerMessage::error(ErrorCode::BadRequest, e.to_string()))
}
