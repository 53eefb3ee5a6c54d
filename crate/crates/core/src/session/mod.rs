//! Transport-free play session: one human seat against agent seats.
//!
//! The session consumes [`ClientMessage`]s and queues [`ServerMessage`]s for
//! the human; the caller moves bytes and enforces the turn timer, calling
//! [`Session::timeout`] when it expires. Agents act synchronously inside
//! [`Session::handle`] and [`Session::timeout`] until the human is to act.

pub mod protocol;

use std::time::Duration;

use crate::cards::{classify_move, Hand, Move, Variant};
use crate::game::ReplayRecord;
use crate::game::{Bid, GameState, Phase, Seat, Settlement};
use crate::evaluation::Policy;
use crate::rng::{derive_seed, GameRng};

pub use protocol::{
    parse_client, BidEntry, ClientMessage, ErrorCode, GameMode, PlayEntry, ServerMessage, View, PROTOCOL_VERSION,
};

pub const DEFAULT_TURN_TIMEOUT: Duration = Duration::from_secs(60);

/// Redeals after an all-pass auction before the first bidder is forced to 1.
pub const MAX_REDEALS: u32 = 8;

pub fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Bidding => "bidding",
        Phase::Play => "play",
        Phase::Terminal => "terminal",
        Phase::Redeal => "redeal",
    }
}

/// Everything `seat` may see of `state`.
pub fn view_for(state: &GameState, seat: Seat) -> View {
    let landlord = state.landlord();
    View {
        seat: seat.index() as u8,
        phase: phase_name(state.phase()).to_string(),
        hand: state.hand(seat).to_string(),
        counts: [0, 1, 2].map(|i| state.hands()[i].len()),
        first_bidder: state.first_bidder().index() as u8,
        bids: state
            .bids()
            .iter()
            .map(|&(s, b)| BidEntry {
                seat: s.index() as u8,
                value: b.value(),
            })
            .collect(),
        landlord: landlord.map(|l| l.index() as u8),
        landlord_cards: landlord
            .filter(|_| state.variant().hidden_size() > 0)
            .map(|_| state.deal().hidden.to_string()),
        history: state
            .history()
            .iter()
            .map(|(s, m)| PlayEntry {
                seat: s.index() as u8,
                cards: m.cards().to_string(),
            })
            .collect(),
        current: state.current().index() as u8,
        multiplier: state.stake_unit(),
    }
}

/// The legal move whose card multiset is `cards`, first in move order.
pub fn move_from_cards(cards: &str, legal: &[Move]) -> Result<Move, String> {
    let hand: Hand = cards.parse().map_err(|e| format!("{e}"))?;
    if let Some(m) = legal.iter().find(|m| *m.cards() == hand) {
        return Ok(*m);
    }
    match classify_move(&hand) {
        Ok(m) => Err(format!("{m} is not legal here")),
        Err(e) => Err(format!("{e}")),
    }
}

/// One finished or abandoned game, from the human seat's side.
#[derive(Clone, PartialEq, Debug)]
pub struct GameLog {
    pub seed: u64,
    pub human: Seat,
    pub settlement: Option<Settlement>,
    pub record: Option<ReplayRecord>,
    /// Plies played before a void.
    pub plies: usize,
}

pub struct Session<'a> {
    id: String,
    human: Seat,
    agent: &'a dyn Policy,
    base_seed: u64,
    variant: Variant,
    greeted: bool,
    game: Option<GameState>,
    game_seed: u64,
    agent_rng: GameRng,
    started: u64,
    redeals: u32,
    turn_timeout: Option<Duration>,
    outbox: Vec<ServerMessage>,
    events: Vec<String>,
    finished: Vec<GameLog>,
}

impl<'a> Session<'a> {
    pub fn new(id: impl Into<String>, human: Seat, agent: &'a dyn Policy, base_seed: u64) -> Session<'a> {
        Session {
            id: id.into(),
            human,
            agent,
            base_seed,
            variant: Variant::Standard,
            greeted: false,
            game: None,
            game_seed: 0,
            agent_rng: GameRng::new(0),
            started: 0,
            redeals: 0,
            turn_timeout: Some(DEFAULT_TURN_TIMEOUT),
            outbox: Vec::new(),
            events: Vec::new(),
            finished: Vec::new(),
        }
    }

    /// Deck for subsequent games; auction mode needs the standard deck.
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    /// Human turn limit announced in `your_turn`; `None` disables it.
    pub fn with_turn_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.turn_timeout = timeout;
        self
    }

    pub fn turn_timeout(&self) -> Option<Duration> {
        self.turn_timeout
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn human(&self) -> Seat {
        self.human
    }

    pub fn state(&self) -> Option<&GameState> {
        self.game.as_ref()
    }

    pub fn in_game(&self) -> bool {
        self.game.as_ref().is_some_and(|g| g.phase() != Phase::Terminal)
    }

    /// True while the human owes a bid or move.
    pub fn human_to_act(&self) -> bool {
        self.in_game() && self.game.as_ref().is_some_and(|g| g.current() == self.human)
    }

    pub fn drain(&mut self) -> Vec<ServerMessage> {
        std::mem::take(&mut self.outbox)
    }

    /// Timer expiries and voids, in order.
    pub fn events(&self) -> &[String] {
        &self.events
    }

    pub fn take_finished(&mut self) -> Vec<GameLog> {
        std::mem::take(&mut self.finished)
    }

    fn send(&mut self, msg: ServerMessage) {
        self.outbox.push(msg);
    }

    pub fn handle(&mut self, msg: ClientMessage) {
        match msg {
            ClientMessage::Hello { protocol_version } => {
                if protocol_version != PROTOCOL_VERSION {
                    self.send(ServerMessage::error(
                        ErrorCode::VersionMismatch,
                        format!("server speaks protocol {PROTOCOL_VERSION}, client sent {protocol_version}"),
                    ));
                    return;
                }
                self.greeted = true;
                self.send(ServerMessage::Hello {
                    protocol_version: PROTOCOL_VERSION,
                    session: self.id.clone(),
                });
            }
            _ if !self.greeted => self.send(ServerMessage::error(ErrorCode::NotReady, "send hello first")),
            ClientMessage::NewGame { mode, seed } => self.new_game(mode, seed),
            ClientMessage::Bid { value } => self.human_bid(value),
            ClientMessage::Move { cards } => self.human_move(&cards),
        }
    }

    /// A client frame that failed to parse.
    pub fn reject(&mut self, error: ServerMessage) {
        self.send(error);
    }

    fn new_game(&mut self, mode: GameMode, seed: Option<u64>) {
        if self.in_game() {
            self.send(ServerMessage::error(ErrorCode::WrongPhase, "a game is already in progress"));
            return;
        }
        if mode == GameMode::Auction && !self.variant.has_auction() {
            self.send(ServerMessage::error(ErrorCode::BadRequest, "this deck has no auction"));
            return;
        }
        let seed = seed.unwrap_or_else(|| derive_seed(self.base_seed, self.started));
        self.started += 1;
        self.game_seed = seed;
        self.redeals = 0;
        self.agent_rng = GameRng::new(derive_seed(seed, 0xA6E7));
        let mut pick = GameRng::new(derive_seed(seed, 0x5EA7));
        let seat = Seat::new(pick.index(3) as u8).expect("seat");
        self.game = Some(match mode {
            GameMode::Auction => GameState::new_game(seed, seat),
            GameMode::Assigned => GameState::new_assigned(seed, self.variant, seat),
        });
        self.advance();
    }

    fn game_mut(&mut self) -> &mut GameState {
        self.game.as_mut().expect("in game")
    }

    fn check_turn(&mut self, phase: Phase) -> bool {
        let Some(g) = self.game.as_ref().filter(|g| g.phase() != Phase::Terminal) else {
            self.send(ServerMessage::error(ErrorCode::WrongPhase, "no game in progress"));
            return false;
        };
        if g.phase() != phase {
            let detail = format!("game is in the {} phase", phase_name(g.phase()));
            self.send(ServerMessage::error(ErrorCode::WrongPhase, detail));
            return false;
        }
        if g.current() != self.human {
            let detail = format!("seat {} is to act", g.current().index());
            self.send(ServerMessage::error(ErrorCode::NotYourTurn, detail));
            return false;
        }
        true
    }

    fn human_bid(&mut self, value: u8) {
        if !self.check_turn(Phase::Bidding) {
            return;
        }
        let legal = self.game_mut().legal_bids().expect("bidding");
        match Bid::from_value(value).filter(|b| legal.contains(b)) {
            Some(b) => {
                self.apply_bid(b);
                self.advance();
            }
            None => self.send(ServerMessage::Error {
                code: ErrorCode::IllegalBid,
                detail: format!("bid {value} is not legal here"),
                legal_bids: Some(legal.iter().map(|b| b.value()).collect()),
                legal_moves: None,
            }),
        }
    }

    fn human_move(&mut self, cards: &str) {
        if !self.check_turn(Phase::Play) {
            return;
        }
        let legal = self.game_mut().legal_moves().expect("play");
        match move_from_cards(cards, &legal) {
            Ok(m) => {
                self.game_mut().play_in_place(&m).expect("legal");
                self.advance();
            }
            Err(detail) => self.send(ServerMessage::Error {
                code: ErrorCode::IllegalMove,
                detail,
                legal_bids: None,
                legal_moves: Some(legal.iter().map(|m| m.cards().to_string()).collect()),
            }),
        }
    }

    /// Auto-action for an expired human timer: Pass, or the lowest legal
    /// move when leading.
    pub fn timeout(&mut self) {
        if !self.human_to_act() {
            return;
        }
        let phase = self.game.as_ref().expect("in game").phase();
        let what = if phase == Phase::Bidding {
            self.apply_bid(Bid::Pass);
            "pass".to_string()
        } else {
            let legal = self.game_mut().legal_moves().expect("play");
            let mv = if legal.contains(&Move::pass()) {
                Move::pass()
            } else {
                *legal.iter().min().expect("leader has moves")
            };
            self.game_mut().play_in_place(&mv).expect("legal");
            if mv.is_pass() {
                "pass".to_string()
            } else {
                mv.cards().to_string()
            }
        };
        let line = format!("session {}: seat {} timed out, auto-played {what}", self.id, self.human.index());
        log::info!("{line}");
        self.events.push(line);
        self.advance();
    }

    /// Abandons the current game, if any, recording it as void.
    pub fn void(&mut self, reason: &str) {
        if !self.in_game() {
            return;
        }
        let g = self.game.take().expect("in game");
        let line = format!("session {}: game {} voided: {reason}", self.id, self.game_seed);
        log::warn!("{line}");
        self.events.push(line);
        self.finished.push(GameLog {
            seed: self.game_seed,
            human: self.human,
            settlement: None,
            record: None,
            plies: g.history().len(),
        });
    }

    fn apply_bid(&mut self, bid: Bid) {
        let g = self.game_mut();
        g.bid_in_place(bid).expect("legal bid");
        if g.phase() == Phase::Redeal {
            self.redeal();
        }
    }

    fn redeal(&mut self) {
        let old = self.game.take().expect("in game");
        self.redeals += 1;
        let seed = self.game_seed.wrapping_add(self.redeals as u64);
        let mut g = GameState::new_game(seed, old.first_bidder().next());
        if self.redeals >= MAX_REDEALS {
            g.bid_in_place(Bid::One).expect("opening bid");
            while g.phase() == Phase::Bidding {
                g.bid_in_place(Bid::Pass).expect("pass");
            }
        }
        self.game = Some(g);
    }

    /// Runs agents until the human must act or the game ends, then notifies.
    fn advance(&mut self) {
        loop {
            let g = self.game.as_ref().expect("in game");
            if g.phase() == Phase::Terminal || g.current() == self.human {
                break;
            }
            let seat = g.current();
            match g.phase() {
                Phase::Bidding => {
                    let legal = g.legal_bids().expect("bidding");
                    let b = self.agent.choose_bid(g, &legal, &mut self.agent_rng);
                    let b = if legal.contains(&b) { b } else { Bid::Pass };
                    self.apply_bid(b);
                }
                Phase::Play => {
                    let legal = g.legal_moves().expect("play");
                    let m = self.agent.choose_move(g, &legal, &mut self.agent_rng);
                    let m = if legal.contains(&m) {
                        m
                    } else {
                        log::warn!("session {}: agent at seat {} chose illegal {m}", self.id, seat.index());
                        legal[0]
                    };
                    self.game_mut().play_in_place(&m).expect("legal");
                }
                Phase::Terminal | Phase::Redeal => unreachable!("handled above"),
            }
        }
        let g = self.game.as_ref().expect("in game");
        let timeout_ms = self.turn_timeout.map(|d| d.as_millis() as u64);
        let mut out = vec![ServerMessage::State {
            view: view_for(g, self.human),
        }];
        let mut finished = None;
        match g.phase() {
            Phase::Terminal => {
                let settlement = g.settle().expect("terminal");
                let won = settlement.points[self.human.index()] > 0;
                out.push(ServerMessage::GameOver { settlement, won });
                finished = Some(GameLog {
                    seed: self.game_seed,
                    human: self.human,
                    settlement: Some(settlement),
                    record: Some(ReplayRecord::from_state(g).expect("terminal")),
                    plies: g.history().len(),
                });
            }
            Phase::Bidding => out.push(ServerMessage::YourTurn {
                legal_bids: Some(g.legal_bids().expect("bidding").iter().map(|b| b.value()).collect()),
                legal_moves: None,
                timeout_ms,
            }),
            _ => out.push(ServerMessage::YourTurn {
                legal_bids: None,
                legal_moves: Some(g.legal_moves().expect("play").iter().map(|m| m.cards().to_string()).collect()),
                timeout_ms,
            }),
        }
        self.outbox.extend(out);
        self.finished.extend(finished);
    }
}

#[cfg(test)]
mod tests;
