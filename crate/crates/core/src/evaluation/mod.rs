//! Duplicate-deck tournaments between two policies.
//!
//! Every deck is played twice on the same deal with the roles swapped, so deal
//! luck cancels. In role-assigned mode the landlord seat is fixed per deck and
//! the auction is skipped. In auction mode A owns one seat and B the other two;
//! game 2 swaps them, and A's game-2 result is the complement of B's solo seat.

mod human;
mod policies;
mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cards::{Move, Variant};
use crate::game::ReplayRecord;
use crate::game::{Bid, GameState, Phase, Seat, Side};
use crate::rng::{derive_seed, GameRng};

pub use human::{vs_human_session, Disconnected, HumanGame, HumanOutcome, HumanTally, HumanTransport};
pub use policies::{DmcPolicy, RandomPolicy, RulePolicy, WithBidding};
pub use table::{wp_csv, wp_table, WpRow, WP_CSV_HEADER};

/// A player. One policy may own several seats; it only sees what
/// `state` exposes to the seat to act through the encoders and counts.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;
    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move;
    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid;
}

impl<P: Policy + ?Sized> Policy for Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        (**self).choose_move(state, legal, rng)
    }
    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        (**self).choose_bid(state, legal, rng)
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        (**self).choose_move(state, legal, rng)
    }
    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        (**self).choose_bid(state, legal, rng)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("policy {policy} chose illegal move {action} at ply {ply}")]
    IllegalPolicyMove {
        policy: String,
        state: Box<GameState>,
        action: String,
        ply: usize,
    },
    #[error("policy {policy} chose illegal bid {action}")]
    IllegalPolicyBid {
        policy: String,
        state: Box<GameState>,
        action: String,
    },
    #[error("auction mode needs the standard deck")]
    AuctionNeedsStandard,
    #[error("at least one deck is required")]
    NoDecks,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    #[default]
    Role,
    Auction,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Role => "role",
            MatchMode::Auction => "auction",
        })
    }
}

impl FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "role" => Ok(MatchMode::Role),
            "auction" => Ok(MatchMode::Auction),
            other => Err(format!("unknown match mode {other:?} (role|auction)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MatchConfig {
    pub decks: usize,
    pub seed: u64,
    pub mode: MatchMode,
    pub variant: Variant,
    pub threads: usize,
    pub keep_records: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            decks: 100,
            seed: 0,
            mode: MatchMode::Role,
            variant: Variant::Standard,
            threads: 1,
            keep_records: false,
        }
    }
}

/// One game from A's point of view.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct GameOutcome {
    pub a_side: Side,
    pub a_won: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DeckOutcome {
    pub deck: usize,
    pub seed: u64,
    pub games: [GameOutcome; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub a: String,
    pub b: String,
    pub mode: MatchMode,
    pub decks: usize,
    pub outcomes: Vec<DeckOutcome>,
    /// Two records per deck in play order, when requested.
    pub records: Vec<ReplayRecord>,
}

impl MatchResult {
    fn tally(&self, side: Option<Side>) -> (usize, usize) {
        let mut games = 0;
        let mut wins = 0;
        for g in self.outcomes.iter().flat_map(|d| d.games.iter()) {
            if side.map_or(true, |s| s == g.a_side) {
                games += 1;
                wins += g.a_won as usize;
            }
        }
        (wins, games)
    }

    pub fn games(&self) -> usize {
        2 * self.outcomes.len()
    }

    pub fn wins_as_landlord(&self) -> usize {
        self.tally(Some(Side::Landlord)).0
    }

    pub fn wins_as_peasants(&self) -> usize {
        self.tally(Some(Side::Peasants)).0
    }

    fn ratio((wins, games): (usize, usize)) -> f64 {
        if games == 0 {
            0.0
        } else {
            wins as f64 / games as f64
        }
    }

    /// Games won by A over all games.
    pub fn wp(&self) -> f64 {
        Self::ratio(self.tally(None))
    }

    pub fn wp_landlord(&self) -> f64 {
        Self::ratio(self.tally(Some(Side::Landlord)))
    }

    pub fn wp_peasants(&self) -> f64 {
        Self::ratio(self.tally(Some(Side::Peasants)))
    }

    pub fn wp_ci(&self) -> (f64, f64) {
        let (w, n) = self.tally(None);
        wilson_interval(w, n, 1.959_963_984_540_054)
    }

    pub fn wp_landlord_ci(&self) -> (f64, f64) {
        let (w, n) = self.tally(Some(Side::Landlord));
        wilson_interval(w, n, 1.959_963_984_540_054)
    }

    pub fn wp_peasants_ci(&self) -> (f64, f64) {
        let (w, n) = self.tally(Some(Side::Peasants));
        wilson_interval(w, n, 1.959_963_984_540_054)
    }

    pub fn summary(&self) -> String {
        let (lo, hi) = self.wp_ci();
        format!(
            "{} vs {} ({} mode, {} decks): WP {:.4} [{:.4}, {:.4}]  landlord {:.4}  peasants {:.4}",
            self.a,
            self.b,
            self.mode,
            self.decks,
            self.wp(),
            lo,
            hi,
            self.wp_landlord(),
            self.wp_peasants()
        )
    }
}

/// Wilson score interval for `wins` successes out of `n`.
pub fn wilson_interval(wins: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = wins as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

struct Seats<'a> {
    owners: [&'a dyn Policy; 3],
}

/// Plays `state` to the end with a fresh per-seat stream, so repeated games on
/// one deck feed each seat the same random numbers.
fn play_out(mut state: GameState, seats: &Seats<'_>, deck_seed: u64) -> Result<GameState, EvalError> {
    let mut rngs: Vec<GameRng> = (0..3).map(|s| GameRng::new(derive_seed(deck_seed, 1 + s))).collect();
    while state.phase() == Phase::Bidding {
        let seat = state.current();
        let legal = state.legal_bids().expect("bidding phase");
        let policy = seats.owners[seat.index()];
        let bid = policy.choose_bid(&state, &legal, &mut rngs[seat.index()]);
        if !legal.contains(&bid) {
            return Err(EvalError::IllegalPolicyBid {
                policy: policy.name().to_string(),
                state: Box::new(state),
                action: format!("{}", bid.value()),
            });
        }
        state.bid_in_place(bid).expect("checked legal");
    }
    while state.phase() == Phase::Play {
        let seat = state.current();
        let legal = state.legal_moves().expect("play phase");
        let policy = seats.owners[seat.index()];
        let mv = policy.choose_move(&state, &legal, &mut rngs[seat.index()]);
        if !legal.contains(&mv) {
            return Err(EvalError::IllegalPolicyMove {
                policy: policy.name().to_string(),
                ply: state.history().len(),
                state: Box::new(state),
                action: mv.to_string(),
            });
        }
        state.play_in_place(&mv).expect("checked legal");
    }
    Ok(state)
}

/// Redeals tried in auction mode before the deck falls back to a forced opening bid.
const AUCTION_REDEALS: u64 = 8;

fn auction_game(deck_seed: u64, first: Seat, seats: &Seats<'_>) -> Result<GameState, EvalError> {
    for k in 0..AUCTION_REDEALS {
        let state = GameState::new_game(deck_seed.wrapping_add(k), first);
        let done = play_out(state, seats, derive_seed(deck_seed, k))?;
        if done.phase() == Phase::Terminal {
            return Ok(done);
        }
    }
    let mut state = GameState::new_game(deck_seed.wrapping_add(AUCTION_REDEALS), first);
    state.bid_in_place(Bid::One).expect("opening bid");
    while state.phase() == Phase::Bidding {
        state.bid_in_place(Bid::Pass).expect("pass");
    }
    play_out(state, seats, derive_seed(deck_seed, AUCTION_REDEALS))
}

fn side_won(state: &GameState, seat: Seat) -> (Side, bool) {
    let settlement = state.settle().expect("terminal");
    let side = if state.landlord() == Some(seat) {
        Side::Landlord
    } else {
        Side::Peasants
    };
    (side, side == settlement.winner_side)
}

fn opposite(side: Side) -> Side {
    match side {
        Side::Landlord => Side::Peasants,
        Side::Peasants => Side::Landlord,
    }
}

fn play_deck(
    a: &dyn Policy,
    b: &dyn Policy,
    config: &MatchConfig,
    deck: usize,
) -> Result<(DeckOutcome, [ReplayRecord; 2]), EvalError> {
    let seed = derive_seed(config.seed, deck as u64);
    let solo = Seat::new((deck % 3) as u8).expect("seat");
    let seating = |single: &'static str| -> [&dyn Policy; 3] {
        let (x, y) = if single == "a" { (a, b) } else { (b, a) };
        let mut owners = [y; 3];
        owners[solo.index()] = x;
        owners
    };
    let (g1, g2) = match config.mode {
        MatchMode::Role => {
            let g1 = play_out(
                GameState::new_assigned(seed, config.variant, solo),
                &Seats { owners: seating("a") },
                seed,
            )?;
            let g2 = play_out(
                GameState::new_assigned(seed, config.variant, solo),
                &Seats { owners: seating("b") },
                seed,
            )?;
            (g1, g2)
        }
        MatchMode::Auction => {
            let g1 = auction_game(seed, solo, &Seats { owners: seating("a") })?;
            let g2 = auction_game(seed, solo, &Seats { owners: seating("b") })?;
            (g1, g2)
        }
    };
    let (side1, won1) = side_won(&g1, solo);
    let (b_side2, b_won2) = side_won(&g2, solo);
    let outcome = DeckOutcome {
        deck,
        seed,
        games: [
            GameOutcome {
                a_side: side1,
                a_won: won1,
            },
            GameOutcome {
                a_side: opposite(b_side2),
                a_won: !b_won2,
            },
        ],
    };
    let records = [
        ReplayRecord::from_state(&g1).expect("terminal"),
        ReplayRecord::from_state(&g2).expect("terminal"),
    ];
    Ok((outcome, records))
}

/// Paired-deck match of A against B; see the module docs for seating.
pub fn duplicate_match(a: &dyn Policy, b: &dyn Policy, config: &MatchConfig) -> Result<MatchResult, EvalError> {
    if config.decks == 0 {
        return Err(EvalError::NoDecks);
    }
    if config.mode == MatchMode::Auction && config.variant != Variant::Standard {
        return Err(EvalError::AuctionNeedsStandard);
    }
    let threads = config.threads.clamp(1, config.decks);
    let mut per_deck: Vec<Option<(DeckOutcome, [ReplayRecord; 2])>> = vec![None; config.decks];
    if threads == 1 {
        for (deck, slot) in per_deck.iter_mut().enumerate() {
            *slot = Some(play_deck(a, b, config, deck)?);
        }
    } else {
        let chunk = config.decks.div_ceil(threads);
        std::thread::scope(|s| -> Result<(), EvalError> {
            let handles: Vec<_> = per_deck
                .chunks_mut(chunk)
                .enumerate()
                .map(|(ci, slots)| {
                    s.spawn(move || -> Result<(), EvalError> {
                        for (j, slot) in slots.iter_mut().enumerate() {
                            *slot = Some(play_deck(a, b, config, ci * chunk + j)?);
                        }
                        Ok(())
                    })
                })
                .collect();
            for h in handles {
                h.join().expect("evaluation worker panicked")?;
            }
            Ok(())
        })?;
    }
    let mut outcomes = Vec::with_capacity(config.decks);
    let mut records = Vec::new();
    for (o, r) in per_deck.into_iter().map(|x| x.expect("every deck played")) {
        outcomes.push(o);
        if config.keep_records {
            records.extend(r);
        }
    }
    Ok(MatchResult {
        a: a.name().to_string(),
        b: b.name().to_string(),
        mode: config.mode,
        decks: config.decks,
        outcomes,
        records,
    })
}
