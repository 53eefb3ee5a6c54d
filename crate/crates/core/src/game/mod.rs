//! Three-player DouDizhu state machine: auction, play, terminal detection and
//! settlement.

mod replay;

pub use replay::{read_replays, write_replays, ReplayError, ReplayRecord};

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::cards::{self, beats, deal_variant, CardError, Deal, Hand, Move, Variant};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seat(u8);

impl Seat {
    pub const ALL: [Seat; 3] = [Seat(0), Seat(1), Seat(2)];

    pub fn new(index: u8) -> Option<Seat> {
        (index < 3).then_some(Seat(index))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// The seat that acts after this one.
    pub fn next(self) -> Seat {
        Seat((self.0 + 1) % 3)
    }

    pub fn prev(self) -> Seat {
        Seat((self.0 + 2) % 3)
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seat {}", self.0)
    }
}

/// An auction call. Serialized as its multiplier, with 0 for Pass.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Bid {
    Pass,
    One,
    Two,
    Three,
}

impl Bid {
    pub const ALL: [Bid; 4] = [Bid::Pass, Bid::One, Bid::Two, Bid::Three];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(v: u8) -> Option<Bid> {
        Bid::ALL.get(v as usize).copied()
    }
}

impl Serialize for Bid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.value())
    }
}

impl<'de> Deserialize<'de> for Bid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Bid, D::Error> {
        let v = u8::deserialize(d)?;
        Bid::from_value(v).ok_or_else(|| serde::de::Error::custom(format!("bid {v} out of range")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Phase {
    Bidding,
    Play,
    Terminal,
    /// Every seat passed in the auction; the driver must deal again.
    Redeal,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Side {
    Landlord,
    Peasants,
}

/// Position relative to the landlord. `PeasantDown` plays right after the
/// landlord, `PeasantUp` right before.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum Role {
    Landlord,
    PeasantDown,
    PeasantUp,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Landlord, Role::PeasantDown, Role::PeasantUp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn side(self) -> Side {
        match self {
            Role::Landlord => Side::Landlord,
            _ => Side::Peasants,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Landlord => "landlord",
            Role::PeasantDown => "peasant_down",
            Role::PeasantUp => "peasant_up",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Settlement {
    pub winner_side: Side,
    pub points: [i64; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("illegal bid {bid:?} by {seat}")]
    IllegalBid { seat: Seat, bid: Bid },
    #[error("illegal move {mv} by {seat}: {reason}")]
    IllegalMove { seat: Seat, mv: Move, reason: String },
    #[error(transparent)]
    Cards(#[from] CardError),
}

/// Full game state. Values are cheap to clone; the `apply_*` methods return a
/// new state and leave `self` untouched, the `*_in_place` variants mutate.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GameState {
    phase: Phase,
    deal: Deal,
    first_bidder: Seat,
    bids: Vec<(Seat, Bid)>,
    landlord: Option<Seat>,
    hands: [Hand; 3],
    current: Seat,
    incumbent: Option<(Seat, Move)>,
    passes_in_row: u8,
    history: Vec<(Seat, Move)>,
    bomb_count: u32,
    base_multiplier: u8,
}

impl GameState {
    /// Auction-phase game over the standard deal for `seed`.
    pub fn new_game(seed: u64, first_bidder: Seat) -> GameState {
        Self::from_deal(cards::deal(seed), first_bidder)
    }

    pub fn from_deal(deal: Deal, first_bidder: Seat) -> GameState {
        GameState {
            phase: Phase::Bidding,
            hands: deal.hands,
            deal,
            first_bidder,
            bids: Vec::new(),
            landlord: None,
            current: first_bidder,
            incumbent: None,
            passes_in_row: 0,
            history: Vec::new(),
            bomb_count: 0,
            base_multiplier: 0,
        }
    }

    /// Skips the auction: `landlord` takes the hidden cards at multiplier 1 and leads.
    pub fn with_landlord(deal: Deal, landlord: Seat) -> GameState {
        let mut state = Self::from_deal(deal, landlord);
        state.finish_auction(landlord, 1);
        state
    }

    /// Role-assigned game for any variant.
    pub fn new_assigned(seed: u64, variant: Variant, landlord: Seat) -> GameState {
        Self::with_landlord(deal_variant(seed, variant), landlord)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn deal(&self) -> &Deal {
        &self.deal
    }

    pub fn variant(&self) -> Variant {
        self.deal.variant
    }

    pub fn first_bidder(&self) -> Seat {
        self.first_bidder
    }

    pub fn bids(&self) -> &[(Seat, Bid)] {
        &self.bids
    }

    pub fn landlord(&self) -> Option<Seat> {
        self.landlord
    }

    pub fn hand(&self, seat: Seat) -> &Hand {
        &self.hands[seat.index()]
    }

    pub fn hands(&self) -> &[Hand; 3] {
        &self.hands
    }

    pub fn current(&self) -> Seat {
        self.current
    }

    pub fn incumbent(&self) -> Option<(Seat, Move)> {
        self.incumbent
    }

    /// The move the current player has to beat, if any.
    pub fn to_beat(&self) -> Option<&Move> {
        self.incumbent.as_ref().map(|(_, m)| m)
    }

    pub fn history(&self) -> &[(Seat, Move)] {
        &self.history
    }

    pub fn bomb_count(&self) -> u32 {
        self.bomb_count
    }

    pub fn base_multiplier(&self) -> u8 {
        self.base_multiplier
    }

    pub fn role_of(&self, seat: Seat) -> Option<Role> {
        let landlord = self.landlord?;
        Some(if seat == landlord {
            Role::Landlord
        } else if seat == landlord.next() {
            Role::PeasantDown
        } else {
            Role::PeasantUp
        })
    }

    pub fn seat_of(&self, role: Role) -> Option<Seat> {
        let landlord = self.landlord?;
        Some(match role {
            Role::Landlord => landlord,
            Role::PeasantDown => landlord.next(),
            Role::PeasantUp => landlord.prev(),
        })
    }

    /// Cards played so far by everyone.
    pub fn played_cards(&self) -> Hand {
        self.history
            .iter()
            .try_fold(Hand::empty(), |acc, (_, m)| acc.plus(m.cards()))
            .expect("played cards come from one deck")
    }

    pub fn winner(&self) -> Option<Seat> {
        if self.phase != Phase::Terminal {
            return None;
        }
        Seat::ALL.into_iter().find(|s| self.hands[s.index()].is_empty())
    }

    pub fn highest_bid(&self) -> Bid {
        self.bids.iter().map(|&(_, b)| b).max().unwrap_or(Bid::Pass)
    }

    pub fn legal_bids(&self) -> Result<Vec<Bid>, GameError> {
        if self.phase != Phase::Bidding {
            return Err(GameError::WrongPhase(self.phase));
        }
        let highest = self.highest_bid();
        Ok(Bid::ALL
            .into_iter()
            .filter(|&b| b == Bid::Pass || b > highest)
            .collect())
    }

    pub fn legal_moves(&self) -> Result<Vec<Move>, GameError> {
        if self.phase != Phase::Play {
            return Err(GameError::WrongPhase(self.phase));
        }
        Ok(cards::legal_moves(self.hand(self.current), self.to_beat()))
    }

    pub fn apply_bid(&self, bid: Bid) -> Result<GameState, GameError> {
        let mut next = self.clone();
        next.bid_in_place(bid)?;
        Ok(next)
    }

    pub fn bid_in_place(&mut self, bid: Bid) -> Result<(), GameError> {
        let legal = self.legal_bids()?;
        let seat = self.current;
        if !legal.contains(&bid) {
            return Err(GameError::IllegalBid { seat, bid });
        }
        self.bids.push((seat, bid));
        if bid == Bid::Three {
            self.finish_auction(seat, 3);
        } else if self.bids.len() == 3 {
            let best = self
                .bids
                .iter()
                .filter(|(_, b)| *b != Bid::Pass)
                .max_by_key(|(_, b)| *b)
                .copied();
            match best {
                Some((winner, b)) => self.finish_auction(winner, b.value()),
                None => self.phase = Phase::Redeal,
            }
        } else {
            self.current = seat.next();
        }
        Ok(())
    }

    fn finish_auction(&mut self, landlord: Seat, multiplier: u8) {
        let i = landlord.index();
        self.hands[i] = self.hands[i]
            .plus(&self.deal.hidden)
            .expect("hidden cards are disjoint from hands");
        self.landlord = Some(landlord);
        self.base_multiplier = multiplier;
        self.current = landlord;
        self.phase = Phase::Play;
    }

    /// Checks a move against the rules without applying it.
    pub fn check_move(&self, mv: &Move) -> Result<(), GameError> {
        if self.phase != Phase::Play {
            return Err(GameError::WrongPhase(self.phase));
        }
        let seat = self.current;
        let illegal = |reason: &str| GameError::IllegalMove {
            seat,
            mv: *mv,
            reason: reason.to_string(),
        };
        if !self.hand(seat).contains(mv.cards()) {
            return Err(illegal("cards not in hand"));
        }
        match self.to_beat() {
            None if mv.is_pass() => Err(illegal("the leader cannot pass")),
            Some(inc) if !mv.is_pass() && !beats(mv, inc) => Err(illegal("does not beat the incumbent")),
            _ => Ok(()),
        }
    }

    pub fn apply_move(&self, mv: &Move) -> Result<GameState, GameError> {
        let mut next = self.clone();
        next.play_in_place(mv)?;
        Ok(next)
    }

    pub fn play_in_place(&mut self, mv: &Move) -> Result<(), GameError> {
        self.check_move(mv)?;
        let seat = self.current;
        let i = seat.index();
        self.hands[i] = self.hands[i].minus(mv.cards())?;
        self.history.push((seat, *mv));
        if mv.is_bomb_like() {
            self.bomb_count += 1;
        }
        if mv.is_pass() {
            self.passes_in_row += 1;
            if self.passes_in_row == 2 {
                self.incumbent = None;
                self.passes_in_row = 0;
            }
        } else {
            self.incumbent = Some((seat, *mv));
            self.passes_in_row = 0;
        }
        if self.hands[i].is_empty() {
            self.phase = Phase::Terminal;
        } else {
            self.current = seat.next();
        }
        Ok(())
    }

    /// Points per seat: unit `m = base × 2^bombs`; the landlord wins or loses
    /// `2m`, each peasant the opposite `m`.
    pub fn settle(&self) -> Result<Settlement, GameError> {
        if self.phase != Phase::Terminal {
            return Err(GameError::WrongPhase(self.phase));
        }
        let landlord = self.landlord.expect("terminal games have a landlord");
        let winner = self.winner().expect("terminal games have a winner");
        let winner_side = if winner == landlord {
            Side::Landlord
        } else {
            Side::Peasants
        };
        let unit = self.stake_unit();
        let sign = if winner_side == Side::Landlord { 1 } else { -1 };
        let mut points = [0i64; 3];
        for s in Seat::ALL {
            points[s.index()] = if s == landlord { 2 * sign * unit } else { -sign * unit };
        }
        Ok(Settlement { winner_side, points })
    }

    /// `base_multiplier × 2^bomb_count`.
    pub fn stake_unit(&self) -> i64 {
        self.base_multiplier as i64 * (1i64 << self.bomb_count.min(40))
    }
}

#[cfg(test)]
impl GameState {
    pub(crate) fn with_hands_for_test(&self, hands: [Hand; 3]) -> GameState {
        GameState { hands, ..self.clone() }
    }

    pub(crate) fn with_bomb_count_for_test(&self, bomb_count: u32) -> GameState {
        GameState { bomb_count, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::classify_move;
    use crate::rng::GameRng;

    fn mv(s: &str) -> Move {
        classify_move(&s.parse().unwrap()).unwrap()
    }

    #[test]
    fn new_game_basics() {
        let g = GameState::new_game(1, Seat(0));
        assert_eq!(g.phase(), Phase::Bidding);
        assert!(g.hands().iter().all(|h| h.len() == 17));
        assert_eq!(g, GameState::new_game(1, Seat(0)));
        let g2 = GameState::new_game(1, Seat(2));
        assert_eq!(g.deal(), g2.deal());
        assert_ne!(g.current(), g2.current());
    }

    #[test]
    fn legal_bids_follow_highest() {
        let g = GameState::new_game(3, Seat(0));
        assert_eq!(g.legal_bids().unwrap(), Bid::ALL.to_vec());
        let g = g.apply_bid(Bid::Two).unwrap();
        assert_eq!(g.legal_bids().unwrap(), vec![Bid::Pass, Bid::Three]);
        assert!(matches!(g.apply_bid(Bid::One), Err(GameError::IllegalBid { .. })));
    }

    #[test]
    fn auction_outcomes() {
        let g = GameState::new_game(4, Seat(0));
        let done = g
            .apply_bid(Bid::One)
            .unwrap()
            .apply_bid(Bid::Pass)
            .unwrap()
            .apply_bid(Bid::Three)
            .unwrap();
        assert_eq!(done.landlord(), Some(Seat(2)));
        assert_eq!(done.base_multiplier(), 3);
        assert_eq!(done.hand(Seat(2)).len(), 20);
        assert_eq!(done.current(), Seat(2));
        assert_eq!(done.phase(), Phase::Play);

        let redeal = g
            .apply_bid(Bid::Pass)
            .unwrap()
            .apply_bid(Bid::Pass)
            .unwrap()
            .apply_bid(Bid::Pass)
            .unwrap();
        assert_eq!(redeal.phase(), Phase::Redeal);
        assert_eq!(redeal.landlord(), None);

        let early = g.apply_bid(Bid::Two).unwrap().apply_bid(Bid::Three).unwrap();
        assert_eq!(early.bids().len(), 2);
        assert_eq!(early.landlord(), Some(Seat(1)));
        assert!(matches!(early.legal_bids(), Err(GameError::WrongPhase(Phase::Play))));
    }

    #[test]
    fn two_passes_reset_the_trick() {
        let mut deal = crate::cards::deal(0);
        deal.hands = ["3456".parse().unwrap(), "789".parse().unwrap(), "TJQ".parse().unwrap()];
        deal.hidden = "K".parse().unwrap();
        let g = GameState::with_landlord(deal, Seat(0));
        let g = g.apply_move(&mv("3")).unwrap();
        let g = g.apply_move(&Move::pass()).unwrap();
        let g = g.apply_move(&Move::pass()).unwrap();
        assert_eq!(g.current(), Seat(0));
        assert_eq!(g.to_beat(), None);
        assert!(g.apply_move(&Move::pass()).is_err());
    }

    #[test]
    fn bombs_and_settlement() {
        let mut deal = crate::cards::deal(0);
        deal.hands = ["5555".parse().unwrap(), "789".parse().unwrap(), "TJQ".parse().unwrap()];
        deal.hidden = "K".parse().unwrap();
        let mut g = GameState::with_landlord(deal, Seat(0));
        g.base_multiplier = 3;
        let g = g.apply_move(&mv("5555")).unwrap();
        assert_eq!(g.bomb_count(), 1);
        let g = g.apply_move(&Move::pass()).unwrap();
        let g = g.apply_move(&Move::pass()).unwrap();
        let g = g.apply_move(&mv("K")).unwrap();
        assert_eq!(g.phase(), Phase::Terminal);
        let s = g.settle().unwrap();
        assert_eq!(s.winner_side, Side::Landlord);
        assert_eq!(s.points, [12, -6, -6]);
        assert_eq!(s.points.iter().sum::<i64>(), 0);
    }

    #[test]
    fn peasants_win_small_stake() {
        let mut deal = crate::cards::deal(0);
        deal.hands = ["34".parse().unwrap(), "A".parse().unwrap(), "TJQ".parse().unwrap()];
        deal.hidden = Hand::empty();
        let g = GameState::with_landlord(deal, Seat(0));
        let g = g.apply_move(&mv("3")).unwrap();
        let g = g.apply_move(&mv("A")).unwrap();
        let s = g.settle().unwrap();
        assert_eq!(s.winner_side, Side::Peasants);
        assert_eq!(s.points, [-2, 1, 1]);
    }

    #[test]
    fn illegal_moves_rejected() {
        let g = GameState::new_assigned(9, Variant::Standard, Seat(1));
        assert!(matches!(g.settle(), Err(GameError::WrongPhase(Phase::Play))));
        let not_held = Seat::ALL
            .iter()
            .filter(|&&s| s != Seat(1))
            .flat_map(|&s| cards::legal_moves(g.hand(s), None))
            .find(|m| !g.hand(Seat(1)).contains(m.cards()))
            .unwrap();
        assert!(matches!(g.apply_move(&not_held), Err(GameError::IllegalMove { .. })));
    }

    #[test]
    fn random_playouts_conserve_cards_and_terminate() {
        let mut rng = GameRng::new(11);
        for seed in 0..200 {
            let mut g = GameState::new_game(seed, Seat((seed % 3) as u8));
            while g.phase() == Phase::Bidding {
                let bids = g.legal_bids().unwrap();
                g.bid_in_place(bids[rng.index(bids.len())]).unwrap();
            }
            if g.phase() == Phase::Redeal {
                continue;
            }
            assert_eq!(g.hand(g.landlord().unwrap()).len(), 20);
            let mut plies = 0;
            while g.phase() == Phase::Play {
                let moves = g.legal_moves().unwrap();
                g.play_in_place(&moves[rng.index(moves.len())]).unwrap();
                plies += 1;
                let held = g.hands().iter().try_fold(Hand::empty(), |a, h| a.plus(h)).unwrap();
                assert_eq!(held.plus(&g.played_cards()).unwrap(), Hand::full_deck());
            }
            assert!(plies <= 200);
            assert_eq!(g.hands().iter().filter(|h| h.is_empty()).count(), 1);
            let s = g.settle().unwrap();
            assert_eq!(s.points.iter().sum::<i64>(), 0);
            let landlord = g.landlord().unwrap();
            let peasants: Vec<i64> = Seat::ALL
                .iter()
                .filter(|&&x| x != landlord)
                .map(|x| s.points[x.index()])
                .collect();
            assert_eq!(peasants[0], peasants[1]);
        }
    }
}
