use std::sync::Arc;

use super::Policy;
use crate::bidding::{heuristic_bid, BidStrategy};
use crate::cards::Move;
use crate::dmc::RoleNets;
use crate::encoding::{encode_action, encode_state_into, ActionFeatures, STATE_FEATURES_WIDTH};
use crate::game::{Bid, GameState};
use crate::networks::Mode;
use crate::rng::GameRng;

/// Uniform over legal moves and bids.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn choose_move(&self, _state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        legal[rng.index(legal.len())]
    }

    fn choose_bid(&self, _state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        legal[rng.index(legal.len())]
    }
}

/// Deterministic hand-written player: shed low cards first, never top a
/// partner, save bombs for when an opponent is close to going out.
#[derive(Clone, Copy, Debug, Default)]
pub struct RulePolicy;

impl RulePolicy {
    fn lead(legal: &[Move]) -> Move {
        let plain: Vec<&Move> = legal.iter().filter(|m| !m.is_pass() && !m.is_bomb_like()).collect();
        let pool = if plain.is_empty() {
            legal.iter().filter(|m| !m.is_pass()).collect()
        } else {
            plain
        };
        **pool
            .iter()
            .min_by_key(|m| (m.principal(), std::cmp::Reverse(m.cards().len()), **m))
            .expect("a leader has a non-pass move")
    }
}

impl Policy for RulePolicy {
    fn name(&self) -> &str {
        "rule"
    }

    fn choose_move(&self, state: &GameState, legal: &[Move], _rng: &mut GameRng) -> Move {
        let Some((owner, _)) = state.incumbent() else {
            return RulePolicy::lead(legal);
        };
        let me = state.current();
        let landlord = state.landlord();
        let partner = landlord.is_some_and(|l| l != me && l != owner);
        if partner {
            return Move::pass();
        }
        let beating: Vec<&Move> = legal.iter().filter(|m| !m.is_pass()).collect();
        if let Some(m) = beating.iter().filter(|m| !m.is_bomb_like()).min_by_key(|m| (m.principal(), **m)) {
            return **m;
        }
        let threat = state.hand(owner).len() <= 4;
        match beating.first() {
            Some(m) if threat => **m,
            _ => Move::pass(),
        }
    }

    fn choose_bid(&self, state: &GameState, legal: &[Bid], _rng: &mut GameRng) -> Bid {
        heuristic_bid(state.hand(state.current()), legal)
    }
}

/// Greedy (epsilon 0) player over trained role networks.
#[derive(Clone, Debug)]
pub struct DmcPolicy {
    name: String,
    nets: Arc<RoleNets>,
    bidding: BidStrategy,
}

impl DmcPolicy {
    pub fn new(name: impl Into<String>, nets: Arc<RoleNets>, bidding: BidStrategy) -> DmcPolicy {
        DmcPolicy {
            name: name.into(),
            nets,
            bidding,
        }
    }

    pub fn nets(&self) -> &Arc<RoleNets> {
        &self.nets
    }

    /// Q of each legal move, in `legal` order.
    pub fn q_values(&self, state: &GameState, legal: &[Move]) -> Vec<f32> {
        let seat = state.current();
        let role = state.role_of(seat).expect("play phase has roles");
        let mut features = vec![0.0; STATE_FEATURES_WIDTH];
        encode_state_into(state, seat, &mut features).expect("play phase encodes");
        let actions: Vec<ActionFeatures> = legal.iter().map(encode_action).collect();
        self.nets
            .role(role)
            .q_values(&features, &actions, &mut Mode::Infer)
            .expect("network input matches feature widths")
    }
}

impl Policy for DmcPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose_move(&self, state: &GameState, legal: &[Move], _rng: &mut GameRng) -> Move {
        let q = self.q_values(state, legal);
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        legal[best]
    }

    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        self.bidding.decide(state, legal, rng)
    }
}

/// Plays like `play` but bids with `bidding`.
pub struct WithBidding {
    name: String,
    play: Arc<dyn Policy>,
    bidding: BidStrategy,
}

impl WithBidding {
    pub fn new(name: impl Into<String>, play: Arc<dyn Policy>, bidding: BidStrategy) -> WithBidding {
        WithBidding {
            name: name.into(),
            play,
            bidding,
        }
    }
}

impl Policy for WithBidding {
    fn name(&self) -> &str {
        &self.name
    }

    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        self.play.choose_move(state, legal, rng)
    }

    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        self.bidding.decide(state, legal, rng)
    }
}
