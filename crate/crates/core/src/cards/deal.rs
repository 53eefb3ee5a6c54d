use serde::{Deserialize, Serialize};

use super::{Hand, Rank};
use crate::rng::GameRng;

/// Which deck and deal shape a game uses.
///
/// `Reduced` is the desk-scale variant used for smoke training: only ranks
/// 3..8 (24 cards), dealt 8/8/8 with no hidden cards and no auction.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Standard,
    Reduced,
}

impl Variant {
    pub fn deck(self) -> Hand {
        match self {
            Variant::Standard => Hand::full_deck(),
            Variant::Reduced => {
                let mut counts = [0u8; super::NUM_RANKS];
                counts[..6].fill(4);
                Hand::from_counts(counts).expect("reduced deck")
            }
        }
    }

    pub fn hand_size(self) -> usize {
        match self {
            Variant::Standard => 17,
            Variant::Reduced => 8,
        }
    }

    pub fn hidden_size(self) -> usize {
        match self {
            Variant::Standard => 3,
            Variant::Reduced => 0,
        }
    }

    pub fn has_auction(self) -> bool {
        self == Variant::Standard
    }

    pub fn is_standard(&self) -> bool {
        *self == Variant::Standard
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Deal {
    pub hands: [Hand; 3],
    pub hidden: Hand,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Variant::is_standard")]
    pub variant: Variant,
}

impl Deal {
    /// Multiset union of all four parts.
    pub fn union(&self) -> Hand {
        self.hands
            .iter()
            .try_fold(self.hidden, |acc, h| acc.plus(h))
            .expect("deal parts partition a deck")
    }
}

/// Standard 17/17/17/3 deal.
pub fn deal(seed: u64) -> Deal {
    deal_variant(seed, Variant::Standard)
}

/// Shuffles the variant's deck with `GameRng::new(seed)` and splits it in seat order.
///
/// Cards start in ascending rank order; the Fisher-Yates shuffle then hands
/// out positions `[0, n)` to seat 0, `[n, 2n)` to seat 1, `[2n, 3n)` to seat 2
/// and the remainder to the hidden pile.
pub fn deal_variant(seed: u64, variant: Variant) -> Deal {
    let mut cards: Vec<Rank> = variant.deck().ranks().collect();
    let mut rng = GameRng::new(seed);
    rng.shuffle(&mut cards);
    let n = variant.hand_size();
    let part = |range: std::ops::Range<usize>| {
        Hand::from_ranks(cards[range].iter().copied()).expect("slice of a deck")
    };
    Deal {
        hands: [part(0..n), part(n..2 * n), part(2 * n..3 * n)],
        hidden: part(3 * n..cards.len()),
        seed,
        variant,
    }
}
