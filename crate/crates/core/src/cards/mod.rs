//! Card primitives, move classification and legal-move generation.
//!
//! Suits carry no meaning in DouDizhu, so a hand is a multiset over 15 ranks.
//! Text notation: `3456789TJQKA2` for the suited ranks, `B` for the black joker
//! and `R` for the red joker; a hand prints as its cards sorted ascending.

mod deal;
mod movegen;
mod moves;
pub mod reference;

pub use deal::{deal, deal_variant, Deal, Variant};
pub use movegen::{enumerate_action_space, legal_moves, MAX_MOVE_CARDS};
pub use moves::{beats, classify_move, Category, Move};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const NUM_RANKS: usize = 15;

const SYMBOLS: [char; NUM_RANKS] = [
    '3', '4', '5', '6', '7', '8', '9', 'T', 'J', 'Q', 'K', 'A', '2', 'B', 'R',
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardError {
    #[error("invalid card symbol {0:?}")]
    BadSymbol(char),
    #[error("rank ordinal {0} out of range")]
    BadRank(u8),
    #[error("too many copies of {rank}: {count}")]
    TooManyCopies { rank: Rank, count: u8 },
    #[error("cards {0} do not form a valid combination")]
    InvalidCombo(Hand),
    #[error("cards {missing} are not held")]
    NotHeld { missing: Hand },
}

/// One of the 15 DouDizhu ranks, ordered 3 < 4 < ... < A < 2 < black joker < red joker.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Rank(u8);

impl Rank {
    pub const THREE: Rank = Rank(0);
    pub const ACE: Rank = Rank(11);
    pub const TWO: Rank = Rank(12);
    pub const BLACK_JOKER: Rank = Rank(13);
    pub const RED_JOKER: Rank = Rank(14);

    pub fn new(ordinal: u8) -> Result<Rank, CardError> {
        if (ordinal as usize) < NUM_RANKS {
            Ok(Rank(ordinal))
        } else {
            Err(CardError::BadRank(ordinal))
        }
    }

    pub fn ordinal(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Copies of this rank in a standard deck.
    pub fn copies(self) -> u8 {
        if self.0 < 13 {
            4
        } else {
            1
        }
    }

    pub fn is_joker(self) -> bool {
        self.0 >= 13
    }

    /// Ranks 3 through A may appear in chains; 2 and the jokers may not.
    pub fn is_chainable(self) -> bool {
        self.0 <= Rank::ACE.0
    }

    pub fn symbol(self) -> char {
        SYMBOLS[self.index()]
    }

    pub fn from_symbol(c: char) -> Result<Rank, CardError> {
        let upper = c.to_ascii_uppercase();
        SYMBOLS
            .iter()
            .position(|&s| s == upper)
            .map(|i| Rank(i as u8))
            .ok_or(CardError::BadSymbol(c))
    }

    pub fn all() -> impl Iterator<Item = Rank> {
        (0..NUM_RANKS as u8).map(Rank)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A multiset of cards stored as per-rank counts.
///
/// Every constructor enforces the deck limits (four copies of 3..2, one of each
/// joker), so any `Hand` is a sub-multiset of a single deck.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Hand {
    counts: [u8; NUM_RANKS],
}

impl Hand {
    pub const fn empty() -> Hand {
        Hand {
            counts: [0; NUM_RANKS],
        }
    }

    pub fn full_deck() -> Hand {
        let mut counts = [4u8; NUM_RANKS];
        counts[13] = 1;
        counts[14] = 1;
        Hand { counts }
    }

    pub fn from_counts(counts: [u8; NUM_RANKS]) -> Result<Hand, CardError> {
        for rank in Rank::all() {
            let count = counts[rank.index()];
            if count > rank.copies() {
                return Err(CardError::TooManyCopies { rank, count });
            }
        }
        Ok(Hand { counts })
    }

    pub fn from_ranks<I: IntoIterator<Item = Rank>>(ranks: I) -> Result<Hand, CardError> {
        let mut counts = [0u8; NUM_RANKS];
        for r in ranks {
            counts[r.index()] = counts[r.index()].saturating_add(1);
        }
        Hand::from_counts(counts)
    }

    pub fn counts(&self) -> &[u8; NUM_RANKS] {
        &self.counts
    }

    pub fn count(&self, rank: Rank) -> u8 {
        self.counts[rank.index()]
    }

    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// True when every card of `other` is also in `self`.
    pub fn contains(&self, other: &Hand) -> bool {
        self.counts
            .iter()
            .zip(other.counts.iter())
            .all(|(a, b)| a >= b)
    }

    pub fn is_disjoint_within_deck(&self, other: &Hand) -> bool {
        Rank::all().all(|r| self.count(r) + other.count(r) <= r.copies())
    }

    /// Multiset sum; fails if the result exceeds the deck.
    pub fn plus(&self, other: &Hand) -> Result<Hand, CardError> {
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(other.counts.iter()) {
            *c += o;
        }
        Hand::from_counts(counts)
    }

    /// Multiset difference; fails if `other` is not contained in `self`.
    pub fn minus(&self, other: &Hand) -> Result<Hand, CardError> {
        if !self.contains(other) {
            let mut missing = [0u8; NUM_RANKS];
            for (i, m) in missing.iter_mut().enumerate() {
                *m = other.counts[i].saturating_sub(self.counts[i]);
            }
            return Err(CardError::NotHeld {
                missing: Hand { counts: missing },
            });
        }
        let mut counts = self.counts;
        for (c, o) in counts.iter_mut().zip(other.counts.iter()) {
            *c -= o;
        }
        Ok(Hand { counts })
    }

    pub(crate) fn add_rank(&mut self, rank: Rank, n: u8) {
        self.counts[rank.index()] += n;
        debug_assert!(self.counts[rank.index()] <= rank.copies());
    }

    /// Ranks in ascending order, repeated by multiplicity.
    pub fn ranks(&self) -> impl Iterator<Item = Rank> + '_ {
        Rank::all().flat_map(move |r| std::iter::repeat(r).take(self.count(r) as usize))
    }

    pub fn distinct_ranks(&self) -> impl Iterator<Item = Rank> + '_ {
        Rank::all().filter(move |&r| self.count(r) > 0)
    }
}

impl fmt::Display for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in self.ranks() {
            write!(f, "{}", r.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Hand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hand({self})")
    }
}

impl FromStr for Hand {
    type Err = CardError;

    fn from_str(s: &str) -> Result<Hand, CardError> {
        let ranks = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(Rank::from_symbol)
            .collect::<Result<Vec<_>, _>>()?;
        Hand::from_ranks(ranks)
    }
}

impl Serialize for Hand {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hand {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Hand, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
