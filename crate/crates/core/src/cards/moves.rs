use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CardError, Hand, Rank, NUM_RANKS};
use crate::cards::movegen::MAX_MOVE_CARDS;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Category {
    Pass,
    Solo,
    Pair,
    Trio,
    TrioWithSolo,
    TrioWithPair,
    SoloChain,
    PairChain,
    TrioChain,
    PlaneWithSolos,
    PlaneWithPairs,
    QuadWithSolos,
    QuadWithPairs,
    Bomb,
    Rocket,
}

impl Category {
    pub const ALL: [Category; 15] = [
        Category::Pass,
        Category::Solo,
        Category::Pair,
        Category::Trio,
        Category::TrioWithSolo,
        Category::TrioWithPair,
        Category::SoloChain,
        Category::PairChain,
        Category::TrioChain,
        Category::PlaneWithSolos,
        Category::PlaneWithPairs,
        Category::QuadWithSolos,
        Category::QuadWithPairs,
        Category::Bomb,
        Category::Rocket,
    ];

    /// Copies of each principal rank the category uses.
    pub(crate) fn principal_width(self) -> u8 {
        match self {
            Category::Pass => 0,
            Category::Solo | Category::SoloChain | Category::Rocket => 1,
            Category::Pair | Category::PairChain => 2,
            Category::Trio
            | Category::TrioWithSolo
            | Category::TrioWithPair
            | Category::TrioChain
            | Category::PlaneWithSolos
            | Category::PlaneWithPairs => 3,
            Category::QuadWithSolos | Category::QuadWithPairs | Category::Bomb => 4,
        }
    }

    pub fn is_chain(self) -> bool {
        matches!(
            self,
            Category::SoloChain
                | Category::PairChain
                | Category::TrioChain
                | Category::PlaneWithSolos
                | Category::PlaneWithPairs
        )
    }
}

/// A classified combination: category, principal rank, chain length, kickers,
/// and the exact cards played.
///
/// `principal` is the lowest rank of a chain, the trio/quad rank for kicker
/// categories, and the black joker for the rocket. `kickers` holds the kicker
/// cards themselves (a pair kicker contributes two cards).
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    category: Category,
    principal: Rank,
    length: u8,
    kickers: Hand,
    cards: Hand,
}

impl Move {
    pub const fn pass() -> Move {
        Move {
            category: Category::Pass,
            principal: Rank::THREE,
            length: 0,
            kickers: Hand::empty(),
            cards: Hand::empty(),
        }
    }

    /// Builds a move from its shape. The caller guarantees the shape obeys the rules.
    pub(crate) fn from_shape(category: Category, principal: Rank, length: u8, kickers: Hand) -> Move {
        let mut cards = kickers;
        match category {
            Category::Pass => return Move::pass(),
            Category::Rocket => {
                cards.add_rank(Rank::BLACK_JOKER, 1);
                cards.add_rank(Rank::RED_JOKER, 1);
            }
            _ => {
                let width = category.principal_width();
                for i in 0..length {
                    cards.add_rank(Rank(principal.ordinal() + i), width);
                }
            }
        }
        Move {
            category,
            principal,
            length,
            kickers,
            cards,
        }
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn principal(&self) -> Rank {
        self.principal
    }

    /// Chain length; 1 for non-chains, 0 for Pass.
    pub fn length(&self) -> u8 {
        self.length
    }

    pub fn kickers(&self) -> &Hand {
        &self.kickers
    }

    pub fn cards(&self) -> &Hand {
        &self.cards
    }

    pub fn is_pass(&self) -> bool {
        self.category == Category::Pass
    }

    pub fn is_bomb_like(&self) -> bool {
        matches!(self.category, Category::Bomb | Category::Rocket)
    }
}

impl Ord for Move {
    fn cmp(&self, other: &Move) -> Ordering {
        self.category
            .cmp(&other.category)
            .then(self.principal.cmp(&other.principal))
            .then(self.length.cmp(&other.length))
            .then_with(|| self.kickers.ranks().cmp(other.kickers.ranks()))
    }
}

impl PartialOrd for Move {
    fn partial_cmp(&self, other: &Move) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            write!(f, "Pass")
        } else {
            write!(f, "{:?}({})", self.category, self.cards)
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Serialize, Deserialize)]
struct MoveRepr {
    category: Category,
    cards: Hand,
}

impl Serialize for Move {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MoveRepr {
            category: self.category,
            cards: self.cards,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Move {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Move, D::Error> {
        let repr = MoveRepr::deserialize(deserializer)?;
        let mv = classify_move(&repr.cards).map_err(serde::de::Error::custom)?;
        if mv.category != repr.category {
            return Err(serde::de::Error::custom(format!(
                "cards {} classify as {:?}, not {:?}",
                repr.cards, mv.category, repr.category
            )));
        }
        Ok(mv)
    }
}

/// Per-count summary of a card set used by the classifier.
struct Profile {
    counts: [u8; NUM_RANKS],
    by_count: [u8; 5],
    lowest: [u8; 5],
    highest: [u8; 5],
}

impl Profile {
    fn new(cards: &Hand) -> Profile {
        let counts = *cards.counts();
        let mut by_count = [0u8; 5];
        let mut lowest = [u8::MAX; 5];
        let mut highest = [0u8; 5];
        for (r, &c) in counts.iter().enumerate() {
            let c = c as usize;
            by_count[c] += 1;
            if lowest[c] == u8::MAX {
                lowest[c] = r as u8;
            }
            highest[c] = r as u8;
        }
        Profile {
            counts,
            by_count,
            lowest,
            highest,
        }
    }

    /// Only ranks held with exactly `width` copies, forming a consecutive
    /// chainable run of at least `min_len`.
    fn pure_chain(&self, width: usize, n: usize, min_len: usize) -> Option<(Rank, u8)> {
        let len = self.by_count[width] as usize;
        if len * width != n || len < min_len {
            return None;
        }
        let (lo, hi) = (self.lowest[width], self.highest[width]);
        if hi > Rank::ACE.ordinal() || (hi - lo + 1) as usize != len {
            return None;
        }
        Some((Rank(lo), len as u8))
    }

    fn kickers_excluding(&self, start: u8, len: u8) -> Hand {
        let mut counts = self.counts;
        for r in start..start + len {
            counts[r as usize] = 0;
        }
        Hand::from_counts(counts).expect("subset of a valid hand")
    }

    fn has_rocket(&self) -> bool {
        self.counts[13] == 1 && self.counts[14] == 1
    }
}

/// Classifies a card set as a single move.
///
/// The empty set is Pass. Four cards of one rank are always a Bomb. A plane's
/// solo kickers may repeat a rank up to three times, must not be the rocket,
/// and must not form a trio adjacent to the chain (that card set is a longer
/// chain or no move at all). Under these rules every valid card set has exactly
/// one decomposition.
pub fn classify_move(cards: &Hand) -> Result<Move, CardError> {
    let n = cards.len();
    if n == 0 {
        return Ok(Move::pass());
    }
    let invalid = || CardError::InvalidCombo(*cards);
    if n > MAX_MOVE_CARDS {
        return Err(invalid());
    }
    let p = Profile::new(cards);
    let single = |count: usize| Rank(p.lowest[count]);

    match n {
        1 => return Ok(Move::from_shape(Category::Solo, single(1), 1, Hand::empty())),
        2 => {
            if p.has_rocket() {
                return Ok(Move::from_shape(Category::Rocket, Rank::BLACK_JOKER, 1, Hand::empty()));
            }
            if p.by_count[2] == 1 {
                return Ok(Move::from_shape(Category::Pair, single(2), 1, Hand::empty()));
            }
            return Err(invalid());
        }
        3 => {
            if p.by_count[3] == 1 {
                return Ok(Move::from_shape(Category::Trio, single(3), 1, Hand::empty()));
            }
            return Err(invalid());
        }
        4 => {
            if p.by_count[4] == 1 {
                return Ok(Move::from_shape(Category::Bomb, single(4), 1, Hand::empty()));
            }
            if p.by_count[3] == 1 && p.by_count[1] == 1 {
                let kick = Hand::from_ranks([single(1)]).expect("single card");
                return Ok(Move::from_shape(Category::TrioWithSolo, single(3), 1, kick));
            }
            return Err(invalid());
        }
        5 => {
            if p.by_count[3] == 1 && p.by_count[2] == 1 {
                let kick = Hand::from_ranks([single(2), single(2)]).expect("pair");
                return Ok(Move::from_shape(Category::TrioWithPair, single(3), 1, kick));
            }
        }
        _ => {}
    }

    if let Some((lo, len)) = p.pure_chain(1, n, 5) {
        return Ok(Move::from_shape(Category::SoloChain, lo, len, Hand::empty()));
    }
    if let Some((lo, len)) = p.pure_chain(2, n, 3) {
        return Ok(Move::from_shape(Category::PairChain, lo, len, Hand::empty()));
    }
    if let Some((lo, len)) = p.pure_chain(3, n, 2) {
        return Ok(Move::from_shape(Category::TrioChain, lo, len, Hand::empty()));
    }

    if p.by_count[4] == 1 {
        let quad = single(4);
        if n == 6 && !p.has_rocket() {
            let mut rest = *cards;
            rest = rest
                .minus(&Hand::from_ranks([quad; 4]).expect("quad"))
                .expect("held");
            return Ok(Move::from_shape(Category::QuadWithSolos, quad, 1, rest));
        }
        if n == 8 && p.by_count[2] == 2 {
            let rest = cards
                .minus(&Hand::from_ranks([quad; 4]).expect("quad"))
                .expect("held");
            return Ok(Move::from_shape(Category::QuadWithPairs, quad, 1, rest));
        }
    }

    if n % 5 == 0 {
        let len = n / 5;
        if (2..=4).contains(&len)
            && p.by_count[3] as usize == len
            && p.by_count[2] as usize == len
            && p.by_count[1] == 0
            && p.by_count[4] == 0
        {
            let (lo, hi) = (p.lowest[3], p.highest[3]);
            if hi <= Rank::ACE.ordinal() && (hi - lo + 1) as usize == len {
                let kick = p.kickers_excluding(lo, len as u8);
                return Ok(Move::from_shape(Category::PlaneWithPairs, Rank(lo), len as u8, kick));
            }
        }
    }

    if n % 4 == 0 {
        let len = (n / 4) as u8;
        if (2..=5).contains(&len) && p.by_count[4] == 0 && !p.has_rocket() {
            let ace = Rank::ACE.ordinal();
            for start in 0..=(ace + 1 - len) {
                let run_ok = (start..start + len).all(|r| p.counts[r as usize] == 3);
                if !run_ok {
                    continue;
                }
                let below_trio = start > 0 && p.counts[start as usize - 1] == 3;
                let above = start + len;
                let above_trio = above <= ace && p.counts[above as usize] == 3;
                if below_trio || above_trio {
                    continue;
                }
                let kick = p.kickers_excluding(start, len);
                return Ok(Move::from_shape(Category::PlaneWithSolos, Rank(start), len, kick));
            }
        }
    }

    Err(invalid())
}

/// Whether `challenger` legally beats `incumbent`. Pass never beats or is beaten.
pub fn beats(challenger: &Move, incumbent: &Move) -> bool {
    use Category::*;
    match (challenger.category, incumbent.category) {
        (Pass, _) | (_, Pass) => false,
        (_, Rocket) => false,
        (Rocket, _) => true,
        (Bomb, Bomb) => challenger.principal > incumbent.principal,
        (Bomb, _) => true,
        (_, Bomb) => false,
        (a, b) => a == b && challenger.length == incumbent.length && challenger.principal > incumbent.principal,
    }
}
