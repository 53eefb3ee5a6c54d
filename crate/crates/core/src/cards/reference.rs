//! Brute-force reference implementations used to cross-check the fast paths.
//!
//! These deliberately share nothing with the generator in `movegen`: they walk
//! every sub-multiset of a card set and ask the classifier about each one.

use super::{beats, classify_move, Category, Hand, Move, MAX_MOVE_CARDS, NUM_RANKS};

/// Calls `f` on every non-empty sub-multiset of `hand` with at most `max_cards` cards.
pub fn for_each_submultiset(hand: &Hand, max_cards: usize, mut f: impl FnMut(&Hand)) {
    fn rec(
        limit: &[u8; NUM_RANKS],
        rank: usize,
        size: usize,
        max_cards: usize,
        acc: &mut [u8; NUM_RANKS],
        f: &mut impl FnMut(&Hand),
    ) {
        if rank == NUM_RANKS {
            if size > 0 {
                f(&Hand::from_counts(*acc).expect("sub-multiset"));
            }
            return;
        }
        for take in 0..=limit[rank] {
            if size + take as usize > max_cards {
                break;
            }
            acc[rank] = take;
            rec(limit, rank + 1, size + take as usize, max_cards, acc, f);
        }
        acc[rank] = 0;
    }
    let mut acc = [0u8; NUM_RANKS];
    rec(hand.counts(), 0, 0, max_cards, &mut acc, &mut f);
}

/// Legal moves by exhaustive subset enumeration: classify every sub-multiset of
/// the hand, keep those beating the incumbent, add Pass when responding.
pub fn legal_moves_brute_force(hand: &Hand, incumbent: Option<&Move>) -> Vec<Move> {
    let incumbent = incumbent.filter(|m| !m.is_pass());
    let mut out = Vec::new();
    if incumbent.is_some() {
        out.push(Move::pass());
    }
    for_each_submultiset(hand, MAX_MOVE_CARDS, |sub| {
        if let Ok(m) = classify_move(sub) {
            if incumbent.map_or(true, |inc| beats(&m, inc)) {
                out.push(m);
            }
        }
    });
    out.sort_unstable();
    out
}

/// Per-category count of every classifiable card set drawn from `deck`
/// (Pass counted once). Summing the array gives the action-space size.
pub fn count_classifiable(deck: &Hand) -> [usize; 15] {
    let mut per = [0usize; 15];
    per[Category::Pass as usize] = 1;
    for_each_submultiset(deck, MAX_MOVE_CARDS, |sub| {
        if let Ok(m) = classify_move(sub) {
            per[m.category() as usize] += 1;
        }
    });
    per
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submultiset_count_matches_product() {
        let h: Hand = "3344455R".parse().unwrap();
        let mut n = 0;
        for_each_submultiset(&h, 20, |_| n += 1);
        assert_eq!(n, 3 * 4 * 3 * 2 - 1);
    }

    #[test]
    fn brute_force_small_example() {
        let h: Hand = "AA2255 55BR".parse().unwrap();
        let inc = classify_move(&"KK".parse().unwrap()).unwrap();
        let moves = legal_moves_brute_force(&h, Some(&inc));
        assert_eq!(moves.len(), 5);
    }
}
