use std::ops::RangeInclusive;

use super::moves::{Category, Move};
use super::{Hand, Rank, NUM_RANKS};

/// No move can use more cards than the largest hand (17 dealt + 3 hidden).
pub const MAX_MOVE_CARDS: usize = 20;

const SOLO_CHAIN: RangeInclusive<u8> = 5..=12;
const PAIR_CHAIN: RangeInclusive<u8> = 3..=10;
const TRIO_CHAIN: RangeInclusive<u8> = 2..=6;
const PLANE_SOLOS: RangeInclusive<u8> = 2..=5;
const PLANE_PAIRS: RangeInclusive<u8> = 2..=4;

/// Restriction applied while generating responses to an incumbent move.
#[derive(Clone, Copy)]
struct Target {
    length: u8,
    above: Rank,
}

/// Every legal move from `hand`.
///
/// Leading (`incumbent == None`, or a Pass incumbent) yields all playable
/// non-Pass moves. Responding yields Pass plus every move that beats the
/// incumbent. The result is sorted by [`Move`]'s ordering: category, principal
/// rank, length, then kickers.
pub fn legal_moves(hand: &Hand, incumbent: Option<&Move>) -> Vec<Move> {
    let mut out = Vec::new();
    match incumbent.filter(|m| !m.is_pass()) {
        None => {
            for cat in &Category::ALL[1..] {
                generate(hand, *cat, None, &mut out);
            }
        }
        Some(inc) => {
            out.push(Move::pass());
            match inc.category() {
                Category::Rocket => {}
                Category::Bomb => {
                    let target = Target {
                        length: 1,
                        above: inc.principal(),
                    };
                    generate(hand, Category::Bomb, Some(target), &mut out);
                    generate(hand, Category::Rocket, None, &mut out);
                }
                cat => {
                    let target = Target {
                        length: inc.length(),
                        above: inc.principal(),
                    };
                    generate(hand, cat, Some(target), &mut out);
                    generate(hand, Category::Bomb, None, &mut out);
                    generate(hand, Category::Rocket, None, &mut out);
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// The global catalogue of abstract moves, Pass first, in the stable move order.
pub fn enumerate_action_space() -> Vec<Move> {
    let mut all = legal_moves(&Hand::full_deck(), None);
    all.insert(0, Move::pass());
    all
}

fn principals(target: Option<Target>) -> impl Iterator<Item = Rank> {
    let start = target.map_or(0, |t| t.above.ordinal() + 1);
    (start..NUM_RANKS as u8).map(Rank)
}

fn lengths(range: RangeInclusive<u8>, target: Option<Target>) -> RangeInclusive<u8> {
    match target {
        Some(t) if range.contains(&t.length) => t.length..=t.length,
        Some(_) => 1..=0,
        None => range,
    }
}

fn generate(hand: &Hand, cat: Category, target: Option<Target>, out: &mut Vec<Move>) {
    let c = hand.counts();
    let single = |r: Rank| Move::from_shape(cat, r, 1, Hand::empty());
    match cat {
        Category::Pass => {}
        Category::Solo => out.extend(principals(target).filter(|r| c[r.index()] >= 1).map(single)),
        Category::Pair => out.extend(principals(target).filter(|r| c[r.index()] >= 2).map(single)),
        Category::Trio => out.extend(principals(target).filter(|r| c[r.index()] >= 3).map(single)),
        Category::Bomb => out.extend(principals(target).filter(|r| c[r.index()] == 4).map(single)),
        Category::Rocket => {
            if c[13] == 1 && c[14] == 1 {
                out.push(Move::from_shape(cat, Rank::BLACK_JOKER, 1, Hand::empty()));
            }
        }
        Category::TrioWithSolo | Category::TrioWithPair => {
            let need = if cat == Category::TrioWithSolo { 1 } else { 2 };
            for t in principals(target).filter(|r| c[r.index()] >= 3) {
                for k in Rank::all().filter(|&k| k != t && c[k.index()] >= need) {
                    let kick = Hand::from_ranks(std::iter::repeat(k).take(need as usize))
                        .expect("held kicker");
                    out.push(Move::from_shape(cat, t, 1, kick));
                }
            }
        }
        Category::SoloChain => chains(c, 1, lengths(SOLO_CHAIN, target), target, |lo, len| {
            out.push(Move::from_shape(cat, lo, len, Hand::empty()))
        }),
        Category::PairChain => chains(c, 2, lengths(PAIR_CHAIN, target), target, |lo, len| {
            out.push(Move::from_shape(cat, lo, len, Hand::empty()))
        }),
        Category::TrioChain => chains(c, 3, lengths(TRIO_CHAIN, target), target, |lo, len| {
            out.push(Move::from_shape(cat, lo, len, Hand::empty()))
        }),
        Category::PlaneWithSolos => chains(c, 3, lengths(PLANE_SOLOS, target), target, |lo, len| {
            let (start, end) = (lo.ordinal(), lo.ordinal() + len);
            let mut caps = [0u8; NUM_RANKS];
            for r in Rank::all() {
                let i = r.index();
                if (start..end).contains(&r.ordinal()) {
                    continue;
                }
                caps[i] = c[i].min(3);
                let adjacent = (start > 0 && r.ordinal() == start - 1) || r.ordinal() == end;
                if adjacent && r.is_chainable() && caps[i] == 3 {
                    caps[i] = 2;
                }
            }
            for_each_multiset(&caps, len as usize, &mut |kick| {
                if !(kick.count(Rank::BLACK_JOKER) == 1 && kick.count(Rank::RED_JOKER) == 1) {
                    out.push(Move::from_shape(cat, lo, len, *kick));
                }
            });
        }),
        Category::PlaneWithPairs => chains(c, 3, lengths(PLANE_PAIRS, target), target, |lo, len| {
            let (start, end) = (lo.ordinal(), lo.ordinal() + len);
            let pair_ranks: Vec<Rank> = Rank::all()
                .filter(|r| !r.is_joker() && !(start..end).contains(&r.ordinal()) && c[r.index()] >= 2)
                .collect();
            for_each_subset(&pair_ranks, len as usize, &mut |ranks| {
                let kick = Hand::from_ranks(ranks.iter().flat_map(|&r| [r, r])).expect("held pairs");
                out.push(Move::from_shape(cat, lo, len, kick));
            });
        }),
        Category::QuadWithSolos => {
            for q in principals(target).filter(|r| c[r.index()] == 4) {
                let mut caps = [0u8; NUM_RANKS];
                for r in Rank::all().filter(|&r| r != q) {
                    caps[r.index()] = c[r.index()].min(2);
                }
                for_each_multiset(&caps, 2, &mut |kick| {
                    if !(kick.count(Rank::BLACK_JOKER) == 1 && kick.count(Rank::RED_JOKER) == 1) {
                        out.push(Move::from_shape(cat, q, 1, *kick));
                    }
                });
            }
        }
        Category::QuadWithPairs => {
            for q in principals(target).filter(|r| c[r.index()] == 4) {
                let pair_ranks: Vec<Rank> = Rank::all()
                    .filter(|&r| r != q && !r.is_joker() && c[r.index()] >= 2)
                    .collect();
                for_each_subset(&pair_ranks, 2, &mut |ranks| {
                    let kick = Hand::from_ranks(ranks.iter().flat_map(|&r| [r, r])).expect("held pairs");
                    out.push(Move::from_shape(cat, q, 1, kick));
                });
            }
        }
    }
}

/// Calls `emit(lowest, length)` for every run of chainable ranks held at least
/// `width` times, with length in `lens` and lowest rank above the target.
fn chains(
    counts: &[u8; NUM_RANKS],
    width: u8,
    lens: RangeInclusive<u8>,
    target: Option<Target>,
    mut emit: impl FnMut(Rank, u8),
) {
    let ace = Rank::ACE.ordinal();
    let first = target.map_or(0, |t| t.above.ordinal() + 1);
    for len in lens {
        if len == 0 || len > ace + 1 {
            continue;
        }
        for lo in first..=(ace + 1 - len).max(first) {
            if lo + len > ace + 1 {
                break;
            }
            if (lo..lo + len).all(|r| counts[r as usize] >= width) {
                emit(Rank(lo), len);
            }
        }
    }
}

/// Every multiset of exactly `size` cards with at most `caps[r]` copies of rank r.
fn for_each_multiset(caps: &[u8; NUM_RANKS], size: usize, f: &mut impl FnMut(&Hand)) {
    fn rec(caps: &[u8; NUM_RANKS], rank: usize, left: usize, acc: &mut Hand, f: &mut impl FnMut(&Hand)) {
        if left == 0 {
            f(acc);
            return;
        }
        if rank == NUM_RANKS {
            return;
        }
        let room: usize = caps[rank..].iter().map(|&c| c as usize).sum();
        if room < left {
            return;
        }
        let r = Rank(rank as u8);
        let max_take = (caps[rank] as usize).min(left);
        for take in 0..=max_take {
            if take > 0 {
                acc.add_rank(r, 1);
            }
            rec(caps, rank + 1, left - take, acc, f);
        }
        let mut counts = *acc.counts();
        counts[rank] -= max_take as u8;
        *acc = Hand::from_counts(counts).expect("restored");
    }
    let mut acc = Hand::empty();
    rec(caps, 0, size, &mut acc, f);
}

/// Every `size`-element subset of `items`, in lexicographic order.
fn for_each_subset<T: Copy>(items: &[T], size: usize, f: &mut impl FnMut(&[T])) {
    fn rec<T: Copy>(items: &[T], from: usize, size: usize, acc: &mut Vec<T>, f: &mut impl FnMut(&[T])) {
        if acc.len() == size {
            f(acc);
            return;
        }
        for i in from..items.len() {
            if items.len() - i < size - acc.len() {
                break;
            }
            acc.push(items[i]);
            rec(items, i + 1, size, acc, f);
            acc.pop();
        }
    }
    let mut acc = Vec::with_capacity(size);
    rec(items, 0, size, &mut acc, f);
}
