use proptest::prelude::*;
use sha2::{Digest, Sha256};

use super::*;
use crate::cards::{deal, Deal, Variant};
use crate::evaluation::{RandomPolicy, RulePolicy};
use crate::game::{Phase, Seat};
use crate::networks::BidNetConfig;

fn policy(seed: u64) -> BidPolicy {
    let net = BidNetwork::new(BidNetConfig::default(), &mut GameRng::new(seed));
    BidPolicy::new(net, DEFAULT_THRESHOLDS).unwrap()
}

/// Landlord at seat 0 holds low cards; seat 1 holds both jokers, four twos,
/// four aces, four kings and three queens.
fn hopeless_deal() -> Deal {
    Deal {
        hands: [
            "345556678889TJJJQ".parse().unwrap(),
            "BR2222AAAAKKKKQQQ".parse().unwrap(),
            "3344466778999TTTJ".parse().unwrap(),
        ],
        hidden: "357".parse().unwrap(),
        seed: 0,
        variant: Variant::Standard,
    }
}

#[test]
fn threshold_map_follows_the_cut_points() {
    let p = policy(1);
    assert_eq!(p.map_value(-0.5), Bid::Pass);
    assert_eq!(p.map_value(f32::NAN), Bid::Pass);
    assert_eq!(p.map_value(0.0), Bid::One);
    assert_eq!(p.map_value(0.29), Bid::One);
    assert_eq!(p.map_value(0.3), Bid::Two);
    assert_eq!(p.map_value(0.6), Bid::Three);
    assert_eq!(p.map_value(5.0), Bid::Three);
}

#[test]
fn thresholds_must_increase() {
    let net = BidNetwork::new(BidNetConfig::default(), &mut GameRng::new(0));
    assert!(matches!(BidPolicy::new(net, [0.3, 0.3, 0.6]), Err(BiddingError::Thresholds(_))));
}

#[test]
fn clipping_falls_back_to_highest_legal_below() {
    assert_eq!(clip_bid(Bid::Two, &[Bid::Pass, Bid::Three]), Bid::Pass);
    assert_eq!(clip_bid(Bid::Three, &[Bid::Pass, Bid::Two, Bid::Three]), Bid::Three);
    assert_eq!(clip_bid(Bid::Two, &[Bid::Pass, Bid::One, Bid::Two, Bid::Three]), Bid::Two);
    assert_eq!(clip_bid(Bid::One, &[Bid::Pass, Bid::Two, Bid::Three]), Bid::Pass);
}

#[test]
fn threshold_sweep_is_monotone() {
    let p = policy(2);
    let rows = threshold_sweep(&p, -1.0, 1.0, 201);
    assert_eq!(rows.len(), 201);
    for w in rows.windows(2) {
        assert!(w[0].bid <= w[1].bid);
    }
    assert_eq!(rows[0].bid, Bid::Pass);
    assert_eq!(rows[200].bid, Bid::Three);
}

/// A random auction prefix on a random deal: the seat to act and the bids so far.
fn random_context(rng: &mut GameRng) -> GameState {
    loop {
        let mut g = GameState::new_game(rng.next_u64(), Seat::new(rng.index(3) as u8).unwrap());
        let prior = rng.index(3);
        for _ in 0..prior {
            if g.phase() != Phase::Bidding {
                break;
            }
            let legal = g.legal_bids().unwrap();
            g.bid_in_place(legal[rng.index(legal.len())]).unwrap();
        }
        if g.phase() == Phase::Bidding {
            return g;
        }
    }
}

#[test]
fn decisions_are_always_legal() {
    let p = policy(3);
    let strategies = [
        BidStrategy::Scripted,
        BidStrategy::Heuristic,
        BidStrategy::Random,
        BidStrategy::Network(Box::new(p.clone())),
    ];
    let mut rng = GameRng::new(10);
    let mut seen_prior = [0usize; 3];
    for _ in 0..10_000 {
        let g = random_context(&mut rng);
        let legal = g.legal_bids().unwrap();
        let prior: Vec<Bid> = g.bids().iter().map(|&(_, b)| b).collect();
        seen_prior[prior.len()] += 1;
        let b = decide_bid(&p, g.hand(g.current()), &prior, &legal).unwrap();
        assert!(legal.contains(&b), "{b:?} not in {legal:?}");
        for s in &strategies {
            assert!(legal.contains(&s.decide(&g, &legal, &mut rng)));
        }
    }
    assert!(seen_prior.iter().all(|&n| n > 1000), "{seen_prior:?}");
}

proptest! {
    #[test]
    fn higher_scores_never_lower_the_bid(a in -2.0f32..2.0, b in -2.0f32..2.0, mask in 0usize..8) {
        let p = policy(4);
        let mut legal = vec![Bid::Pass];
        for (i, bid) in [Bid::One, Bid::Two, Bid::Three].into_iter().enumerate() {
            if mask & (1 << i) != 0 {
                legal.push(bid);
            }
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let x = clip_bid(p.map_value(lo), &legal);
        let y = clip_bid(p.map_value(hi), &legal);
        prop_assert!(x <= y);
        prop_assert!(legal.contains(&x) && legal.contains(&y));
    }
}

#[test]
fn closing_three_bid_ends_the_auction_before_anyone_else_acts() {
    let g = GameState::new_game(7, Seat::new(0).unwrap());
    let g = g.apply_bid(Bid::One).unwrap().apply_bid(Bid::Three).unwrap();
    assert_eq!(g.phase(), Phase::Play);
    assert_eq!(g.landlord(), Seat::new(1));
    assert!(g.legal_bids().is_err());
}

#[test]
fn hopeless_landlord_hand_is_labelled_minus_one() {
    let d = hopeless_deal();
    assert_eq!(d.union(), crate::cards::Hand::full_deck());
    let focal = Seat::new(0).unwrap();
    assert_eq!(rollout_label(d, focal, &RulePolicy, 1, 0.0, 0), -1.0);

    // Independent playout of the same game, move by move.
    let mut g = GameState::with_landlord(d, focal);
    let mut rng = GameRng::new(0);
    while g.phase() == Phase::Play {
        let legal = g.legal_moves().unwrap();
        let m = crate::evaluation::Policy::choose_move(&RulePolicy, &g, &legal, &mut rng);
        g = g.apply_move(&m).unwrap();
    }
    assert_ne!(g.winner(), Some(focal));
    assert_eq!(g.settle().unwrap().winner_side, crate::game::Side::Peasants);

    // Random and half-random play never rescue this hand either.
    assert_eq!(rollout_label(d, focal, &RandomPolicy, 100, 0.0, 7), -1.0);
    assert_eq!(rollout_label(d, focal, &RulePolicy, 100, 0.5, 9), -1.0);
}

fn small_config(seed: u64) -> DatasetConfig {
    DatasetConfig {
        n_deals: 60,
        rollouts_per_deal: 3,
        seed,
        rollout_epsilon: 0.1,
        threads: 1,
    }
}

fn file_hash(path: &std::path::Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn same_seed_gives_identical_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_bid_dataset(&RulePolicy, &small_config(5));
    let b = generate_bid_dataset(
        &RulePolicy,
        &DatasetConfig {
            threads: 3,
            ..small_config(5)
        },
    );
    assert_eq!(a, b);
    write_dataset(&dir.path().join("a.bin"), &a).unwrap();
    write_dataset(&dir.path().join("b.bin"), &b).unwrap();
    assert_eq!(file_hash(&dir.path().join("a.bin")), file_hash(&dir.path().join("b.bin")));
    let c = generate_bid_dataset(&RulePolicy, &small_config(6));
    write_dataset(&dir.path().join("c.bin"), &c).unwrap();
    assert_ne!(file_hash(&dir.path().join("a.bin")), file_hash(&dir.path().join("c.bin")));
}

#[test]
fn stored_labels_match_an_independent_rerun() {
    let config = small_config(8);
    let samples = generate_bid_dataset(&RandomPolicy, &config);
    let mut prior_counts = [0usize; 3];
    for s in &samples {
        let c = &s.context;
        prior_counts[c.prior.len()] += 1;
        assert!(s.label.is_finite() && (-1.0..=1.0).contains(&s.label));
        let d = deal(c.deal_seed);
        assert_eq!(d.hands[c.focal.index()], c.hand);
        let relabel = rollout_label(d, c.focal, &RandomPolicy, config.rollouts_per_deal, config.rollout_epsilon, c.rollout_seed);
        assert_eq!(relabel, s.label);
        assert_eq!(s.features, crate::encoding::encode_bid_context(&c.hand, &c.prior).unwrap());
        assert!(c.prior.iter().all(|&b| b != Bid::Three));
    }
    assert!(prior_counts.iter().all(|&n| n > 0), "{prior_counts:?}");
}

#[test]
fn dataset_file_round_trips_and_detects_damage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bids.bin");
    let samples = generate_bid_dataset(&RandomPolicy, &small_config(2));
    write_dataset(&path, &samples).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], DATASET_MAGIC);
    assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), samples.len() as u64);
    assert_eq!(read_dataset(&path).unwrap(), samples);

    let mut bad = bytes.clone();
    bad[100] ^= 0x40;
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(read_dataset(&path), Err(BiddingError::BadDataset(_))));
    std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
    assert!(matches!(read_dataset(&path), Err(BiddingError::BadDataset(_))));
}

fn constant_dataset(n: usize, label: f32) -> Vec<BidSample> {
    let mut samples = generate_bid_dataset(
        &RandomPolicy,
        &DatasetConfig {
            n_deals: n,
            rollouts_per_deal: 1,
            ..small_config(1)
        },
    );
    for s in &mut samples {
        s.label = label;
    }
    samples
}

#[test]
fn constant_labels_are_learned() {
    let data = constant_dataset(128, 0.4);
    let config = BidTrainConfig {
        epochs: 40,
        batch_size: 32,
        ..BidTrainConfig::default()
    };
    let (net, report) = train_bid_network(&data, &config).unwrap();
    assert!(report.train_loss < 0.01, "{report:?}");
    assert!(report.val_loss.unwrap() < 0.01, "{report:?}");
    assert_eq!(report.train_samples + report.val_samples, 128);
    for s in &data[..10] {
        let v = net.score(&s.features);
        assert!((v - 0.4).abs() < 0.1, "{v}");
        assert_eq!(v, net.score(&s.features));
    }
}

#[test]
fn training_is_deterministic_and_needs_a_batch() {
    let data = constant_dataset(40, -0.2);
    let config = BidTrainConfig {
        epochs: 2,
        batch_size: 16,
        ..BidTrainConfig::default()
    };
    let (a, ra) = train_bid_network(&data, &config).unwrap();
    let (b, rb) = train_bid_network(&data, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(a.to_checkpoint().to_bytes(), b.to_checkpoint().to_bytes());
    let short = BidTrainConfig {
        batch_size: 64,
        ..config
    };
    assert!(matches!(
        train_bid_network(&data, &short),
        Err(BiddingError::EmptyDataset { have: 40, need: 64 })
    ));
}

#[test]
fn strategies_parse_by_name_or_checkpoint() {
    assert!(matches!(BidStrategy::parse("scripted").unwrap(), BidStrategy::Scripted));
    assert!(matches!(BidStrategy::parse("heuristic").unwrap(), BidStrategy::Heuristic));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bid.ddz");
    policy(9).net.save(&path).unwrap();
    match BidStrategy::parse(path.to_str().unwrap()).unwrap() {
        BidStrategy::Network(p) => assert_eq!(p.net, policy(9).net),
        other => panic!("{other:?}"),
    }
    assert!(BidStrategy::parse(dir.path().join("missing").to_str().unwrap()).is_err());
}

#[test]
fn heuristic_strength_counts_power_cards() {
    let strong: crate::cards::Hand = "BR222AAKKQJT98765".parse().unwrap();
    let weak: crate::cards::Hand = "33445566789TJQQKK".parse().unwrap();
    assert!(heuristic_strength(&strong) > heuristic_strength(&weak));
    let all = [Bid::Pass, Bid::One, Bid::Two, Bid::Three];
    assert_eq!(heuristic_bid(&strong, &all), Bid::Three);
    assert_eq!(heuristic_bid(&weak, &all), Bid::Pass);
}
