use proptest::prelude::*;

use super::*;
use crate::cards::{deal, Deal};
use crate::evaluation::{RandomPolicy, RulePolicy};

/// Plays like `RulePolicy` but never bids.
struct Passer;

impl Policy for Passer {
    fn name(&self) -> &str {
        "passer"
    }
    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        RulePolicy.choose_move(state, legal, rng)
    }
    fn choose_bid(&self, _state: &GameState, _legal: &[Bid], _rng: &mut GameRng) -> Bid {
        Bid::Pass
    }
}

fn greeted<'a>(agent: &'a dyn Policy, human: u8) -> Session<'a> {
    let mut s = Session::new("s", Seat::new(human).unwrap(), agent, 21);
    s.handle(ClientMessage::Hello {
        protocol_version: PROTOCOL_VERSION,
    });
    assert!(matches!(&s.drain()[..], [ServerMessage::Hello { protocol_version: 1, .. }]));
    s
}

fn error_code(msgs: &[ServerMessage]) -> ErrorCode {
    match msgs {
        [ServerMessage::Error { code, .. }] => *code,
        other => panic!("expected one error, got {other:?}"),
    }
}

/// Plays the human seat with the first offered action until the game ends.
fn play_through(s: &mut Session<'_>) -> Vec<ServerMessage> {
    let mut all = Vec::new();
    loop {
        let msgs = s.drain();
        let next = match msgs.last() {
            Some(ServerMessage::YourTurn { legal_bids: Some(b), .. }) => ClientMessage::Bid { value: b[0] },
            Some(ServerMessage::YourTurn { legal_moves: Some(m), .. }) => ClientMessage::Move { cards: m[0].clone() },
            Some(ServerMessage::GameOver { .. }) => {
                all.extend(msgs);
                return all;
            }
            other => panic!("stuck after {other:?}"),
        };
        all.extend(msgs);
        s.handle(next);
    }
}

#[test]
fn hello_negotiates_the_version() {
    let agent = RulePolicy;
    let mut s = Session::new("abc", Seat::new(0).unwrap(), &agent, 0);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: None,
    });
    assert_eq!(error_code(&s.drain()), ErrorCode::NotReady);
    s.handle(ClientMessage::Hello { protocol_version: 7 });
    assert_eq!(error_code(&s.drain()), ErrorCode::VersionMismatch);
    s.handle(ClientMessage::Hello { protocol_version: 1 });
    assert_eq!(
        s.drain(),
        vec![ServerMessage::Hello {
            protocol_version: 1,
            session: "abc".into()
        }]
    );
}

#[test]
fn malformed_frames_are_bad_requests() {
    for frame in [
        "not json",
        r#"{"type":"dance"}"#,
        r#"{"type":"bid"}"#,
        r#"{"type":"bid","value":1,"extra":true}"#,
        r#"{"type":"move","cards":7}"#,
    ] {
        let e = parse_client(frame).unwrap_err();
        assert_eq!(error_code(&[e]), ErrorCode::BadRequest, "{frame}");
    }
    assert_eq!(
        parse_client(r#"{"type":"new_game"}"#).unwrap(),
        ClientMessage::NewGame {
            mode: GameMode::Auction,
            seed: None
        }
    );
    assert_eq!(
        parse_client(r#"{"type":"move","cards":""}"#).unwrap(),
        ClientMessage::Move { cards: String::new() }
    );
}

#[test]
fn wire_format_is_tagged_snake_case() {
    let m = ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: Some(4),
    };
    assert_eq!(m.to_json(), r#"{"type":"new_game","mode":"assigned","seed":4}"#);
    let e = ServerMessage::error(ErrorCode::NotYourTurn, "x");
    assert_eq!(e.to_json(), r#"{"type":"error","code":"not_your_turn","detail":"x"}"#);
    let t = ServerMessage::YourTurn {
        legal_bids: Some(vec![0, 2]),
        legal_moves: None,
        timeout_ms: Some(500),
    };
    assert_eq!(t.to_json(), r#"{"type":"your_turn","legal_bids":[0,2],"timeout_ms":500}"#);
}

#[test]
fn illegal_move_leaves_the_game_untouched() {
    let agent = RulePolicy;
    let mut s = greeted(&agent, 2);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: Some(5),
    });
    let msgs = s.drain();
    let Some(ServerMessage::YourTurn { legal_moves: Some(offered), .. }) = msgs.last() else {
        panic!("{msgs:?}");
    };
    let before = s.state().unwrap().clone();
    let legal: Vec<String> = before.legal_moves().unwrap().iter().map(|m| m.cards().to_string()).collect();
    assert_eq!(offered, &legal);

    for bad in ["BR2222", "33334", "xyz"] {
        if legal.iter().any(|l| l == bad) {
            continue;
        }
        s.handle(ClientMessage::Move { cards: bad.into() });
        match &s.drain()[..] {
            [ServerMessage::Error {
                code: ErrorCode::IllegalMove,
                legal_moves: Some(l),
                ..
            }] => assert_eq!(l, &legal),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.state().unwrap(), &before);
    }
    s.handle(ClientMessage::Bid { value: 1 });
    assert_eq!(error_code(&s.drain()), ErrorCode::WrongPhase);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: None,
    });
    assert_eq!(error_code(&s.drain()), ErrorCode::WrongPhase);
    assert_eq!(s.state().unwrap(), &before);
}

#[test]
fn illegal_bid_lists_the_legal_ones() {
    let agent = RulePolicy;
    for seed in 0..20 {
        let mut s = greeted(&agent, 0);
        s.handle(ClientMessage::NewGame {
            mode: GameMode::Auction,
            seed: Some(seed),
        });
        let msgs = s.drain();
        let Some(ServerMessage::YourTurn { legal_bids: Some(bids), .. }) = msgs.last() else {
            continue;
        };
        let bad = (0..=4).find(|v| !bids.contains(v)).unwrap();
        let before = s.state().unwrap().clone();
        s.handle(ClientMessage::Bid { value: bad });
        match &s.drain()[..] {
            [ServerMessage::Error {
                code: ErrorCode::IllegalBid,
                legal_bids: Some(l),
                ..
            }] => assert_eq!(l, bids),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.state().unwrap(), &before);
        s.handle(ClientMessage::Move { cards: "3".into() });
        assert_eq!(error_code(&s.drain()), ErrorCode::WrongPhase);
        return;
    }
    panic!("the human never opened an auction");
}

#[test]
fn moves_are_matched_by_card_multiset() {
    let h: Hand = "34567".parse().unwrap();
    let straight = classify_move(&h).unwrap();
    let legal = vec![Move::pass(), straight];
    assert_eq!(move_from_cards("76543", &legal).unwrap(), straight);
    assert_eq!(move_from_cards("", &legal).unwrap(), Move::pass());
    assert!(move_from_cards("3", &legal).unwrap_err().contains("not legal"));
    assert!(move_from_cards("3Z", &legal).is_err());
}

#[test]
fn finished_games_replay_and_are_announced() {
    for mode in [GameMode::Auction, GameMode::Assigned] {
        let agent = RulePolicy;
        let mut s = greeted(&agent, 1);
        s.handle(ClientMessage::NewGame { mode, seed: Some(9) });
        let msgs = play_through(&mut s);
        let Some(ServerMessage::GameOver { settlement, won }) = msgs.last() else {
            unreachable!()
        };
        let logs = s.take_finished();
        assert_eq!(logs.len(), 1);
        let log = &logs[0];
        assert_eq!(log.settlement.as_ref(), Some(settlement));
        assert_eq!(*won, settlement.points[1] > 0);
        let rec = log.record.as_ref().unwrap();
        let end = rec.replay(1).unwrap();
        assert_eq!(&end.settle().unwrap(), settlement);
        assert_eq!(end.history().len(), log.plies);
        assert_eq!(&end, s.state().unwrap());
        assert!(!s.in_game());
        s.handle(ClientMessage::Move { cards: "3".into() });
        assert_eq!(error_code(&s.drain()), ErrorCode::WrongPhase);
    }
}

#[test]
fn every_your_turn_carries_the_timer() {
    let agent = RulePolicy;
    let mut s = greeted(&agent, 0).with_turn_timeout(Some(Duration::from_millis(1500)));
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: Some(2),
    });
    for m in play_through(&mut s) {
        if let ServerMessage::YourTurn { timeout_ms, .. } = m {
            assert_eq!(timeout_ms, Some(1500));
        }
    }
    let mut s = greeted(&agent, 0).with_turn_timeout(None);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: Some(2),
    });
    assert!(s
        .drain()
        .iter()
        .all(|m| !matches!(m, ServerMessage::YourTurn { timeout_ms: Some(_), .. })));
}

#[test]
fn timeouts_auto_play_and_are_logged() {
    let agent = RulePolicy;
    let mut s = greeted(&agent, 0);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: Some(3),
    });
    s.drain();
    let mut expiries = 0;
    while s.in_game() {
        let g = s.state().unwrap().clone();
        assert!(s.human_to_act());
        s.timeout();
        expiries += 1;
        let after = s.state().unwrap();
        if g.phase() == Phase::Bidding && after.phase() == Phase::Bidding && after.first_bidder() == g.first_bidder() {
            assert_eq!(after.bids()[g.bids().len()], (g.current(), Bid::Pass));
        }
        if g.phase() == Phase::Play {
            let (seat, mv) = after.history()[g.history().len()];
            assert_eq!(seat, g.current());
            let legal = g.legal_moves().unwrap();
            if legal.contains(&Move::pass()) {
                assert!(mv.is_pass());
            } else {
                assert_eq!(Some(&mv), legal.iter().min());
            }
        }
        s.drain();
    }
    assert_eq!(s.events().len(), expiries);
    assert!(s.events()[0].contains("timed out"));
    assert_eq!(s.take_finished().len(), 1);
    s.timeout();
    assert_eq!(s.events().len(), expiries);
}

#[test]
fn void_records_an_unfinished_game() {
    let agent = RulePolicy;
    let mut s = greeted(&agent, 0);
    s.void("nothing to void");
    assert!(s.take_finished().is_empty());
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: Some(8),
    });
    s.void("client went away");
    let logs = s.take_finished();
    assert_eq!(logs.len(), 1);
    assert_eq!(logs[0].settlement, None);
    assert_eq!(logs[0].record, None);
    assert!(!s.in_game());
    assert!(s.events().last().unwrap().contains("client went away"));
}

#[test]
fn all_pass_auctions_redeal_then_force_an_opening() {
    let agent = Passer;
    let mut s = greeted(&agent, 0);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: Some(40),
    });
    let mut rounds = 0;
    while s.state().unwrap().phase() == Phase::Bidding {
        rounds += 1;
        s.drain();
        s.handle(ClientMessage::Bid { value: 0 });
    }
    assert!(rounds >= MAX_REDEALS as usize, "{rounds}");
    let g = s.state().unwrap();
    assert_eq!(g.phase(), Phase::Play);
    assert_eq!(g.deal(), &deal(40 + MAX_REDEALS as u64));
    assert_eq!(g.landlord(), Some(g.first_bidder()));
    assert_eq!(g.bids()[0].1, Bid::One);
    assert!(play_through_tail(&mut s));
}

fn play_through_tail(s: &mut Session<'_>) -> bool {
    while s.in_game() {
        let legal = s.state().unwrap().legal_moves().unwrap();
        s.handle(ClientMessage::Move {
            cards: legal[0].cards().to_string(),
        });
    }
    let logs = s.take_finished();
    logs.len() == 1 && logs[0].record.as_ref().unwrap().replay(1).is_ok()
}

#[test]
fn reduced_deck_sessions_refuse_auctions() {
    let agent = RulePolicy;
    let mut s = greeted(&agent, 0).with_variant(Variant::Reduced);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: None,
    });
    assert_eq!(error_code(&s.drain()), ErrorCode::BadRequest);
    s.handle(ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: None,
    });
    let msgs = play_through(&mut s);
    for m in msgs {
        if let ServerMessage::State { view } = m {
            assert_eq!(view.landlord_cards, None);
            assert!(view.bids.is_empty());
        }
    }
}

/// Field-by-field: each part of the view is public or the seat's own.
fn check_view(g: &GameState, seat: Seat) {
    let v = view_for(g, seat);
    assert_eq!(v.seat as usize, seat.index());
    assert_eq!(v.hand, g.hand(seat).to_string());
    assert_eq!(v.counts, [0, 1, 2].map(|i| g.hands()[i].len()));
    assert_eq!(v.bids.len(), g.bids().len());
    assert_eq!(v.landlord.map(usize::from), g.landlord().map(|l| l.index()));
    match g.landlord() {
        Some(_) => assert_eq!(v.landlord_cards, Some(g.deal().hidden.to_string())),
        None => assert_eq!(v.landlord_cards, None),
    }
    let played: Vec<(usize, String)> = g.history().iter().map(|(s, m)| (s.index(), m.cards().to_string())).collect();
    let shown: Vec<(usize, String)> = v.history.iter().map(|p| (p.seat as usize, p.cards.clone())).collect();
    assert_eq!(played, shown);
    let json = serde_json::to_value(&v).unwrap();
    let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    for k in &keys {
        assert!(
            [
                "seat",
                "phase",
                "hand",
                "counts",
                "first_bidder",
                "bids",
                "landlord",
                "landlord_cards",
                "history",
                "current",
                "multiplier"
            ]
            .contains(k),
            "{k}"
        );
    }
}

/// Deal equal to `d` for `seat`, with the other seats' cards reshuffled.
fn reshuffle_others(d: &Deal, seat: Seat, rng: &mut GameRng) -> Deal {
    let (a, b) = (seat.next(), seat.prev());
    let mut pool: Vec<_> = d.hands[a.index()].ranks().chain(d.hands[b.index()].ranks()).collect();
    rng.shuffle(&mut pool);
    let na = d.hands[a.index()].len();
    let mut out = *d;
    out.hands[a.index()] = Hand::from_ranks(pool[..na].iter().copied()).unwrap();
    out.hands[b.index()] = Hand::from_ranks(pool[na..].iter().copied()).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn views_reveal_only_public_and_own_cards(seed in any::<u64>(), first in 0u8..3) {
        let mut rng = GameRng::new(seed);
        let d = deal(seed);
        let first = Seat::new(first).unwrap();
        for s in 0..3 {
            let seat = Seat::new(s).unwrap();
            let alt = reshuffle_others(&d, seat, &mut rng);
            prop_assert_eq!(
                view_for(&GameState::from_deal(d, first), seat),
                view_for(&GameState::from_deal(alt, first), seat)
            );
        }
        let mut g = GameState::from_deal(d, first);
        loop {
            for s in 0..3 {
                check_view(&g, Seat::new(s).unwrap());
            }
            match g.phase() {
                Phase::Bidding => {
                    let legal = g.legal_bids().unwrap();
                    g.bid_in_place(RandomPolicy.choose_bid(&g, &legal, &mut rng)).unwrap();
                }
                Phase::Play => {
                    let legal = g.legal_moves().unwrap();
                    g.play_in_place(&RandomPolicy.choose_move(&g, &legal, &mut rng)).unwrap();
                }
                _ => break,
            }
        }
    }
}
