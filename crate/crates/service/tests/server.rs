use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use futures::{SinkExt, StreamExt};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

use ddz_core::cards::Move;
use ddz_core::evaluation::{Policy, RulePolicy};
use ddz_core::game::{read_replays, Bid, GameState, Phase, Seat};
use ddz_core::rng::GameRng;
use ddz_core::session::{move_from_cards, ClientMessage, ErrorCode, GameMode, ServerMessage, PROTOCOL_VERSION};
use ddz_service::client::{health, Client};
use ddz_service::{ServeConfig, Server, ServiceError, REPLAY_FILE};

const LIMIT: Duration = Duration::from_secs(30);

struct Running {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<Result<(), ServiceError>>,
}

impl Running {
    async fn stop(mut self) {
        let _ = self.stop.take().unwrap().send(());
        self.task.await.unwrap().unwrap();
    }
}

fn config(agent: Arc<dyn Policy>, replays: Option<&Path>) -> ServeConfig {
    let mut c = ServeConfig::new("127.0.0.1:0".parse().unwrap(), agent);
    c.replay_dir = replays.map(Path::to_path_buf);
    c
}

async fn start(config: ServeConfig) -> Running {
    let server = Server::bind(config).await.unwrap();
    let addr = server.local_addr().unwrap();
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(server.run(async {
        let _ = rx.await;
    }));
    Running {
        addr,
        stop: Some(tx),
        task,
    }
}

async fn recv(c: &mut Client) -> ServerMessage {
    c.recv_within(LIMIT).await.unwrap().expect("server hung up")
}

async fn greet(c: &mut Client) {
    c.send(&ClientMessage::Hello {
        protocol_version: PROTOCOL_VERSION,
    })
    .await
    .unwrap();
    assert!(matches!(recv(c).await, ServerMessage::Hello { .. }));
}

/// The scripted human: highest legal bid, first offered move.
fn respond(msg: &ServerMessage) -> Option<ClientMessage> {
    match msg {
        ServerMessage::YourTurn {
            legal_bids: Some(b), ..
        } => Some(ClientMessage::Bid {
            value: *b.iter().max().unwrap(),
        }),
        ServerMessage::YourTurn {
            legal_moves: Some(m), ..
        } => Some(ClientMessage::Move { cards: m[0].clone() }),
        _ => None,
    }
}

#[derive(Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "dir", content = "msg", rename_all = "snake_case")]
enum TraceLine {
    Send(ClientMessage),
    Recv(ServerMessage),
}

/// Plays one full game, returning every frame in both directions.
async fn scripted_game(c: &mut Client, seed: u64, mode: GameMode) -> Vec<TraceLine> {
    let mut trace = Vec::new();
    let mut out = vec![
        ClientMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
        },
        ClientMessage::NewGame { mode, seed: Some(seed) },
    ];
    loop {
        for m in out.drain(..) {
            c.send(&m).await.unwrap();
            trace.push(TraceLine::Send(m));
        }
        let msg = recv(c).await;
        let reply = respond(&msg);
        let over = matches!(msg, ServerMessage::GameOver { .. });
        trace.push(TraceLine::Recv(msg));
        if over {
            return trace;
        }
        out.extend(reply);
    }
}

#[tokio::test]
async fn health_probe_reports_ready() {
    let s = start(config(Arc::new(RulePolicy), None)).await;
    let h = health(s.addr).await.unwrap();
    assert_eq!(h["status"], "ready");
    assert_eq!(h["protocol_version"], PROTOCOL_VERSION);
    assert_eq!(h["agent"], "rule");
    s.stop().await;
}

#[tokio::test]
async fn scripted_game_is_persisted_as_a_valid_replay() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(config(Arc::new(RulePolicy), Some(dir.path()))).await;
    for (i, mode) in [GameMode::Auction, GameMode::Assigned].into_iter().enumerate() {
        let mut c = Client::connect(s.addr).await.unwrap();
        let trace = scripted_game(&mut c, 100 + i as u64, mode).await;
        assert!(matches!(trace.last(), Some(TraceLine::Recv(ServerMessage::GameOver { .. }))));
    }
    let file = dir.path().join(REPLAY_FILE);
    let mut tries = 0;
    while std::fs::read_to_string(&file).unwrap().lines().count() < 2 && tries < 300 {
        tokio::time::sleep(Duration::from_millis(10)).await;
        tries += 1;
    }
    let records = read_replays(std::io::BufReader::new(std::fs::File::open(&file).unwrap())).unwrap();
    assert_eq!(records.len(), 2);
    for (line, r) in &records {
        let end = r.replay(*line).unwrap();
        assert_eq!(end.phase(), Phase::Terminal);
        assert_eq!(end.settle().unwrap(), r.settlement);
    }
    assert!(health(s.addr).await.unwrap()["games"].as_u64().unwrap() >= 2);
    s.stop().await;
}

#[tokio::test]
async fn illegal_move_is_rejected_with_the_legal_list() {
    let s = start(config(Arc::new(RulePolicy), None)).await;
    let mut c = Client::connect(s.addr).await.unwrap();
    greet(&mut c).await;
    c.send(&ClientMessage::NewGame {
        mode: GameMode::Assigned,
        seed: Some(6),
    })
    .await
    .unwrap();
    let mut played = 0;
    let legal = loop {
        match recv(&mut c).await {
            ServerMessage::YourTurn {
                legal_moves: Some(m), ..
            } => break m,
            ServerMessage::State { view } => played = view.history.len(),
            other => panic!("{other:?}"),
        }
    };
    let bogus = ["BR2222", "33334"].into_iter().find(|b| !legal.iter().any(|l| l == b)).unwrap();
    c.send(&ClientMessage::Move { cards: bogus.into() }).await.unwrap();
    match recv(&mut c).await {
        ServerMessage::Error {
            code: ErrorCode::IllegalMove,
            legal_moves: Some(l),
            ..
        } => assert_eq!(l, legal),
        other => panic!("{other:?}"),
    }
    c.send_raw("{\"type\":\"move\"").await.unwrap();
    match recv(&mut c).await {
        ServerMessage::Error {
            code: ErrorCode::BadRequest,
            ..
        } => {}
        other => panic!("{other:?}"),
    }
    c.send(&ClientMessage::Move {
        cards: legal[0].clone(),
    })
    .await
    .unwrap();
    match recv(&mut c).await {
        ServerMessage::State { view } => {
            assert_eq!(view.history[played].seat, view.seat);
            assert_eq!(view.history[played].cards, legal[0]);
        }
        other => panic!("{other:?}"),
    }
    s.stop().await;
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden_trace.jsonl")
}

fn trace_to_text(trace: &[TraceLine]) -> String {
    trace.iter().map(|t| serde_json::to_string(t).unwrap() + "\n").collect()
}

fn seed_of(trace: &[TraceLine]) -> (u64, GameMode) {
    trace
        .iter()
        .find_map(|t| match t {
            TraceLine::Send(ClientMessage::NewGame { mode, seed }) => Some((seed.unwrap(), *mode)),
            _ => None,
        })
        .unwrap()
}

/// Independent reconstruction: rebuild the game from the seed, apply every
/// public bid and move in the client's views, and compare.
fn replay_trace(trace: &[TraceLine]) {
    let (seed, _) = seed_of(trace);
    let views: Vec<&ddz_core::session::View> = trace
        .iter()
        .filter_map(|t| match t {
            TraceLine::Recv(ServerMessage::State { view }) => Some(view),
            _ => None,
        })
        .collect();
    let last = *views.last().unwrap();
    let first = views[0];
    let human = Seat::new(first.seat).unwrap();
    let mut pick = GameRng::new(ddz_core::rng::derive_seed(seed, 0x5EA7));
    let opener = Seat::new(pick.index(3) as u8).unwrap();
    let mut g = if last.bids.is_empty() {
        GameState::new_assigned(seed, ddz_core::cards::Variant::Standard, opener)
    } else {
        assert_eq!(first.first_bidder as usize, opener.index());
        GameState::new_game(seed, opener)
    };
    let mut seen_view = 0;
    let check = |g: &GameState, views: &[&ddz_core::session::View], seen: &mut usize| {
        while *seen < views.len() && views[*seen].bids.len() == g.bids().len() && views[*seen].history.len() == g.history().len() {
            let v = views[*seen];
            assert_eq!(v.hand, g.hand(human).to_string());
            assert_eq!(v.counts, [0, 1, 2].map(|i| g.hands()[i].len()));
            assert_eq!(v.current as usize, g.current().index());
            *seen += 1;
        }
    };
    check(&g, &views, &mut seen_view);
    for b in &last.bids {
        assert_eq!(b.seat as usize, g.current().index());
        g.bid_in_place(Bid::from_value(b.value).unwrap()).unwrap();
        check(&g, &views, &mut seen_view);
    }
    assert_eq!(g.phase(), Phase::Play, "trace with a redeal");
    assert_eq!(last.landlord.map(usize::from), g.landlord().map(|l| l.index()));
    for p in &last.history {
        assert_eq!(p.seat as usize, g.current().index());
        let legal = g.legal_moves().unwrap();
        let m: Move = move_from_cards(&p.cards, &legal).unwrap();
        g.play_in_place(&m).unwrap();
        check(&g, &views, &mut seen_view);
    }
    assert_eq!(seen_view, views.len(), "some views never matched an engine position");
    assert_eq!(g.phase(), Phase::Terminal);
    match trace.last() {
        Some(TraceLine::Recv(ServerMessage::GameOver { settlement, won })) => {
            assert_eq!(settlement, &g.settle().unwrap());
            assert_eq!(*won, settlement.points[human.index()] > 0);
        }
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn golden_trace_matches_fixture() {
    let s = start(config(Arc::new(RulePolicy), None)).await;
    let mut c = Client::connect(s.addr).await.unwrap();
    let trace = scripted_game(&mut c, 2024, GameMode::Auction).await;
    s.stop().await;
    replay_trace(&trace);
    let text = trace_to_text(&trace);
    let path = golden_path();
    if std::env::var_os("DDZ_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let golden = std::fs::read_to_string(&path).expect("golden fixture present; set DDZ_UPDATE_GOLDEN=1 to create");
    let fixture: Vec<TraceLine> = golden.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    replay_trace(&fixture);
    assert_eq!(text, golden);
}

/// Panics as soon as it is asked to play on one particular deal.
struct Faulty {
    bad_seed: u64,
}

impl Policy for Faulty {
    fn name(&self) -> &str {
        "faulty"
    }
    fn choose_move(&self, state: &GameState, legal: &[Move], rng: &mut GameRng) -> Move {
        if state.deal().seed == self.bad_seed {
            panic!("injected fault");
        }
        RulePolicy.choose_move(state, legal, rng)
    }
    fn choose_bid(&self, state: &GameState, legal: &[Bid], rng: &mut GameRng) -> Bid {
        if state.deal().seed == self.bad_seed {
            panic!("injected fault");
        }
        RulePolicy.choose_bid(state, legal, rng)
    }
}

#[tokio::test]
async fn a_crashing_session_leaves_others_running() {
    let dir = tempfile::tempdir().unwrap();
    let s = start(config(Arc::new(Faulty { bad_seed: 666 }), Some(dir.path()))).await;
    let mut healthy = Client::connect(s.addr).await.unwrap();
    greet(&mut healthy).await;
    let mut doomed = Client::connect(s.addr).await.unwrap();
    greet(&mut doomed).await;
    doomed
        .send(&ClientMessage::NewGame {
            mode: GameMode::Assigned,
            seed: Some(666),
        })
        .await
        .unwrap();
    // The human holds seat 0; with an agent to act first, the worker panics and
    // the connection closes. Otherwise the first agent turn comes after our move.
    loop {
        match doomed.recv_within(LIMIT).await {
            Ok(Some(m)) => {
                if let Some(reply) = respond(&m) {
                    doomed.send(&reply).await.unwrap();
                }
            }
            Ok(None) | Err(_) => break,
        }
    }
    let trace = scripted_game(&mut healthy, 7, GameMode::Assigned).await;
    assert!(matches!(trace.last(), Some(TraceLine::Recv(ServerMessage::GameOver { .. }))));
    let mut late = Client::connect(s.addr).await.unwrap();
    let trace = scripted_game(&mut late, 8, GameMode::Auction).await;
    assert!(matches!(trace.last(), Some(TraceLine::Recv(ServerMessage::GameOver { .. }))));
    assert_eq!(health(s.addr).await.unwrap()["status"], "ready");
    s.stop().await;
}

#[tokio::test]
async fn websocket_clients_speak_the_same_protocol() {
    let s = start(config(Arc::new(RulePolicy), None)).await;
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/play", s.addr)).await.unwrap();
    let next = |m: Message| -> Option<ServerMessage> {
        match m {
            Message::Text(t) => Some(serde_json::from_str(&t).unwrap()),
            _ => None,
        }
    };
    ws.send(Message::text(
        ClientMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
        }
        .to_json(),
    ))
    .await
    .unwrap();
    let hello = next(ws.next().await.unwrap().unwrap()).unwrap();
    assert!(matches!(hello, ServerMessage::Hello { protocol_version: 1, .. }));
    ws.send(Message::text(
        ClientMessage::NewGame {
            mode: GameMode::Assigned,
            seed: Some(3),
        }
        .to_json(),
    ))
    .await
    .unwrap();
    loop {
        let Some(msg) = next(ws.next().await.unwrap().unwrap()) else { continue };
        if matches!(msg, ServerMessage::GameOver { .. }) {
            break;
        }
        if let Some(reply) = respond(&msg) {
            ws.send(Message::text(reply.to_json())).await.unwrap();
        }
    }
    ws.close(None).await.unwrap();
    s.stop().await;
}

#[tokio::test]
async fn silent_human_is_auto_played_to_the_end() {
    let mut cfg = config(Arc::new(RulePolicy), None);
    cfg.turn_timeout = Some(Duration::from_millis(20));
    let s = start(cfg).await;
    let mut c = Client::connect(s.addr).await.unwrap();
    greet(&mut c).await;
    c.send(&ClientMessage::NewGame {
        mode: GameMode::Auction,
        seed: Some(12),
    })
    .await
    .unwrap();
    let mut turns = 0;
    loop {
        match recv(&mut c).await {
            ServerMessage::YourTurn { timeout_ms, .. } => {
                assert_eq!(timeout_ms, Some(20));
                turns += 1;
            }
            ServerMessage::GameOver { .. } => break,
            _ => {}
        }
    }
    assert!(turns > 0);
    s.stop().await;
}

#[tokio::test]
async fn binding_a_busy_port_fails_cleanly() {
    let s = start(config(Arc::new(RulePolicy), None)).await;
    let mut cfg = config(Arc::new(RulePolicy), None);
    cfg.listen = s.addr;
    assert!(matches!(Server::bind(cfg).await, Err(ServiceError::Bind { .. })));
    s.stop().await;
}
