//! Play server: human clients against an agent policy.
//!
//! One TCP port speaks three things, told apart by the first bytes:
//!
//! - `GET /health ...`: a plain HTTP probe answering `{"status":"ready",..}`.
//! - any other `GET`: a web-socket upgrade; each text frame is one message.
//! - anything else: frames of a 4-byte big-endian length followed by that many
//!   bytes of UTF-8 JSON, one message per frame.
//!
//! Messages are those of [`ddz_core::session::protocol`]. Every connection
//! gets its own [`Session`] on a blocking worker; a panic there ends that
//! connection only. Completed games are appended to `games.jsonl` in the
//! replay directory, one record per line.

pub mod client;
mod transport;

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use bytes::Bytes;
use futures::{future, Sink, SinkExt, Stream, StreamExt};
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinSet;
use tokio_tungstenite::tungstenite::Message;
use tokio_util::codec::{Framed, LengthDelimitedCodec};

use ddz_core::cards::Variant;
use ddz_core::evaluation::{vs_human_session, HumanGame, HumanOutcome, Policy};
use ddz_core::game::Seat;
use ddz_core::rng::derive_seed;
use ddz_core::session::{Session, DEFAULT_TURN_TIMEOUT, PROTOCOL_VERSION};

use transport::ChannelTransport;

/// Largest accepted frame body.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

pub const REPLAY_FILE: &str = "games.jsonl";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("replay directory {path}: {source}")]
    ReplayDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
pub struct ServeConfig {
    pub listen: SocketAddr,
    pub agent: Arc<dyn Policy>,
    /// Where `games.jsonl` is appended; `None` keeps nothing.
    pub replay_dir: Option<PathBuf>,
    pub turn_timeout: Option<Duration>,
    pub variant: Variant,
    pub human_seat: Seat,
    /// Session `n` derives its game seeds from `derive_seed(seed, n)`.
    pub seed: u64,
}

impl ServeConfig {
    pub fn new(listen: SocketAddr, agent: Arc<dyn Policy>) -> ServeConfig {
        ServeConfig {
            listen,
            agent,
            replay_dir: None,
            turn_timeout: Some(DEFAULT_TURN_TIMEOUT),
            variant: Variant::Standard,
            human_seat: Seat::new(0).expect("seat"),
            seed: 0,
        }
    }
}

struct ReplayLog {
    file: Mutex<File>,
}

impl ReplayLog {
    fn open(dir: &Path) -> Result<ReplayLog, ServiceError> {
        let err = |source| ServiceError::ReplayDir {
            path: dir.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(err)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(REPLAY_FILE))
            .map_err(err)?;
        Ok(ReplayLog { file: Mutex::new(file) })
    }

    fn append(&self, game: &HumanGame) {
        let Some(record) = &game.record else { return };
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(f, "{}", record.to_line()).and_then(|_| f.flush()) {
            log::error!("replay write failed: {e}");
        }
    }
}

struct Shared {
    config: ServeConfig,
    replays: Option<ReplayLog>,
    next_session: AtomicU64,
    active: AtomicUsize,
    games: AtomicU64,
}

pub struct Server {
    listener: TcpListener,
    shared: Arc<Shared>,
}

impl Server {
    pub async fn bind(config: ServeConfig) -> Result<Server, ServiceError> {
        let replays = config.replay_dir.as_deref().map(ReplayLog::open).transpose()?;
        let listener = TcpListener::bind(config.listen).await.map_err(|source| ServiceError::Bind {
            addr: config.listen,
            source,
        })?;
        Ok(Server {
            listener,
            shared: Arc::new(Shared {
                config,
                replays,
                next_session: AtomicU64::new(1),
                active: AtomicUsize::new(0),
                games: AtomicU64::new(0),
            }),
        })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Accepts connections until `shutdown` resolves, then drops them all.
    pub async fn run(self, shutdown: impl std::future::Future<Output = ()>) -> Result<(), ServiceError> {
        let mut conns = JoinSet::new();
        tokio::pin!(shutdown);
        log::info!(
            "serving {} on {} (protocol {PROTOCOL_VERSION})",
            self.shared.config.agent.name(),
            self.local_addr()?
        );
        loop {
            tokio::select! {
                _ = &mut shutdown => break,
                accepted = self.listener.accept() => match accepted {
                    Ok((stream, peer)) => {
                        let shared = self.shared.clone();
                        conns.spawn(async move {
                            if let Err(e) = connection(stream, shared).await {
                                log::warn!("{peer}: {e}");
                            }
                        });
                    }
                    Err(e) => log::warn!("accept failed: {e}"),
                },
                Some(_) = conns.join_next(), if !conns.is_empty() => {}
            }
        }
        conns.shutdown().await;
        Ok(())
    }
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServeConfig) -> Result<(), ServiceError> {
    let server = Server::bind(config).await?;
    server
        .run(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

enum Opening {
    Health,
    WebSocket,
    Framed,
}

async fn sniff(stream: &TcpStream) -> std::io::Result<Opening> {
    let mut buf = [0u8; 512];
    for _ in 0..200 {
        let n = stream.peek(&mut buf).await?;
        if n == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        let head = &buf[..n];
        if !b"GET ".starts_with(&head[..n.min(4)]) {
            return Ok(Opening::Framed);
        }
        if let Some(end) = head.iter().position(|&b| b == b'\n') {
            let line = String::from_utf8_lossy(&head[..end]);
            let path = line.split_whitespace().nth(1).unwrap_or("");
            return Ok(if path == "/health" { Opening::Health } else { Opening::WebSocket });
        }
        if n == buf.len() {
            return Ok(Opening::WebSocket);
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    Err(std::io::ErrorKind::TimedOut.into())
}

fn health_body(shared: &Shared) -> String {
    serde_json::json!({
        "status": "ready",
        "protocol_version": PROTOCOL_VERSION,
        "agent": shared.config.agent.name(),
        "sessions": shared.active.load(Ordering::SeqCst),
        "games": shared.games.load(Ordering::SeqCst),
    })
    .to_string()
}

async fn answer_health(mut stream: TcpStream, shared: &Shared) -> std::io::Result<()> {
    let mut req = Vec::new();
    let mut chunk = [0u8; 512];
    while !req.windows(4).any(|w| w == b"\r\n\r\n") && req.len() < 8192 {
        let n = stream.read(&mut chunk).await?;
        if n == 0 {
            break;
        }
        req.extend_from_slice(&chunk[..n]);
    }
    let body = health_body(shared);
    let resp = format!(
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(resp.as_bytes()).await?;
    stream.shutdown().await
}

async fn connection(stream: TcpStream, shared: Arc<Shared>) -> std::io::Result<()> {
    match sniff(&stream).await? {
        Opening::Health => answer_health(stream, &shared).await,
        Opening::WebSocket => {
            let ws = tokio_tungstenite::accept_async(stream)
                .await
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            let io = ws
                .filter_map(|m| {
                    future::ready(match m {
                        Ok(Message::Text(t)) => Some(Ok(t.to_string())),
                        Ok(Message::Binary(b)) => Some(Ok(String::from_utf8_lossy(&b).into_owned())),
                        Ok(Message::Close(_)) => Some(Err(std::io::ErrorKind::ConnectionAborted.into())),
                        Ok(_) => None,
                        Err(e) => Some(Err(std::io::Error::other(e))),
                    })
                })
                .with(|s: String| future::ready(Ok::<_, tokio_tungstenite::tungstenite::Error>(Message::text(s))));
            run_session(io, shared).await;
            Ok(())
        }
        Opening::Framed => {
            let codec = LengthDelimitedCodec::builder().max_frame_length(MAX_FRAME_BYTES).new_codec();
            let io = Framed::new(stream, codec)
                .map(|r| r.map(|b| String::from_utf8_lossy(&b).into_owned()))
                .with(|s: String| future::ready(Ok::<_, std::io::Error>(Bytes::from(s))));
            run_session(io, shared).await;
            Ok(())
        }
    }
}

/// Bridges one connection to a session running on a blocking worker.
async fn run_session<S, E>(io: S, shared: Arc<Shared>)
where
    S: Stream<Item = std::io::Result<String>> + Sink<String, Error = E> + Unpin,
    E: std::fmt::Display,
{
    let n = shared.next_session.fetch_add(1, Ordering::SeqCst);
    let id = format!("s{n}");
    let (tx_in, rx_in) = std::sync::mpsc::channel::<String>();
    let (tx_out, mut rx_out) = tokio::sync::mpsc::unbounded_channel::<String>();
    shared.active.fetch_add(1, Ordering::SeqCst);

    let worker_shared = shared.clone();
    let worker_id = id.clone();
    let worker = tokio::task::spawn_blocking(move || {
        let cfg = &worker_shared.config;
        let session = Session::new(worker_id, cfg.human_seat, &*cfg.agent, derive_seed(cfg.seed, n))
            .with_variant(cfg.variant)
            .with_turn_timeout(cfg.turn_timeout);
        let mut transport = ChannelTransport::new(rx_in, tx_out);
        vs_human_session(session, &mut transport, &mut |g| {
            if g.outcome != HumanOutcome::Voided {
                worker_shared.games.fetch_add(1, Ordering::SeqCst);
            }
            if let Some(r) = &worker_shared.replays {
                r.append(g);
            }
        })
    });

    let (mut sink, mut stream) = io.split();
    loop {
        tokio::select! {
            frame = stream.next() => match frame {
                Some(Ok(text)) => {
                    if tx_in.send(text).is_err() {
                        break;
                    }
                }
                Some(Err(e)) => {
                    log::debug!("session {id}: read ended: {e}");
                    break;
                }
                None => break,
            },
            out = rx_out.recv() => match out {
                Some(text) => {
                    if let Err(e) = sink.send(text).await {
                        log::debug!("session {id}: write failed: {e}");
                        break;
                    }
                }
                None => break,
            },
        }
    }
    drop(tx_in);
    match worker.await {
        Ok(tally) => log::info!("session {id} closed: {}", tally.summary(shared.config.agent.name())),
        Err(e) => log::error!("session {id} failed: {e}"),
    }
    let _ = sink.close().await;
    shared.active.fetch_sub(1, Ordering::SeqCst);
}
