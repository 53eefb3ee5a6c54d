use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{play_episode, EpisodeSettings, RoleNets, RoleQueues, TrainConfig, Transition};
use crate::bidding::BidStrategy;
use crate::encoding::{ActionFeatures, ACTION_FEATURES_WIDTH, STATE_FEATURES_WIDTH};
use crate::evaluation::{duplicate_match, DmcPolicy, MatchConfig, MatchMode, RandomPolicy};
use crate::game::Role;
use crate::networks::{Checkpoint, Mode, NamedTensor, NetError, OptimizerState, QNetwork, RmsProp};
use crate::rng::{derive_seed, GameRng};

pub const METRICS_HEADER: &str = "step,role,loss,wp_vs_random,games,evictions";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] super::ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("evaluation: {0}")]
    Eval(#[from] crate::evaluation::EvalError),
    #[error("bidding: {0}")]
    Bidding(#[from] crate::bidding::BiddingError),
    #[error("checkpoint metadata: {0}")]
    Metadata(String),
}

fn io_ctx(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> TrainError {
    let context = context.into();
    move |source| TrainError::Io { context, source }
}

/// Read-mostly handle to the actors' copy of the networks. Publication swaps
/// a whole `Arc`, so readers see either the old or the new networks.
pub struct SnapshotCell {
    inner: RwLock<Arc<RoleNets>>,
}

impl SnapshotCell {
    pub fn new(nets: RoleNets) -> SnapshotCell {
        SnapshotCell {
            inner: RwLock::new(Arc::new(nets)),
        }
    }

    pub fn load(&self) -> Arc<RoleNets> {
        self.inner.read().clone()
    }

    pub fn publish(&self, nets: RoleNets) {
        *self.inner.write() = Arc::new(nets);
    }
}

/// The single writable copy of the networks with its optimizer state.
pub struct Learner {
    pub nets: RoleNets,
    pub opt: [OptimizerState<f32>; 3],
    pub rms: RmsProp,
    pub step: u64,
}

impl Learner {
    pub fn new(nets: RoleNets, rms: RmsProp) -> Learner {
        let opt = [
            OptimizerState::new(nets.nets[0].seq()),
            OptimizerState::new(nets.nets[1].seq()),
            OptimizerState::new(nets.nets[2].seq()),
        ];
        Learner { nets, opt, rms, step: 0 }
    }

    /// One RMSprop step of `role`'s network toward the batch returns.
    pub fn fit(&mut self, role: Role, batch: &[Transition]) -> Result<f32, NetError> {
        let net = &mut self.nets.nets[role.index()];
        let x = batch_matrix(net, batch);
        let targets: Vec<f32> = batch.iter().map(|t| t.g).collect();
        let (loss, grads) = net.backward(x.view(), &targets, &mut Mode::Infer)?;
        self.rms.step(net.seq_mut(), &grads, &mut self.opt[role.index()])?;
        Ok(loss)
    }
}

fn batch_matrix(net: &QNetwork<f32>, batch: &[Transition]) -> Array2<f32> {
    let mut x = Array2::zeros((batch.len(), net.config().input));
    for (mut row, t) in x.rows_mut().into_iter().zip(batch) {
        let row = row.as_slice_mut().expect("row-major batch");
        row[..t.state.len()].copy_from_slice(&t.state);
        row[t.state.len()..].copy_from_slice(&t.action.0);
    }
    x
}

/// Blocks for one batch per role and applies one step to each network.
/// Returns `None` if the queues were closed first.
pub fn learner_step(queues: &RoleQueues, learner: &mut Learner, batch_size: usize) -> Option<Result<[f32; 3], NetError>> {
    let mut batches = Vec::with_capacity(3);
    for role in Role::ALL {
        batches.push(queues.role(role).pop_batch(batch_size)?);
    }
    let mut losses = [0.0f32; 3];
    for (role, batch) in Role::ALL.into_iter().zip(&batches) {
        match learner.fit(role, batch) {
            Ok(l) => losses[role.index()] = l,
            Err(e) => return Some(Err(e)),
        }
    }
    learner.step += 1;
    Some(Ok(losses))
}

/// Plays episodes against the latest snapshot until the queues close.
/// Returns the number of completed games.
pub fn run_actor(
    snapshot: &SnapshotCell,
    queues: &RoleQueues,
    settings: &EpisodeSettings,
    rng: &mut GameRng,
    mut on_episode: impl FnMut(&super::Episode),
) -> u64 {
    let mut games = 0;
    loop {
        let nets = snapshot.load();
        let episode = play_episode(&nets, settings, rng);
        on_episode(&episode);
        games += 1;
        for t in episode.transitions {
            if queues.push(t).is_err() {
                return games;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: u64,
    pub games: u64,
    pub checkpoints: Vec<PathBuf>,
    /// (landlord, peasants, overall) WP of the last evaluation.
    pub last_wp: Option<(f64, f64, f64)>,
    pub elapsed_secs: f64,
    pub metrics: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    games: u64,
    evictions: [u64; 3],
    config: TrainConfig,
}

struct Run {
    config: TrainConfig,
    settings: EpisodeSettings,
    learner: Learner,
    snapshot: RoleNets,
    queues: Arc<RoleQueues>,
    rng: GameRng,
    games: Arc<AtomicU64>,
    out_dir: PathBuf,
    metrics: BufWriter<File>,
    episodes: Arc<Option<Mutex<BufWriter<File>>>>,
    checkpoints: Vec<PathBuf>,
    last_wp: Option<(f64, f64, f64)>,
    deadline: Option<Instant>,
    timed_out: bool,
}

fn bid_strategy(config: &TrainConfig) -> Result<BidStrategy, TrainError> {
    Ok(BidStrategy::parse(&config.bidding)?)
}

fn open_append(path: &Path) -> Result<(File, bool), TrainError> {
    let existed = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    let f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_ctx(format!("opening {}", path.display())))?;
    Ok((f, existed))
}

impl Run {
    fn new(config: TrainConfig, out_dir: &Path, learner: Learner, snapshot: RoleNets, rng: GameRng) -> Result<Run, TrainError> {
        config.validate()?;
        fs::create_dir_all(out_dir).map_err(io_ctx(format!("creating {}", out_dir.display())))?;
        let metrics_path = out_dir.join("metrics.csv");
        let (f, existed) = open_append(&metrics_path)?;
        let mut metrics = BufWriter::new(f);
        if !existed {
            writeln!(metrics, "{METRICS_HEADER}").map_err(io_ctx("writing metrics"))?;
        }
        let episodes = if config.episode_log {
            let (f, _) = open_append(&out_dir.join("episodes.jsonl"))?;
            Some(Mutex::new(BufWriter::new(f)))
        } else {
            None
        };
        let settings = EpisodeSettings {
            variant: config.variant,
            epsilon: config.epsilon,
            reward: config.reward,
            bidding: Arc::new(bid_strategy(&config)?),
            record_q: config.verbose,
        };
        Ok(Run {
            queues: Arc::new(RoleQueues::new(config.buffer_capacity)),
            settings,
            learner,
            snapshot,
            rng,
            games: Arc::new(AtomicU64::new(0)),
            out_dir: out_dir.to_path_buf(),
            metrics,
            episodes: Arc::new(episodes),
            checkpoints: Vec::new(),
            last_wp: None,
            deadline: (config.max_secs > 0.0).then(|| Instant::now() + Duration::from_secs_f64(config.max_secs)),
            timed_out: false,
            config,
        })
    }

    fn log_episode(episodes: &Option<Mutex<BufWriter<File>>>, ep: &super::Episode) -> std::io::Result<()> {
        if let Some(w) = episodes {
            writeln!(w.lock(), "{}", ep.record.to_line())?;
        }
        Ok(())
    }

    fn checkpoint(&mut self) -> Result<(), TrainError> {
        let step = self.learner.step;
        let mut ckpt = Checkpoint::new(self.learner.nets.config().descriptor());
        ckpt.step = step;
        ckpt.rng_state = self.rng.state();
        self.learner.nets.put(&mut ckpt, "");
        for role in Role::ALL {
            let i = role.index();
            ckpt.put_optimizer(&format!("opt.{}.", role.name()), self.learner.nets.nets[i].seq(), &self.learner.opt[i]);
        }
        if self.snapshot != self.learner.nets {
            self.snapshot.put(&mut ckpt, "snapshot.");
        }
        let mut evictions = [0; 3];
        for role in Role::ALL {
            let q = self.queues.role(role);
            evictions[role.index()] = q.evictions();
            put_transitions(&mut ckpt, &format!("queue.{}.", role.name()), &q.snapshot());
        }
        ckpt.metadata = serde_json::to_string(&Metadata {
            games: self.games.load(Ordering::SeqCst),
            evictions,
            config: self.config.clone(),
        })
        .expect("metadata serializes");
        let path = self.out_dir.join(format!("ckpt_{step:08}.ddz"));
        ckpt.save(&path)?;
        self.checkpoints.push(path);
        Ok(())
    }

    fn after_step(&mut self, losses: [f32; 3]) -> Result<(), TrainError> {
        let step = self.learner.step;
        let cfg = &self.config;
        let wp = if cfg.eval_every > 0 && step % cfg.eval_every == 0 {
            let policy = DmcPolicy::new("dmc", Arc::new(self.learner.nets.clone()), BidStrategy::Heuristic);
            let result = duplicate_match(
                &policy,
                &RandomPolicy,
                &MatchConfig {
                    decks: cfg.eval_decks,
                    seed: derive_seed(cfg.seed, 0x5EED_0000 + step),
                    mode: MatchMode::Role,
                    variant: cfg.variant,
                    threads: if cfg.deterministic { 1 } else { cfg.actors },
                    keep_records: false,
                },
            )?;
            let wp = (result.wp_landlord(), result.wp_peasants(), result.wp());
            self.last_wp = Some(wp);
            Some(wp)
        } else {
            None
        };
        let games = self.games.load(Ordering::SeqCst);
        for role in Role::ALL {
            let wp_text = match (wp, role) {
                (Some((l, _, _)), Role::Landlord) => format!("{l:.4}"),
                (Some((_, p, _)), _) => format!("{p:.4}"),
                (None, _) => String::new(),
            };
            writeln!(
                self.metrics,
                "{step},{},{},{wp_text},{games},{}",
                role.name(),
                losses[role.index()],
                self.queues.role(role).evictions()
            )
            .map_err(io_ctx("writing metrics"))?;
        }
        if step % cfg.snapshot_every == 0 {
            self.snapshot = self.learner.nets.clone();
        }
        self.timed_out = self.deadline.is_some_and(|d| Instant::now() >= d);
        let milestone = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0;
        if milestone || step == cfg.total_steps || self.timed_out {
            self.metrics.flush().map_err(io_ctx("writing metrics"))?;
            self.checkpoint()?;
        }
        Ok(())
    }

    fn run_deterministic(&mut self) -> Result<(), TrainError> {
        let batch = self.config.batch_size;
        while self.learner.step < self.config.total_steps && !self.timed_out {
            while !self.queues.all_hold(batch) {
                let ep = play_episode(&self.snapshot, &self.settings, &mut self.rng);
                self.games.fetch_add(1, Ordering::SeqCst);
                Run::log_episode(&self.episodes, &ep).map_err(io_ctx("writing episode log"))?;
                for t in ep.transitions {
                    self.queues.push(t).expect("queues stay open while training");
                }
            }
            let losses = learner_step(&self.queues, &mut self.learner, batch).expect("queues hold a batch")?;
            self.after_step(losses)?;
        }
        Ok(())
    }

    fn run_parallel(&mut self) -> Result<(), TrainError> {
        let cell = SnapshotCell::new(self.snapshot.clone());
        let batch = self.config.batch_size;
        let base = self.rng.next_u64();
        let mut outcome = Ok(());
        std::thread::scope(|s| {
            let mut handles = Vec::new();
            for id in 0..self.config.actors {
                let cell = &cell;
                let queues = self.queues.clone();
                let settings = self.settings.clone();
                let games = self.games.clone();
                let episodes = self.episodes.clone();
                handles.push(s.spawn(move || {
                    let mut rng = GameRng::new(derive_seed(base, id as u64));
                    run_actor(cell, &queues, &settings, &mut rng, |ep| {
                        games.fetch_add(1, Ordering::SeqCst);
                        let _ = Run::log_episode(&episodes, ep);
                    })
                }));
            }
            while self.learner.step < self.config.total_steps && !self.timed_out {
                let losses = match learner_step(&self.queues, &mut self.learner, batch) {
                    Some(Ok(l)) => l,
                    Some(Err(e)) => {
                        outcome = Err(e.into());
                        break;
                    }
                    None => break,
                };
                if let Err(e) = self.after_step(losses) {
                    outcome = Err(e);
                    break;
                }
                if self.learner.step % self.config.snapshot_every == 0 {
                    cell.publish(self.learner.nets.clone());
                }
            }
            self.queues.close();
            for h in handles {
                h.join().expect("actor thread");
            }
        });
        outcome
    }

    fn finish(mut self, started: Instant) -> Result<TrainSummary, TrainError> {
        self.metrics.flush().map_err(io_ctx("writing metrics"))?;
        if let Some(w) = self.episodes.as_ref() {
            w.lock().flush().map_err(io_ctx("writing episode log"))?;
        }
        Ok(TrainSummary {
            steps: self.learner.step,
            games: self.games.load(Ordering::SeqCst),
            checkpoints: self.checkpoints,
            last_wp: self.last_wp,
            elapsed_secs: started.elapsed().as_secs_f64(),
            metrics: self.out_dir.join("metrics.csv"),
        })
    }

    fn drive(mut self, started: Instant) -> Result<TrainSummary, TrainError> {
        if self.config.deterministic && self.config.actors == 1 {
            self.run_deterministic()?;
        } else {
            self.run_parallel()?;
        }
        self.finish(started)
    }
}

fn put_transitions(ckpt: &mut Checkpoint, prefix: &str, items: &[Transition]) {
    let n = items.len();
    ckpt.tensors.push(NamedTensor {
        name: format!("{prefix}state"),
        shape: vec![n, STATE_FEATURES_WIDTH],
        data: items.iter().flat_map(|t| t.state.iter().copied()).collect(),
    });
    ckpt.tensors.push(NamedTensor {
        name: format!("{prefix}action"),
        shape: vec![n, ACTION_FEATURES_WIDTH],
        data: items.iter().flat_map(|t| t.action.0).collect(),
    });
    ckpt.tensors.push(NamedTensor {
        name: format!("{prefix}g"),
        shape: vec![n],
        data: items.iter().map(|t| t.g).collect(),
    });
}

fn get_transitions(ckpt: &Checkpoint, prefix: &str, role: Role) -> Result<Vec<Transition>, TrainError> {
    let get = |suffix: &str| {
        ckpt.tensor(&format!("{prefix}{suffix}"))
            .ok_or_else(|| TrainError::Metadata(format!("missing tensor {prefix}{suffix}")))
    };
    let (s, a, g) = (get("state")?, get("action")?, get("g")?);
    let n = g.data.len();
    if s.data.len() != n * STATE_FEATURES_WIDTH || a.data.len() != n * ACTION_FEATURES_WIDTH {
        return Err(TrainError::Metadata(format!("queue tensors under {prefix} disagree")));
    }
    Ok((0..n)
        .map(|i| Transition {
            role,
            state: s.data[i * STATE_FEATURES_WIDTH..(i + 1) * STATE_FEATURES_WIDTH].to_vec(),
            action: ActionFeatures(
                a.data[i * ACTION_FEATURES_WIDTH..(i + 1) * ACTION_FEATURES_WIDTH]
                    .try_into()
                    .expect("action width"),
            ),
            g: g.data[i],
        })
        .collect())
}

/// Trains from freshly initialized networks, writing `metrics.csv`,
/// checkpoints and optionally `episodes.jsonl` under `out_dir`.
pub fn train(config: &TrainConfig, out_dir: &Path) -> Result<TrainSummary, TrainError> {
    let started = Instant::now();
    config.validate()?;
    let mut init = GameRng::new(derive_seed(config.seed, 1));
    let nets = RoleNets::new(config.net(), &mut init);
    let learner = Learner::new(nets.clone(), config.optimizer());
    let rng = GameRng::new(derive_seed(config.seed, 2));
    let mut run = Run::new(config.clone(), out_dir, learner, nets, rng)?;
    run.checkpoint()?;
    run.drive(started)
}

/// Continues a run from one of its checkpoints up to `config.total_steps`.
/// In deterministic mode the metrics rows after the checkpoint step equal
/// those of an uninterrupted run.
pub fn resume(config: &TrainConfig, checkpoint: &Path, out_dir: &Path) -> Result<TrainSummary, TrainError> {
    let started = Instant::now();
    config.validate()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let expected = config.net().descriptor();
    if ckpt.descriptor != expected {
        return Err(NetError::ArchMismatch {
            expected,
            found: ckpt.descriptor.clone(),
        }
        .into());
    }
    let meta: Metadata = serde_json::from_str(&ckpt.metadata).map_err(|e| TrainError::Metadata(e.to_string()))?;
    let nets = RoleNets::get(&ckpt, "")?;
    let snapshot = if ckpt.tensor("snapshot.landlord.mlp0.w").is_some() {
        RoleNets::get(&ckpt, "snapshot.")?
    } else {
        nets.clone()
    };
    let mut learner = Learner::new(nets, config.optimizer());
    for role in Role::ALL {
        let i = role.index();
        learner.opt[i] = ckpt.get_optimizer(&format!("opt.{}.", role.name()), learner.nets.nets[i].seq(), ckpt.step)?;
    }
    learner.step = ckpt.step;
    let run = Run::new(config.clone(), out_dir, learner, snapshot, GameRng::from_state(ckpt.rng_state))?;
    run.games.store(meta.games, Ordering::SeqCst);
    for role in Role::ALL {
        let items = get_transitions(&ckpt, &format!("queue.{}.", role.name()), role)?;
        run.queues.role(role).restore(items, meta.evictions[role.index()]);
    }
    run.drive(started)
}
