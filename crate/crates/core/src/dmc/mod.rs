//! Deep Monte Carlo self-play: epsilon-greedy actors over per-role Q-networks
//! and a learner regressing Q(s, a) toward undiscounted terminal returns.

mod config;
mod queue;
mod train;

use std::sync::Arc;

use crate::bidding::BidStrategy;
use crate::cards::{Move, Variant};
use crate::encoding::{encode_action, encode_state_into, ActionFeatures, STATE_FEATURES_WIDTH};
use crate::game::ReplayRecord;
use crate::game::{GameError, GameState, Phase, Role, Seat, Settlement};
use crate::networks::{Checkpoint, Mode, NetError, QNetConfig, QNetwork};
use crate::rng::GameRng;

pub use config::{ConfigError, RewardMode, TrainConfig};
pub use queue::{QueueClosed, ReplayQueue, RoleQueues};
pub use train::{learner_step, resume, run_actor, train, Learner, SnapshotCell, TrainError, TrainSummary, METRICS_HEADER};

/// One Q-network per role, indexed by [`Role::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoleNets {
    pub nets: [QNetwork<f32>; 3],
}

impl RoleNets {
    pub fn new(config: QNetConfig, rng: &mut GameRng) -> RoleNets {
        RoleNets {
            nets: [
                QNetwork::new(config, rng),
                QNetwork::new(config, rng),
                QNetwork::new(config, rng),
            ],
        }
    }

    pub fn zeros(config: QNetConfig) -> RoleNets {
        RoleNets {
            nets: [QNetwork::zeros(config), QNetwork::zeros(config), QNetwork::zeros(config)],
        }
    }

    pub fn config(&self) -> &QNetConfig {
        self.nets[0].config()
    }

    pub fn role(&self, role: Role) -> &QNetwork<f32> {
        &self.nets[role.index()]
    }

    pub fn put(&self, ckpt: &mut Checkpoint, prefix: &str) {
        for role in Role::ALL {
            ckpt.put_seq(&format!("{prefix}{}.", role.name()), self.role(role).seq());
        }
    }

    pub fn get(ckpt: &Checkpoint, prefix: &str) -> Result<RoleNets, NetError> {
        let config = QNetConfig::from_descriptor(&ckpt.descriptor)?;
        let mut nets = RoleNets::zeros(config);
        for role in Role::ALL {
            ckpt.get_seq(&format!("{prefix}{}.", role.name()), nets.nets[role.index()].seq_mut())?;
        }
        Ok(nets)
    }

    /// Reads the three play networks from a training checkpoint file.
    pub fn load(path: &std::path::Path) -> Result<RoleNets, NetError> {
        RoleNets::get(&Checkpoint::load(path)?, "")
    }
}

/// One decision of one seat, labelled with the episode's terminal return.
#[derive(Clone, PartialEq, Debug)]
pub struct Transition {
    pub role: Role,
    pub state: Vec<f32>,
    pub action: ActionFeatures,
    pub g: f32,
}

impl Transition {
    pub fn is_consistent(&self) -> bool {
        self.state.len() == STATE_FEATURES_WIDTH && self.g.is_finite() && self.state.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Decision {
    pub mv: Move,
    /// Q of the chosen move under the acting network.
    pub q: f32,
    pub explored: bool,
}

fn current_role(state: &GameState) -> Result<Role, GameError> {
    if state.phase() != Phase::Play {
        return Err(GameError::WrongPhase(state.phase()));
    }
    Ok(state.role_of(state.current()).expect("play phase has roles"))
}

/// Epsilon-greedy choice for the seat to move. One Bernoulli draw decides
/// exploration; a greedy choice takes the first maximum in legal-move order.
pub fn act_detailed(
    nets: &RoleNets,
    state: &GameState,
    epsilon: f64,
    rng: &mut GameRng,
    features: &mut Vec<f32>,
) -> Result<(Decision, Vec<Move>), GameError> {
    let role = current_role(state)?;
    let moves = state.legal_moves()?;
    features.resize(STATE_FEATURES_WIDTH, 0.0);
    encode_state_into(state, state.current(), features).expect("play phase encodes");
    let actions: Vec<ActionFeatures> = moves.iter().map(encode_action).collect();
    let q = nets
        .role(role)
        .q_values(features, &actions, &mut Mode::Infer)
        .expect("network input matches feature widths");
    let explored = rng.bernoulli(epsilon);
    let pick = if explored {
        rng.index(moves.len())
    } else {
        let mut best = 0;
        for (i, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = i;
            }
        }
        best
    };
    Ok((
        Decision {
            mv: moves[pick],
            q: q[pick],
            explored,
        },
        moves,
    ))
}

pub fn act(nets: &RoleNets, state: &GameState, epsilon: f64, rng: &mut GameRng) -> Result<Move, GameError> {
    Ok(act_detailed(nets, state, epsilon, rng, &mut Vec::new())?.0.mv)
}

/// Terminal return of `role` for a settled game.
pub fn role_return(settlement: &Settlement, state: &GameState, role: Role, mode: RewardMode) -> f32 {
    let won = role.side() == settlement.winner_side;
    let sign = if won { 1.0 } else { -1.0 };
    match mode {
        RewardMode::Wp => sign,
        RewardMode::Score => sign * state.stake_unit() as f32,
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeSettings {
    pub variant: Variant,
    pub epsilon: f64,
    pub reward: RewardMode,
    pub bidding: Arc<BidStrategy>,
    pub record_q: bool,
}

#[derive(Clone, Debug)]
pub struct Episode {
    pub record: ReplayRecord,
    pub transitions: Vec<Transition>,
}

/// Redeals allowed before an all-pass auction falls back to the first bidder at 1.
pub const MAX_REDEALS: u32 = 8;

/// Deals and bids a fresh game; the seed comes from `rng`. Reduced games
/// (no auction) get a uniformly drawn landlord seat.
pub fn start_game(variant: Variant, bidding: &BidStrategy, rng: &mut GameRng) -> GameState {
    let seed = rng.next_u64();
    let first = Seat::new(rng.index(3) as u8).expect("seat index");
    if !variant.has_auction() {
        return GameState::new_assigned(seed, variant, first);
    }
    let mut seed = seed;
    let mut first = first;
    for _ in 0..MAX_REDEALS {
        let mut state = GameState::new_game(seed, first);
        while state.phase() == Phase::Bidding {
            let legal = state.legal_bids().expect("bidding phase");
            let bid = bidding.decide(&state, &legal, rng);
            state.bid_in_place(bid).expect("strategies return legal bids");
        }
        if state.phase() == Phase::Play {
            return state;
        }
        seed = seed.wrapping_add(1);
        first = first.next();
    }
    let mut state = GameState::new_game(seed, first);
    state.bid_in_place(crate::game::Bid::One).expect("opening bid");
    while state.phase() == Phase::Bidding {
        state.bid_in_place(crate::game::Bid::Pass).expect("pass");
    }
    state
}

/// Plays one self-play game, returning its record and one transition per decision.
pub fn play_episode(nets: &RoleNets, settings: &EpisodeSettings, rng: &mut GameRng) -> Episode {
    let mut state = start_game(settings.variant, &settings.bidding, rng);
    let mut pending: Vec<(Role, Vec<f32>, ActionFeatures)> = Vec::new();
    let mut qs = Vec::new();
    let mut features = Vec::with_capacity(STATE_FEATURES_WIDTH);
    while state.phase() == Phase::Play {
        let role = current_role(&state).expect("play phase");
        let (d, _) = act_detailed(nets, &state, settings.epsilon, rng, &mut features).expect("play phase");
        pending.push((role, features.clone(), encode_action(&d.mv)));
        qs.push(d.q);
        state.play_in_place(&d.mv).expect("acting returns legal moves");
    }
    let settlement = state.settle().expect("terminal");
    let transitions = pending
        .into_iter()
        .map(|(role, s, a)| Transition {
            role,
            state: s,
            action: a,
            g: role_return(&settlement, &state, role, settings.reward),
        })
        .collect();
    let mut record = ReplayRecord::from_state(&state).expect("terminal");
    if settings.record_q {
        record.q = Some(qs);
    }
    Episode { record, transitions }
}
