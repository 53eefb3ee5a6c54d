use std::time::Duration;

use thiserror::Error;

use crate::game::ReplayRecord;
use crate::game::Seat;
use crate::session::{parse_client, GameLog, Session};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("client disconnected")]
pub struct Disconnected;

/// Frame-level link to one human client.
pub trait HumanTransport {
    fn send(&mut self, frame: &str) -> Result<(), Disconnected>;
    /// Next frame, or `Ok(None)` when `deadline` passes first.
    fn recv(&mut self, deadline: Option<Duration>) -> Result<Option<String>, Disconnected>;
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HumanOutcome {
    Won,
    Lost,
    /// Disconnected mid-game; excluded from WP.
    Voided,
}

#[derive(Clone, PartialEq, Debug)]
pub struct HumanGame {
    pub seed: u64,
    pub human: Seat,
    pub outcome: HumanOutcome,
    pub record: Option<ReplayRecord>,
    pub plies: usize,
}

impl From<GameLog> for HumanGame {
    fn from(log: GameLog) -> HumanGame {
        let outcome = match log.settlement {
            None => HumanOutcome::Voided,
            Some(s) if s.points[log.human.index()] > 0 => HumanOutcome::Won,
            Some(_) => HumanOutcome::Lost,
        };
        HumanGame {
            seed: log.seed,
            human: log.human,
            outcome,
            record: log.record,
            plies: log.plies,
        }
    }
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct HumanTally {
    pub games: Vec<HumanGame>,
}

impl HumanTally {
    fn count(&self, o: HumanOutcome) -> usize {
        self.games.iter().filter(|g| g.outcome == o).count()
    }

    pub fn won(&self) -> usize {
        self.count(HumanOutcome::Won)
    }

    pub fn lost(&self) -> usize {
        self.count(HumanOutcome::Lost)
    }

    pub fn voided(&self) -> usize {
        self.count(HumanOutcome::Voided)
    }

    /// Human wins over completed games.
    pub fn human_wp(&self) -> Option<f64> {
        let n = self.won() + self.lost();
        (n > 0).then(|| self.won() as f64 / n as f64)
    }

    pub fn agent_wp(&self) -> Option<f64> {
        self.human_wp().map(|w| 1.0 - w)
    }

    pub fn summary(&self, agent: &str) -> String {
        let fmt = |w: Option<f64>| w.map_or("n/a".to_string(), |w| format!("{w:.4}"));
        format!(
            "human {} won / {} lost / {} voided; WP human {} {agent} {}",
            self.won(),
            self.lost(),
            self.voided(),
            fmt(self.human_wp()),
            fmt(self.agent_wp())
        )
    }
}

fn flush(session: &mut Session<'_>, transport: &mut dyn HumanTransport) -> Result<(), Disconnected> {
    for msg in session.drain() {
        transport.send(&msg.to_json())?;
    }
    Ok(())
}

/// Drives one client connection until it disconnects. Each finished or
/// voided game is passed to `on_game` as it happens and kept in the tally.
pub fn vs_human_session(
    mut session: Session<'_>,
    transport: &mut dyn HumanTransport,
    on_game: &mut dyn FnMut(&HumanGame),
) -> HumanTally {
    let mut tally = HumanTally::default();
    let mut record = |session: &mut Session<'_>, tally: &mut HumanTally| {
        for log in session.take_finished() {
            let g = HumanGame::from(log);
            on_game(&g);
            tally.games.push(g);
        }
    };
    loop {
        if flush(&mut session, transport).is_err() {
            session.void("disconnected");
            record(&mut session, &mut tally);
            break;
        }
        record(&mut session, &mut tally);
        let deadline = if session.human_to_act() { session.turn_timeout() } else { None };
        match transport.recv(deadline) {
            Ok(Some(frame)) => match parse_client(&frame) {
                Ok(msg) => session.handle(msg),
                Err(e) => session.reject(e),
            },
            Ok(None) => session.timeout(),
            Err(Disconnected) => {
                session.void("disconnected");
                record(&mut session, &mut tally);
                break;
            }
        }
    }
    tally
}
