use std::fmt;

use ddz_core::bidding::BiddingError;
use ddz_core::dmc::{ConfigError, TrainError};
use ddz_core::evaluation::EvalError;
use ddz_core::game::ReplayError;
use ddz_core::networks::NetError;
use ddz_service::ServiceError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Data(String),
    Runtime(String),
    Check(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Data(_) => 5,
            CliError::Runtime(_) => 6,
            CliError::Check(_) => 7,
        }
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(self, path: &std::path::Path) -> CliError {
        let wrap = |m: String| format!("{}: {m}", path.display());
        match self {
            CliError::Config(m) => CliError::Config(wrap(m)),
            CliError::Io(m) => CliError::Io(wrap(m)),
            CliError::Data(m) => CliError::Data(wrap(m)),
            CliError::Runtime(m) => CliError::Runtime(wrap(m)),
            CliError::Check(m) => CliError::Check(wrap(m)),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Data(m) | CliError::Runtime(m) | CliError::Check(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(io) => CliError::Io(format!("config: {io}")),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Io(io) => CliError::Io(format!("checkpoint: {io}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BiddingError> for CliError {
    fn from(e: BiddingError) -> Self {
        match e {
            BiddingError::Io(io) => CliError::Io(io.to_string()),
            BiddingError::Net(n) => n.into(),
            BiddingError::Thresholds(_) => CliError::Config(e.to_string()),
            BiddingError::EmptyDataset { .. } | BiddingError::BadDataset(_) => CliError::Data(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ReplayError> for CliError {
    fn from(e: ReplayError) -> Self {
        match e {
            ReplayError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoDecks | EvalError::AuctionNeedsStandard => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => c.into(),
            TrainError::Net(n) => n.into(),
            TrainError::Io { .. } => CliError::Io(e.to_string()),
            TrainError::Metadata(_) => CliError::Data(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        CliError::Io(e.to_string())
    }
}
