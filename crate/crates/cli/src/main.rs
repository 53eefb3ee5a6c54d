//! `ddz`: every workflow of the lab behind one binary.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration, 4 file or network I/O,
//! 5 malformed input data (checkpoints, datasets, replays), 6 runtime failure
//! during training or evaluation, 7 a verification found mismatches.

mod commands;
mod error;
mod policy;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ddz_core::cards::Variant;

#[derive(Parser, Debug)]
#[command(name = "ddz", version, about = "DouDizhu reinforcement-learning lab")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train per-role Q-networks with Deep Monte Carlo.
    Train(TrainArgs),
    /// Duplicate-deck match between two policies.
    Eval(EvalArgs),
    /// Generate a rollout-labelled bidding dataset.
    BidData(BidDataArgs),
    /// Fit the bidding network to a dataset.
    BidTrain(BidTrainArgs),
    /// Inspect a bidding checkpoint: threshold sweep, dataset error, auction match.
    BidEval(BidEvalArgs),
    /// Host live games for human clients.
    Serve(ServeArgs),
    /// Print the feature encoding of a sampled position.
    EncodeInspect(EncodeArgs),
    /// Time legal-move generation and cross-check it against brute force.
    MovegenBench(BenchArgs),
    /// Replay game records and report the first bad line.
    ReplayVerify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum VariantArg {
    Standard,
    Reduced,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Standard => Variant::Standard,
            VariantArg::Reduced => Variant::Reduced,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Config file, JSON or `key = value` lines; applied over the defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the reduced-deck smoke preset instead of the defaults.
    #[arg(long)]
    pub smoke: bool,
    /// Override one config key; repeatable. Applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learner steps to run up to.
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub actors: Option<usize>,
    /// Output directory for checkpoints and metrics.
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
    /// Continue from a checkpoint written by an earlier run with the same config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// `random`, `rule`, a checkpoint file, or a run directory (one row per checkpoint).
    #[arg(long)]
    pub a: String,
    /// `random`, `rule`, or a checkpoint file.
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value_t = 100)]
    pub decks: usize,
    #[arg(long, default_value = "role")]
    pub mode: ddz_core::evaluation::MatchMode,
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Bidding for checkpoint policies: `scripted`, `heuristic`, `random` or a bid checkpoint.
    #[arg(long, default_value = "heuristic")]
    pub bidding: String,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write every game as a replay record (single-checkpoint runs only).
    #[arg(long)]
    pub records: Option<PathBuf>,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct BidDataArgs {
    /// Play policy for rollouts: `random`, `rule` or a checkpoint.
    #[arg(long, default_value = "rule")]
    pub policy: String,
    #[arg(long, default_value_t = 1000)]
    pub deals: usize,
    #[arg(long, default_value_t = 8)]
    pub rollouts: usize,
    /// Chance of a uniform random move at each rollout decision.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct BidTrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file with training settings; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct BidEvalArgs {
    /// Bidding checkpoint from `bid-train`.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Comma-separated t1,t2,t3.
    #[arg(long, default_value = "0,0.3,0.6")]
    pub thresholds: String,
    /// Dataset to report the regression error on.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Play policy used on both sides of the auction match.
    #[arg(long, default_value = "rule")]
    pub play: String,
    /// Auction-mode decks, network bidding against the heuristic; 0 skips.
    #[arg(long, default_value_t = 100)]
    pub decks: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub listen: std::net::SocketAddr,
    /// Run directory; the latest checkpoint in it plays.
    #[arg(long)]
    pub ckpt_dir: Option<PathBuf>,
    /// `random`, `rule` or a checkpoint file, instead of `--ckpt-dir`.
    #[arg(long)]
    pub agent: Option<String>,
    #[arg(long, default_value = "heuristic")]
    pub bidding: String,
    /// Completed games are appended to `games.jsonl` here.
    #[arg(long)]
    pub replay_dir: Option<PathBuf>,
    /// Human turn limit in seconds; 0 disables.
    #[arg(long, default_value_t = 60.0)]
    pub turn_timeout: f64,
    /// Seat held by the human, 0 to 2.
    #[arg(long, default_value_t = 0)]
    pub human_seat: u8,
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random plies to play before encoding.
    #[arg(long, default_value_t = 0)]
    pub plies: usize,
    #[arg(long, value_enum, default_value = "standard")]
    pub variant: VariantArg,
    /// Emit the raw vectors as JSON instead of grids.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 10_000)]
    pub states: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cross-check every k-th state against brute-force enumeration; 0 skips.
    #[arg(long, default_value_t = 50)]
    pub oracle_every: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
