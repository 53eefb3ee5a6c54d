use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde_json::json;

use ddz_core::bidding::{
    generate_bid_dataset, read_dataset, threshold_sweep, train_bid_network, write_dataset, BidPolicy, BidStrategy,
    BidTrainConfig, DatasetConfig,
};
use ddz_core::cards::reference::legal_moves_brute_force;
use ddz_core::cards::{legal_moves, Variant};
use ddz_core::dmc::{resume, start_game, train, TrainConfig};
use ddz_core::encoding::{encode_action, encode_bid_context, encode_state, state_grid};
use ddz_core::evaluation::{duplicate_match, wp_csv, wp_table, MatchConfig, MatchMode, Policy, WithBidding, WpRow};
use ddz_core::game::{read_replays, write_replays, GameState, Phase, Seat};
use ddz_core::networks::{features_matrix, Mode};
use ddz_core::rng::GameRng;
use ddz_service::{ServeConfig, Server};

use crate::error::CliError;
use crate::policy::{checkpoint_policy, checkpoints_in, latest_checkpoint, load_policy};
use crate::{
    BenchArgs, BidDataArgs, BidEvalArgs, BidTrainArgs, Command, EncodeArgs, EvalArgs, ServeArgs, TrainArgs, VerifyArgs,
};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::BidData(a) => cmd_bid_data(a),
        Command::BidTrain(a) => cmd_bid_train(a),
        Command::BidEval(a) => cmd_bid_eval(a),
        Command::Serve(a) => cmd_serve(a),
        Command::EncodeInspect(a) => cmd_encode(a),
        Command::MovegenBench(a) => cmd_bench(a),
        Command::ReplayVerify(a) => cmd_verify(a),
    }
}

/// Logs the resolved settings, or prints them and reports that the caller should stop.
fn show_config(value: &serde_json::Value, print_only: bool) -> bool {
    if print_only {
        println!("{}", serde_json::to_string_pretty(value).expect("json"));
        return true;
    }
    log::info!("config {value}");
    false
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = if a.smoke { TrainConfig::smoke() } else { TrainConfig::default() };
    if let Some(path) = &a.config {
        cfg = cfg.with_file(path)?;
    }
    let mut pairs: Vec<(String, String)> = Vec::new();
    for kv in &a.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let flags = [
        ("seed", a.seed.map(|v| v.to_string())),
        ("total_steps", a.steps.map(|v| v.to_string())),
        ("arch", a.arch.clone()),
        ("actors", a.actors.map(|v| v.to_string())),
    ];
    pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
    let cfg = cfg.with_overrides(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
    Ok(cfg)
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let cfg = train_config(&a)?;
    let value: serde_json::Value = serde_json::from_str(&cfg.to_json()).expect("json");
    if show_config(&value, a.print_config) {
        return Ok(());
    }
    let summary = match &a.resume {
        Some(ckpt) => resume(&cfg, ckpt, &a.out)?,
        None => train(&cfg, &a.out)?,
    };
    println!(
        "trained {} steps over {} games in {:.1}s; {} checkpoints in {}",
        summary.steps,
        summary.games,
        summary.elapsed_secs,
        summary.checkpoints.len(),
        a.out.display()
    );
    if let Some((l, p, all)) = summary.last_wp {
        println!("WP vs random: landlord {l:.4} peasants {p:.4} overall {all:.4}");
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let config = MatchConfig {
        decks: a.decks,
        seed: a.seed,
        mode: a.mode,
        variant: a.variant.into(),
        threads: a.threads,
        keep_records: a.records.is_some(),
    };
    let value = json!({
        "a": a.a, "b": a.b, "decks": a.decks, "mode": a.mode.to_string(),
        "variant": config.variant, "seed": a.seed, "threads": a.threads, "bidding": a.bidding,
    });
    if show_config(&value, a.print_config) {
        return Ok(());
    }
    let b = load_policy(&a.b, &a.bidding)?;
    let dir = Path::new(&a.a);
    let entries: Vec<(String, Arc<dyn Policy>)> = if dir.is_dir() {
        let found = checkpoints_in(dir)?;
        if found.is_empty() {
            return Err(CliError::Data(format!("no ckpt_*.ddz checkpoints in {}", dir.display())));
        }
        if a.records.is_some() && found.len() > 1 {
            return Err(CliError::Config("--records needs a single checkpoint, not a run directory".into()));
        }
        found
            .iter()
            .map(|(step, p)| Ok((step.to_string(), checkpoint_policy(p, &a.bidding)?)))
            .collect::<Result<_, CliError>>()?
    } else {
        let p = load_policy(&a.a, &a.bidding)?;
        vec![(p.name().to_string(), p)]
    };
    let a_name = if dir.is_dir() { "A".to_string() } else { entries[0].1.name().to_string() };
    let mut rows = Vec::new();
    for (step, policy) in &entries {
        let r = duplicate_match(policy.as_ref(), b.as_ref(), &config)?;
        let (ll, lh) = r.wp_landlord_ci();
        let (pl, ph) = r.wp_peasants_ci();
        eprintln!("{step}: {}", r.summary());
        eprintln!("{step}: landlord 95% CI [{ll:.4}, {lh:.4}]  peasants 95% CI [{pl:.4}, {ph:.4}]");
        if let Some(path) = &a.records {
            write_replays(std::io::BufWriter::new(std::fs::File::create(path)?), &r.records)?;
        }
        rows.push(WpRow {
            step: step.clone(),
            wp_landlord: r.wp_landlord(),
            wp_peasants: r.wp_peasants(),
        });
    }
    print!("{}", wp_table(&a_name, b.name(), &rows));
    if let Some(path) = &a.csv {
        std::fs::write(path, wp_csv(&rows))?;
    }
    Ok(())
}

fn cmd_bid_data(a: BidDataArgs) -> Result<(), CliError> {
    let config = DatasetConfig {
        n_deals: a.deals,
        rollouts_per_deal: a.rollouts,
        seed: a.seed,
        rollout_epsilon: a.epsilon,
        threads: a.threads,
    };
    let value = json!({
        "policy": a.policy, "deals": a.deals, "rollouts": a.rollouts, "epsilon": a.epsilon,
        "seed": a.seed, "threads": a.threads, "out": a.out,
    });
    if show_config(&value, a.print_config) {
        return Ok(());
    }
    if !(0.0..=1.0).contains(&a.epsilon) || a.rollouts == 0 {
        return Err(CliError::Config("need 0 <= epsilon <= 1 and at least one rollout".into()));
    }
    let policy = load_policy(&a.policy, "scripted")?;
    let samples = generate_bid_dataset(policy.as_ref(), &config);
    write_dataset(&a.out, &samples)?;
    let mut by_prior = [0usize; 3];
    for s in &samples {
        by_prior[s.context.prior.len()] += 1;
    }
    let mean = samples.iter().map(|s| s.label as f64).sum::<f64>() / samples.len().max(1) as f64;
    println!(
        "wrote {} samples to {} (prior bids 0/1/2: {}/{}/{}; mean label {mean:.4})",
        samples.len(),
        a.out.display(),
        by_prior[0],
        by_prior[1],
        by_prior[2]
    );
    Ok(())
}

fn bid_train_config(a: &BidTrainArgs) -> Result<BidTrainConfig, CliError> {
    let mut value = serde_json::to_value(BidTrainConfig::default()).expect("json");
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path)?;
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(file)) => value.as_object_mut().expect("object").extend(file),
            Ok(_) => return Err(CliError::Config(format!("{}: expected a JSON object", path.display()))),
            Err(e) => return Err(CliError::Config(format!("{}: {e}", path.display()))),
        }
    }
    let map = value.as_object_mut().expect("object");
    if let Some(v) = a.epochs {
        map.insert("epochs".into(), json!(v));
    }
    if let Some(v) = a.batch_size {
        map.insert("batch_size".into(), json!(v));
    }
    if let Some(v) = a.lr {
        map.insert("lr".into(), json!(v));
    }
    if let Some(v) = a.val_fraction {
        map.insert("val_fraction".into(), json!(v));
    }
    if let Some(v) = a.seed {
        map.insert("seed".into(), json!(v));
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
}

fn cmd_bid_train(a: BidTrainArgs) -> Result<(), CliError> {
    let config = bid_train_config(&a)?;
    if show_config(&serde_json::to_value(&config).expect("json"), a.print_config) {
        return Ok(());
    }
    let data = read_dataset(&a.data)?;
    let (net, report) = train_bid_network(&data, &config)?;
    net.save(&a.out)?;
    println!(
        "trained on {} samples ({} held out): train loss {:.5}, validation loss {}",
        report.train_samples,
        report.val_samples,
        report.train_loss,
        report.val_loss.map_or("n/a".to_string(), |v| format!("{v:.5}"))
    );
    Ok(())
}

fn parse_thresholds(s: &str) -> Result<[f32; 3], CliError> {
    let parts: Vec<f32> = s
        .split(',')
        .map(|p| p.trim().parse::<f32>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(format!("--thresholds {s:?}: {e}")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Config(format!("--thresholds needs three values, got {s:?}")))
}

fn cmd_bid_eval(a: BidEvalArgs) -> Result<(), CliError> {
    let thresholds = parse_thresholds(&a.thresholds)?;
    let value = json!({
        "ckpt": a.ckpt, "thresholds": thresholds, "data": a.data, "play": a.play,
        "decks": a.decks, "seed": a.seed, "threads": a.threads,
    });
    if show_config(&value, a.print_config) {
        return Ok(());
    }
    let policy = BidPolicy::load(&a.ckpt, thresholds)?;
    println!("{:>8}  bid", "value");
    for row in threshold_sweep(&policy, -1.0, 1.0, 21) {
        println!("{:>8.2}  {}", row.value, row.bid.value());
    }
    if let Some(path) = &a.data {
        let data = read_dataset(path)?;
        if data.is_empty() {
            return Err(CliError::Data(format!("{} holds no samples", path.display())));
        }
        let feats: Vec<_> = data.iter().map(|s| s.features).collect();
        let out = policy
            .net
            .forward_rows(features_matrix::<f32>(&feats).view(), &mut Mode::Infer)?;
        let mse = out
            .iter()
            .zip(&data)
            .map(|(v, s)| ((v - s.label) as f64).powi(2))
            .sum::<f64>()
            / data.len() as f64;
        let mut bids = [0usize; 4];
        for v in &out {
            bids[policy.map_value(*v).value() as usize] += 1;
        }
        println!(
            "dataset {}: mse {mse:.5}; mapped bids pass/1/2/3 = {}/{}/{}/{}",
            path.display(),
            bids[0],
            bids[1],
            bids[2],
            bids[3]
        );
        // Sanity check that stored contexts still encode to the stored features.
        for s in data.iter().take(1) {
            encode_bid_context(&s.context.hand, &s.context.prior).map_err(|e| CliError::Data(e.to_string()))?;
        }
    }
    if a.decks > 0 {
        let play = load_policy(&a.play, "heuristic")?;
        let net_bids = WithBidding::new("network-bids", play.clone(), BidStrategy::Network(Box::new(policy)));
        let heuristic = WithBidding::new("heuristic-bids", play, BidStrategy::Heuristic);
        let config = MatchConfig {
            decks: a.decks,
            seed: a.seed,
            mode: MatchMode::Auction,
            variant: Variant::Standard,
            threads: a.threads,
            keep_records: false,
        };
        let r = duplicate_match(&net_bids, &heuristic, &config)?;
        println!("{}", r.summary());
    }
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> Result<(), CliError> {
    let value = json!({
        "listen": a.listen.to_string(), "ckpt_dir": a.ckpt_dir, "agent": a.agent, "bidding": a.bidding,
        "replay_dir": a.replay_dir, "turn_timeout": a.turn_timeout, "human_seat": a.human_seat,
        "variant": Variant::from(a.variant), "seed": a.seed,
    });
    if show_config(&value, a.print_config) {
        return Ok(());
    }
    let agent = match (&a.agent, &a.ckpt_dir) {
        (Some(spec), _) => load_policy(spec, &a.bidding)?,
        (None, Some(dir)) => checkpoint_policy(&latest_checkpoint(dir)?, &a.bidding)?,
        (None, None) => return Err(CliError::Config("serve needs --ckpt-dir or --agent".into())),
    };
    let human_seat =
        Seat::new(a.human_seat).ok_or_else(|| CliError::Config(format!("--human-seat {} is not 0..2", a.human_seat)))?;
    if !(a.turn_timeout >= 0.0 && a.turn_timeout.is_finite()) {
        return Err(CliError::Config("--turn-timeout must be a non-negative number of seconds".into()));
    }
    let mut config = ServeConfig::new(a.listen, agent);
    config.replay_dir = a.replay_dir.clone();
    config.turn_timeout = (a.turn_timeout > 0.0).then(|| Duration::from_secs_f64(a.turn_timeout));
    config.variant = a.variant.into();
    config.human_seat = human_seat;
    config.seed = a.seed;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let server = Server::bind(config).await?;
        println!("listening on {}", server.local_addr()?);
        std::io::stdout().flush()?;
        server
            .run(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<(), CliError>(())
    })
}

fn cmd_encode(a: EncodeArgs) -> Result<(), CliError> {
    let variant: Variant = a.variant.into();
    let mut rng = GameRng::new(a.seed);
    let mut state = start_game(variant, &BidStrategy::Heuristic, &mut rng);
    let bidder = state.current();
    let opening = state.deal().hands[bidder.index()];
    for _ in 0..a.plies {
        if state.phase() != Phase::Play {
            break;
        }
        let legal = state.legal_moves().expect("play");
        state.play_in_place(&legal[rng.index(legal.len())]).expect("legal");
    }
    if state.phase() != Phase::Play {
        return Err(CliError::Runtime(format!("the game ended before ply {}", a.plies)));
    }
    let seat = state.current();
    let features = encode_state(&state, seat).map_err(|e| CliError::Runtime(e.to_string()))?;
    let legal = state.legal_moves().expect("play");
    if a.json {
        let actions: Vec<_> = legal
            .iter()
            .map(|m| json!({"cards": m.cards().to_string(), "features": encode_action(m).0.to_vec()}))
            .collect();
        let v = json!({
            "seat": seat.index(),
            "ply": state.history().len(),
            "hand": state.hand(seat).to_string(),
            "state": features.as_slice(),
            "actions": actions,
        });
        println!("{v}");
        return Ok(());
    }
    println!(
        "seed {} ply {} seat {} ({}), hand {}",
        a.seed,
        state.history().len(),
        seat.index(),
        state.role_of(seat).map_or("?", |r| r.name()),
        state.hand(seat)
    );
    println!("state vector width {}", features.as_slice().len());
    print!("{}", state_grid(&features));
    println!("{} legal moves; first: {}", legal.len(), legal[0].cards());
    print!("{}", ddz_core::encoding::encode_hand(legal[0].cards()).grid());
    if variant.has_auction() {
        let bid = encode_bid_context(&opening, &[]).map_err(|e| CliError::Runtime(e.to_string()))?;
        println!("opening bid context for seat {} ({opening}):", bidder.index());
        print!("{}{}", bid.hand.grid(), bid.scores.grid());
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let mut rng = GameRng::new(a.seed);
    let fresh = |rng: &mut GameRng| {
        GameState::new_assigned(rng.next_u64(), Variant::Standard, Seat::new(rng.index(3) as u8).expect("seat"))
    };
    let mut state = fresh(&mut rng);
    let mut spent = Duration::ZERO;
    let mut moves = 0usize;
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for i in 0..a.states {
        if state.phase() != Phase::Play {
            state = fresh(&mut rng);
        }
        let hand = *state.hand(state.current());
        let incumbent = state.to_beat().copied();
        let t = Instant::now();
        let mut legal = legal_moves(&hand, incumbent.as_ref());
        spent += t.elapsed();
        moves += legal.len();
        if a.oracle_every > 0 && i % a.oracle_every == 0 {
            let mut oracle = legal_moves_brute_force(&hand, incumbent.as_ref());
            legal.sort();
            oracle.sort();
            checked += 1;
            if legal != oracle {
                mismatches += 1;
                log::error!("mismatch for hand {hand} against {incumbent:?}");
            }
        }
        let pick = legal[rng.index(legal.len())];
        state.play_in_place(&pick).expect("generated move is legal");
    }
    let secs = spent.as_secs_f64().max(1e-9);
    println!(
        "{} states, {:.0} states/sec, {:.1} moves per state; oracle checked {checked}, mismatches {mismatches}",
        a.states,
        a.states as f64 / secs,
        moves as f64 / a.states.max(1) as f64
    );
    if mismatches > 0 {
        return Err(CliError::Check(format!("{mismatches} oracle mismatches")));
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<(), CliError> {
    for path in &a.files {
        let file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let records =
            read_replays(std::io::BufReader::new(file)).map_err(|e| CliError::from(e).in_file(path))?;
        for (line, rec) in &records {
            rec.replay(*line).map_err(|e| CliError::from(e).in_file(path))?;
        }
        println!("{}: {} records verified", path.display(), records.len());
    }
    Ok(())
}
