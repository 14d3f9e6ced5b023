use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rlperi::eval::{evaluate, run_episodes, write_report, EvalConfig, FieldPanels, RunReport};
use rlperi::field::{generate_synthetic_fields, load_fields, write_fields, GridSpec, SyntheticConfig, VisualField};
use rlperi::net::{load_checkpoint, save_checkpoint, Checkpoint, QNetwork, StateEncoding};
use rlperi::service::{read_transcript, serve, SessionConfig, SessionManager};
use rlperi::strategy::{Strategy, StrategyKind};
use rlperi::trainer::{train, RewardMode, TrainerConfig};
use rlperi::zest::ZestPrior;

#[derive(Parser)]
#[command(name = "rlperi", version, about = "Reinforcement-learning visual field perimetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StateMode {
    #[value(name = "3d")]
    Counts3d,
    #[value(name = "2d")]
    Predictions2d,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Small network and schedule; minutes on a laptop.
    Desk,
    /// Full-size network and schedule.
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic 24-2 fields as CSV, one field per line.
    GenFields {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a Q-network and write a checkpoint.
    Train {
        /// A field CSV (split 60/20/20 by seed) or `synthetic:N`.
        #[arg(long, default_value = "synthetic:2000")]
        fields: String,
        #[arg(long, default_value_t = 2.0)]
        sigma_stop: f64,
        #[arg(long, default_value = "shaping")]
        reward_mode: RewardMode,
        #[arg(long, value_enum, default_value = "3d")]
        state: StateMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "desk")]
        profile: Profile,
        #[arg(long)]
        episodes: Option<usize>,
        /// JSON trainer config; overrides the profile.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Line-delimited JSON training log; defaults to `<out>.log.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate strategies over fields and seeds; writes tables and panels.
    Eval {
        /// Comma-separated: rlperi, random, raster, neighbor.
        #[arg(long, value_delimiter = ',', default_value = "random")]
        strategy: Vec<StrategyKind>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Prior CSV; defaults to the one embedded in the checkpoint.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// A field CSV or `synthetic:N`.
        #[arg(long, default_value = "synthetic:400")]
        fields: String,
        /// Generator seed for `synthetic:N` test fields.
        #[arg(long, default_value_t = 9001)]
        field_seed: u64,
        #[arg(long, default_value_t = 2.0)]
        sigma_stop: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        /// Fields rendered as panels, taken from the front of the set.
        #[arg(long, default_value_t = 3)]
        panels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Strategy for sessions that do not name one.
        #[arg(long, default_value = "rlperi")]
        strategy: StrategyKind,
        #[arg(long, default_value_t = 2.0)]
        sigma_stop: f64,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for per-session JSONL transcripts.
        #[arg(long)]
        transcripts: Option<PathBuf>,
    },
    /// Re-run a recorded session transcript offline and print its result.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        prior: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenFields { n, seed, out } => {
            let fields = generate_synthetic_fields(n, seed, &SyntheticConfig::default(), GridSpec::standard())?;
            write_fields(&out, &fields)?;
            log::info!("wrote {n} fields to {}", out.display());
        }
        Command::Train { fields, sigma_stop, reward_mode, state, seed, profile, episodes, config, log, out } => {
            let mut cfg = match (config, profile) {
                (Some(path), _) => serde_json::from_reader(File::open(&path).with_context(|| path.display().to_string())?)?,
                (None, Profile::Desk) => TrainerConfig::desk(),
                (None, Profile::Full) => TrainerConfig::default(),
            };
            cfg.zest.sigma_stop = sigma_stop;
            cfg.reward_mode = reward_mode;
            cfg.seed = seed;
            cfg.net.features.encoding = match state {
                StateMode::Counts3d => StateEncoding::Counts3d,
                StateMode::Predictions2d => StateEncoding::Predictions2d,
            };
            if let Some(e) = episodes {
                cfg.episodes = e;
            }
            run_train(&fields, &cfg, log.unwrap_or_else(|| with_suffix(&out, "log.jsonl")), &out)?;
        }
        Command::Eval { strategy, checkpoint, prior, fields, field_seed, sigma_stop, seeds, panels, out } => {
            let (net, prior) = load_model(checkpoint.as_deref(), prior.as_deref())?;
            let fields = field_source(&fields, field_seed)?;
            let cfg = EvalConfig::with_sigma_stop(sigma_stop);
            let mut reports: Vec<RunReport> = Vec::new();
            let mut all_panels = Vec::new();
            for kind in strategy {
                let s = make_strategy(kind, net.clone())?;
                let report = evaluate(&s, &fields, &prior, &cfg, &seeds)?;
                log::info!(
                    "{}: stimuli {:.1} ± {:.1}, MSE {:.3} ± {:.3}",
                    report.strategy,
                    report.stimuli_mean,
                    report.stimuli_std,
                    report.mse_mean,
                    report.mse_std
                );
                reports.push(report);
                let shown = &fields[..panels.min(fields.len())];
                if !shown.is_empty() {
                    let episodes = run_episodes(&s, shown, &prior, &cfg, seeds[0])?;
                    for (i, (f, e)) in shown.iter().zip(&episodes).enumerate() {
                        all_panels.push((format!("{}_{i}", kind.as_str()), FieldPanels::new(GridSpec::standard(), f, e)));
                    }
                }
            }
            write_report(&out, GridSpec::standard(), &reports, &all_panels)?;
            print!("{}", rlperi::eval::render_table_markdown(&reports));
        }
        Command::Serve { checkpoint, prior, strategy, sigma_stop, host, port, transcripts } => {
            let (net, prior) = load_model(checkpoint.as_deref(), prior.as_deref())?;
            if strategy == StrategyKind::Rlperi && net.is_none() {
                bail!("the default strategy rlperi needs --checkpoint; pass --strategy for a baseline");
            }
            let defaults = SessionConfig { strategy, sigma_stop, seed: 0 };
            let mut manager = SessionManager::new(net, prior, defaults);
            if let Some(dir) = transcripts {
                manager = manager.with_transcripts(dir);
            }
            tokio::runtime::Runtime::new()?.block_on(serve(Arc::new(manager), SocketAddr::new(host, port)))?;
        }
        Command::Replay { transcript, checkpoint, prior } => {
            let rec = read_transcript(&transcript)?;
            let (net, prior) = load_model(checkpoint.as_deref(), prior.as_deref())?;
            let report = rec.replay(net, &prior)?;
            if let Some(summary) = &rec.summary {
                if summary.reconstruction != report.reconstruction {
                    bail!("replayed reconstruction differs from the recorded one");
                }
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn synthetic_count(spec: &str) -> Result<Option<usize>> {
    match spec.strip_prefix("synthetic") {
        None => Ok(None),
        Some("") => Ok(Some(2000)),
        Some(rest) => {
            let n = rest.strip_prefix(':').context("expected synthetic:N")?;
            Ok(Some(n.parse().with_context(|| format!("bad field count {n:?}"))?))
        }
    }
}

fn field_source(spec: &str, seed: u64) -> Result<Vec<VisualField>> {
    let grid = GridSpec::standard();
    Ok(match synthetic_count(spec)? {
        Some(n) => generate_synthetic_fields(n, seed, &SyntheticConfig::default(), grid)?,
        None => load_fields(spec, grid).with_context(|| format!("reading fields from {spec}"))?,
    })
}

/// Training and validation sets. Synthetic validation fields come from a
/// separate generator seed; a CSV is split 60/20/20 and its test part is
/// left unused.
fn training_fields(spec: &str, seed: u64) -> Result<(Vec<VisualField>, Vec<VisualField>)> {
    let grid = GridSpec::standard();
    match synthetic_count(spec)? {
        Some(n) => {
            let train = generate_synthetic_fields(n, seed, &SyntheticConfig::default(), grid)?;
            let val = generate_synthetic_fields((n / 5).max(1), seed ^ 0x5eed_0f_7a1, &SyntheticConfig::default(), grid)?;
            Ok((train, val))
        }
        None => {
            let all = load_fields(spec, grid).with_context(|| format!("reading fields from {spec}"))?;
            let split = rlperi::field::split_dataset(&all, seed)?;
            Ok((split.train, split.validation))
        }
    }
}

fn run_train(fields: &str, cfg: &TrainerConfig, log_path: PathBuf, out: &Path) -> Result<()> {
    let (train_fields, val_fields) = training_fields(fields, cfg.seed)?;
    let prior = Arc::new(ZestPrior::from_fields(&train_fields, GridSpec::standard())?);
    log::info!(
        "training on {} fields, validating on {}, {} episodes",
        train_fields.len(),
        val_fields.len(),
        cfg.episodes
    );
    let mut log_out = BufWriter::new(File::create(&log_path).with_context(|| log_path.display().to_string())?);
    let outcome = train(&train_fields, &val_fields, &prior, cfg, &mut |r| {
        log::info!(
            "episode {:>6} step {:>7} eps {:.3} loss {} val stimuli {:.1} val MSE {:.3}{}",
            r.episode,
            r.step,
            r.epsilon,
            r.loss.map_or("-".to_string(), |l| format!("{l:.4}")),
            r.val_stimuli,
            r.val_mse,
            if r.best { " *" } else { "" }
        );
        serde_json::to_writer(&mut log_out, r)?;
        writeln!(log_out)?;
        log_out.flush()?;
        Ok(())
    })?;
    let meta = serde_json::json!({
        "trainer": cfg,
        "best": outcome.best_record,
        "updates": outcome.updates,
        "fields": fields,
    });
    save_checkpoint(out, &Checkpoint { net: outcome.best, prior: Some((*prior).clone()), meta: meta.clone() })?;
    save_checkpoint(with_suffix(out, "last"), &Checkpoint { net: outcome.last, prior: Some((*prior).clone()), meta })?;
    prior.save(with_suffix(out, "prior.csv"))?;
    log::info!(
        "best at episode {} (val stimuli {:.1}, MSE {:.3}); wrote {}",
        outcome.best_record.episode,
        outcome.best_record.val_stimuli,
        outcome.best_record.val_mse,
        out.display()
    );
    Ok(())
}

type Model = (Option<Arc<QNetwork<f32>>>, Arc<ZestPrior>);

fn load_model(checkpoint: Option<&Path>, prior: Option<&Path>) -> Result<Model> {
    let ckpt = checkpoint
        .map(|p| load_checkpoint(p).with_context(|| format!("loading checkpoint {}", p.display())))
        .transpose()?;
    let prior = match (prior, ckpt.as_ref().and_then(|c| c.prior.clone())) {
        (Some(p), _) => ZestPrior::load(p).with_context(|| format!("loading prior {}", p.display()))?,
        (None, Some(p)) => p,
        (None, None) => bail!("no prior: pass --prior or a checkpoint that embeds one"),
    };
    Ok((ckpt.map(|c| Arc::new(c.net)), Arc::new(prior)))
}

fn make_strategy(kind: StrategyKind, net: Option<Arc<QNetwork<f32>>>) -> Result<Strategy> {
    Ok(match (kind, net) {
        (StrategyKind::Rlperi, Some(n)) => Strategy::Rlperi(n),
        (StrategyKind::Rlperi, None) => bail!("strategy rlperi needs --checkpoint"),
        (k, _) => Strategy::baseline(k)?,
    })
}
