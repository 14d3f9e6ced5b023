//! Episodic ε-greedy training of the branching Q-network.
//!
//! Episodes are generated in rounds with frozen parameters, then the
//! optimizer runs a fixed number of minibatch updates per finished episode.
//! Every random draw comes from a stream keyed by `(seed, purpose, index)`,
//! so a run is reproducible bit-for-bit whatever the thread count.

mod replay;
mod reward;
pub mod tabular;
mod target;

pub use replay::{experiences, EpisodeLog, Experience, ReplayBuffer};
pub use reward::{shaped_reward, RewardMode};
pub use target::{compute_loss, compute_target, BranchValues, LossMode, LossOutput};

use std::sync::Arc;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::episode::{Action, EpisodeReport, TestRun};
use crate::error::{Error, Result};
use crate::eval::{run_episodes, step_all, summarize, EvalConfig};
use crate::field::{GridSpec, VisualField};
use crate::net::{encode_states, Adam, NetConfig, QNetwork};
use crate::patient::PatientModel;
use crate::rng::{rng_from, Rng, Stream};
use crate::state::TestState;
use crate::strategy::{random_action, Strategy};
use crate::zest::{ZestConfig, ZestPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Updates start once the buffer holds this many experiences.
    pub min_replay: usize,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Per-episode multiplicative decay of ε.
    pub epsilon_decay: f64,
    /// Target network copy period, in updates.
    pub target_refresh: u64,
    pub updates_per_episode: usize,
    pub episodes: usize,
    /// Episodes generated between update phases.
    pub episodes_per_round: usize,
    /// Validation period, in episodes.
    pub eval_every: usize,
    pub reward_mode: RewardMode,
    pub loss_mode: LossMode,
    pub patient: PatientModel,
    pub zest: ZestConfig,
    pub net: NetConfig,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            learning_rate: 1e-4,
            batch_size: 2048,
            replay_capacity: 100_000,
            min_replay: 2048,
            epsilon_start: 1.0,
            epsilon_floor: 0.01,
            epsilon_decay: 0.999,
            target_refresh: 500,
            updates_per_episode: 1,
            episodes: 10_000,
            episodes_per_round: 16,
            eval_every: 500,
            reward_mode: RewardMode::Shaping,
            loss_mode: LossMode::Combined,
            patient: PatientModel::default(),
            zest: ZestConfig::default(),
            net: NetConfig::default(),
            seed: 0,
        }
    }
}

impl TrainerConfig {
    /// A small network and schedule that trains in minutes on one core.
    pub fn desk() -> Self {
        let mut net = NetConfig::default();
        net.features.channels = 16;
        net.trunk = vec![128, 64];
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            min_replay: 2048,
            epsilon_decay: 0.997,
            target_refresh: 250,
            updates_per_episode: 2,
            episodes: 3000,
            episodes_per_round: 32,
            eval_every: 250,
            net,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(0.01..=1.0).contains(&self.epsilon_floor) || !(self.epsilon_floor..=1.0).contains(&self.epsilon_start) {
            return bad(format!("epsilon range [{}, {}] outside [0.01, 1]", self.epsilon_floor, self.epsilon_start));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad(format!("epsilon decay {} outside (0, 1]", self.epsilon_decay));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.target_refresh == 0 {
            return bad("learning rate, batch size and target refresh must be positive".into());
        }
        if self.min_replay < self.batch_size || self.replay_capacity < self.min_replay {
            return bad(format!(
                "need batch {} <= min replay {} <= capacity {}",
                self.batch_size, self.min_replay, self.replay_capacity
            ));
        }
        if self.episodes_per_round == 0 || self.eval_every == 0 {
            return bad("episodes per round and eval period must be positive".into());
        }
        self.zest.validate()?;
        self.net.validate()
    }

    /// ε for the `episode`-th episode: exponential decay to the floor.
    pub fn epsilon(&self, episode: usize) -> f64 {
        (self.epsilon_start * self.epsilon_decay.powf(episode as f64)).max(self.epsilon_floor)
    }

    fn eval_config(&self) -> EvalConfig {
        EvalConfig { zest: self.zest, patient: self.patient, batch: 256 }
    }
}

/// One episode's inputs.
pub struct EpisodeJob<'a> {
    pub field: &'a VisualField,
    pub epsilon: f64,
    pub patient_rng: Rng,
    pub explore_rng: Rng,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub log: Arc<EpisodeLog>,
    pub report: EpisodeReport,
}

impl EpisodeOutcome {
    pub fn experiences(&self) -> Vec<Experience> {
        experiences(&self.log)
    }
}

/// Runs the jobs side by side, one batched forward per step for the
/// episodes acting greedily.
pub fn generate_episodes(
    jobs: Vec<EpisodeJob<'_>>,
    net: &QNetwork<f32>,
    prior: &Arc<ZestPrior>,
    cfg: &TrainerConfig,
) -> Result<Vec<EpisodeOutcome>> {
    let grid = GridSpec::shared();
    let mut runs = Vec::with_capacity(jobs.len());
    let mut patients = Vec::with_capacity(jobs.len());
    let mut rngs = Vec::with_capacity(jobs.len());
    let mut fields = Vec::with_capacity(jobs.len());
    for job in jobs {
        runs.push(TestRun::new(grid.clone(), prior.clone(), cfg.zest)?);
        patients.push(cfg.patient.build(job.field.clone(), job.patient_rng)?);
        rngs.push((job.explore_rng, job.epsilon));
        fields.push(job.field);
    }
    let mut potentials: Vec<Vec<f64>> = runs.iter().zip(&fields).map(|(r, f)| vec![r.state().potential(f)]).collect();
    let mut rewards: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); runs.len()];
    for _ in 0..grid.len() {
        let mut actions: Vec<Option<Action>> = Vec::with_capacity(runs.len());
        for (run, (rng, eps)) in runs.iter().zip(rngs.iter_mut()) {
            let explore = rng.gen::<f64>() < *eps;
            actions.push(if explore { Some(random_action(run.state(), rng)?) } else { None });
        }
        let greedy_idx: Vec<usize> = (0..runs.len()).filter(|&i| actions[i].is_none()).collect();
        if !greedy_idx.is_empty() {
            let states: Vec<&TestState> = greedy_idx.iter().map(|&i| runs[i].state()).collect();
            for (i, a) in greedy_idx.iter().zip(net.greedy_actions(&states)?) {
                actions[*i] = Some(a);
            }
        }
        let actions: Vec<Action> = actions.into_iter().map(|a| a.expect("every run has an action")).collect();
        step_all(&mut runs, &mut patients, &actions)?;
        for (k, run) in runs.iter().enumerate() {
            let phi = *potentials[k].last().expect("non-empty");
            let phi_next = run.state().potential(fields[k]);
            let n = run.steps().last().expect("just stepped").presentations;
            rewards[k].push(shaped_reward(n, phi, phi_next, cfg.gamma, cfg.reward_mode)?);
            potentials[k].push(phi_next);
        }
    }
    runs.into_iter()
        .zip(fields)
        .zip(rewards.into_iter().zip(potentials))
        .map(|((run, field), (rewards, potentials))| {
            let report = run.report(Some(field))?;
            let log = EpisodeLog {
                grid: grid.clone(),
                steps: run.steps().to_vec(),
                presentations: run.presentations().to_vec(),
                rewards,
                potentials,
            };
            Ok(EpisodeOutcome { log: Arc::new(log), report })
        })
        .collect()
}

/// A single ε-greedy episode.
pub fn run_episode(
    field: &VisualField,
    net: &QNetwork<f32>,
    epsilon: f64,
    patient_rng: Rng,
    explore_rng: Rng,
    prior: &Arc<ZestPrior>,
    cfg: &TrainerConfig,
) -> Result<EpisodeOutcome> {
    let job = EpisodeJob { field, epsilon, patient_rng, explore_rng };
    Ok(generate_episodes(vec![job], net, prior, cfg)?.remove(0))
}

/// One training-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub episode: usize,
    pub step: u64,
    pub epsilon: f64,
    /// Mean loss over the updates since the previous record.
    pub loss: Option<f64>,
    pub val_stimuli: f64,
    pub val_mse: f64,
    pub best: bool,
    pub seconds: f64,
}

/// Optimizer state: online and target networks, Adam moments, replay.
pub struct Learner {
    cfg: TrainerConfig,
    online: QNetwork<f32>,
    target: QNetwork<f32>,
    adam: Adam<f32>,
    buffer: ReplayBuffer<Experience>,
    replay_rng: Rng,
    dropout_rng: Rng,
    updates: u64,
}

impl Learner {
    pub fn new(cfg: TrainerConfig) -> Result<Self> {
        cfg.validate()?;
        let online = QNetwork::new(cfg.net.clone(), &mut rng_from(cfg.seed, Stream::Init, 0))?;
        Self::with_network(cfg, online)
    }

    pub fn with_network(cfg: TrainerConfig, online: QNetwork<f32>) -> Result<Self> {
        cfg.validate()?;
        if online.config() != &cfg.net {
            return Err(Error::Config("network does not match the trainer's network config".into()));
        }
        Ok(Self {
            target: online.clone(),
            adam: Adam::new(online.params(), cfg.learning_rate),
            buffer: ReplayBuffer::new(cfg.replay_capacity)?,
            replay_rng: rng_from(cfg.seed, Stream::Replay, 0),
            dropout_rng: rng_from(cfg.seed, Stream::Dropout, 0),
            updates: 0,
            online,
            cfg,
        })
    }

    pub fn online(&self) -> &QNetwork<f32> {
        &self.online
    }

    pub fn target(&self) -> &QNetwork<f32> {
        &self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer<Experience> {
        &self.buffer
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn push_episode(&mut self, outcome: &EpisodeOutcome) {
        for e in outcome.experiences() {
            self.buffer.push(e);
        }
    }

    pub fn ready(&self) -> bool {
        self.buffer.len() >= self.cfg.min_replay
    }

    /// One minibatch update; returns the batch loss.
    pub fn update(&mut self) -> Result<f64> {
        let batch = self.buffer.sample(&mut self.replay_rng, self.cfg.batch_size)?;
        let states: Vec<TestState> = batch.iter().map(|e| e.state()).collect::<Result<_>>()?;
        let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch[i].terminal()).collect();
        let next: Vec<TestState> = live.iter().map(|&i| batch[i].next_state()).collect::<Result<_>>()?;

        let mut targets: Vec<f64> = batch.iter().map(|e| e.reward()).collect();
        if !next.is_empty() {
            let refs: Vec<&TestState> = next.iter().collect();
            let input = encode_states::<f32>(&refs, &self.cfg.net)?;
            let q_online = self.online.forward(&input)?;
            let q_target = self.target.forward(&input)?;
            for (k, &i) in live.iter().enumerate() {
                targets[i] = compute_target(
                    batch[i].reward(),
                    false,
                    self.cfg.gamma,
                    BranchValues { location: q_online.q_location.row(k), stimulus: q_online.q_stimulus.row(k) },
                    BranchValues { location: q_target.q_location.row(k), stimulus: q_target.q_stimulus.row(k) },
                    |l| !next[k].is_tested(l),
                )?;
            }
        }

        let refs: Vec<&TestState> = states.iter().collect();
        let input = encode_states::<f32>(&refs, &self.cfg.net)?;
        let (q, tape) = self.online.forward_train(&input, Some(&mut self.dropout_rng))?;
        let actions: Vec<Action> = batch.iter().map(|e| e.action()).collect();
        let ql: Vec<f64> = actions.iter().enumerate().map(|(b, a)| q.q_location[[b, a.location]] as f64).collect();
        let qv: Vec<f64> = actions.iter().enumerate().map(|(b, a)| q.q_stimulus[[b, a.stimulus as usize]] as f64).collect();
        let out = compute_loss(&targets, &ql, &qv, self.cfg.loss_mode)?;
        if !out.loss.is_finite() {
            return Err(Error::Diverged(format!(
                "loss {} at update {}; max |θ| = {}, target range [{}, {}]",
                out.loss,
                self.updates + 1,
                self.online.params().max_abs(),
                targets.iter().copied().fold(f64::INFINITY, f64::min),
                targets.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )));
        }
        let mut dq_l = Array2::<f32>::zeros(q.q_location.dim());
        let mut dq_v = Array2::<f32>::zeros(q.q_stimulus.dim());
        for (b, a) in actions.iter().enumerate() {
            dq_l[[b, a.location]] = out.d_location[b] as f32;
            dq_v[[b, a.stimulus as usize]] = out.d_stimulus[b] as f32;
        }
        let grads = self.online.backward(&tape, dq_l.view(), dq_v.view());
        self.adam.step(self.online.params_mut(), &grads);
        if !self.online.params().is_finite() {
            return Err(Error::Diverged(format!("non-finite parameter after update {}", self.updates + 1)));
        }
        self.updates += 1;
        if self.updates % self.cfg.target_refresh == 0 {
            self.target.params_mut().copy_from(self.online.params());
        }
        Ok(out.loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation result.
    pub best: QNetwork<f32>,
    pub last: QNetwork<f32>,
    pub best_record: LogRecord,
    pub log: Vec<LogRecord>,
    pub updates: u64,
}

fn validate_net(
    net: &QNetwork<f32>,
    fields: &[VisualField],
    prior: &Arc<ZestPrior>,
    cfg: &TrainerConfig,
) -> Result<(f64, f64)> {
    let strategy = Strategy::Rlperi(Arc::new(net.clone()));
    let episodes = run_episodes(&strategy, fields, prior, &cfg.eval_config(), cfg.seed)?;
    let s = summarize(cfg.seed, &episodes);
    Ok((s.mean_stimuli, s.mean_mse))
}

/// Trains from a fresh network. `on_log` sees every validation record as it
/// is produced.
pub fn train(
    train_fields: &[VisualField],
    val_fields: &[VisualField],
    prior: &Arc<ZestPrior>,
    cfg: &TrainerConfig,
    on_log: &mut dyn FnMut(&LogRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    if train_fields.is_empty() || val_fields.is_empty() {
        return Err(Error::Config("training and validation fields must be non-empty".into()));
    }
    let mut learner = Learner::new(cfg.clone())?;
    let start = Instant::now();
    let mut log: Vec<LogRecord> = Vec::new();
    let mut best: Option<(QNetwork<f32>, LogRecord)> = None;
    let mut losses: Vec<f64> = Vec::new();

    let mut evaluate = |learner: &Learner, episode: usize, losses: &mut Vec<f64>| -> Result<()> {
        let (val_stimuli, val_mse) = validate_net(learner.online(), val_fields, prior, cfg)?;
        let improved = match &best {
            None => true,
            Some((_, b)) => (val_mse, val_stimuli) < (b.val_mse, b.val_stimuli),
        };
        let record = LogRecord {
            episode,
            step: learner.updates(),
            epsilon: cfg.epsilon(episode),
            loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
            val_stimuli,
            val_mse,
            best: improved,
            seconds: start.elapsed().as_secs_f64(),
        };
        losses.clear();
        on_log(&record)?;
        if improved {
            best = Some((learner.online().clone(), record.clone()));
        }
        log.push(record);
        Ok(())
    };

    evaluate(&learner, 0, &mut losses)?;
    let n = train_fields.len();
    let mut order: Vec<usize> = Vec::new();
    let mut episode = 0;
    while episode < cfg.episodes {
        let round = cfg.episodes_per_round.min(cfg.episodes - episode);
        let mut jobs = Vec::with_capacity(round);
        for e in episode..episode + round {
            if e % n == 0 {
                order = (0..n).collect();
                order.shuffle(&mut rng_from(cfg.seed, Stream::Shuffle, (e / n) as u64));
            }
            jobs.push(EpisodeJob {
                field: &train_fields[order[e % n]],
                epsilon: cfg.epsilon(e),
                patient_rng: rng_from(cfg.seed, Stream::Patient, e as u64),
                explore_rng: rng_from(cfg.seed, Stream::Exploration, e as u64),
            });
        }
        let outcomes = generate_episodes(jobs, learner.online(), prior, cfg)?;
        for o in &outcomes {
            learner.push_episode(o);
            if learner.ready() {
                for _ in 0..cfg.updates_per_episode {
                    losses.push(learner.update()?);
                }
            }
        }
        let before = episode;
        episode += round;
        if episode / cfg.eval_every > before / cfg.eval_every || episode == cfg.episodes {
            evaluate(&learner, episode, &mut losses)?;
        }
    }
    let (best, best_record) = best.expect("initial evaluation always runs");
    Ok(TrainOutcome { best, last: learner.online().clone(), best_record, log, updates: learner.updates() })
}
