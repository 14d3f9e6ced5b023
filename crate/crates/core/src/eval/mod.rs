//! Runs strategies over sets of fields and aggregates across seeds.
//!
//! Within a seed, field `i` gets patient stream `(seed, Patient, i)` and
//! strategy stream `(seed, Strategy, i)`, so results do not depend on
//! thread count or batching.

mod report;

pub use report::{render_panels, render_table_csv, render_table_markdown, write_report, FieldPanels};

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{Action, EpisodeReport, TestRun};
use crate::error::{Error, Result};
use crate::field::{GridSpec, VisualField};
use crate::patient::{PatientModel, Responder, ScriptedResponder};
use crate::rng::{rng_from, Rng, Stream};
use crate::strategy::Strategy;
use crate::zest::{ZestConfig, ZestPrior};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub zest: ZestConfig,
    pub patient: PatientModel,
    /// Tests advanced together per network forward.
    pub batch: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { zest: ZestConfig::default(), patient: PatientModel::default(), batch: 256 }
    }
}

impl EvalConfig {
    pub fn with_sigma_stop(sigma_stop: f64) -> Self {
        Self { zest: ZestConfig::with_sigma_stop(sigma_stop), ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub mean_stimuli: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub strategy: String,
    pub sigma_stop: f64,
    pub fields: usize,
    pub per_seed: Vec<SeedSummary>,
    pub stimuli_mean: f64,
    pub stimuli_std: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl RunReport {
    pub fn from_seeds(strategy: impl Into<String>, sigma_stop: f64, fields: usize, per_seed: Vec<SeedSummary>) -> Result<Self> {
        if per_seed.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let (stimuli_mean, stimuli_std) = mean_std(&per_seed.iter().map(|s| s.mean_stimuli).collect::<Vec<_>>());
        let (mse_mean, mse_std) = mean_std(&per_seed.iter().map(|s| s.mean_mse).collect::<Vec<_>>());
        Ok(Self { strategy: strategy.into(), sigma_stop, fields, per_seed, stimuli_mean, stimuli_std, mse_mean, mse_std })
    }
}

/// Every field tested once under `seed`, in field order.
pub fn run_episodes(
    strategy: &Strategy,
    fields: &[VisualField],
    prior: &Arc<ZestPrior>,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<EpisodeReport>> {
    let grid = GridSpec::shared();
    let mut out = Vec::with_capacity(fields.len());
    for (chunk_no, chunk) in fields.chunks(cfg.batch.max(1)).enumerate() {
        let base = chunk_no * cfg.batch.max(1);
        let mut runs = Vec::with_capacity(chunk.len());
        let mut patients = Vec::with_capacity(chunk.len());
        let mut rngs: Vec<Rng> = Vec::with_capacity(chunk.len());
        for (k, field) in chunk.iter().enumerate() {
            let i = (base + k) as u64;
            runs.push(TestRun::new(grid.clone(), prior.clone(), cfg.zest)?);
            patients.push(cfg.patient.build(field.clone(), rng_from(seed, Stream::Patient, i))?);
            rngs.push(rng_from(seed, Stream::Strategy, i));
        }
        for _ in 0..grid.len() {
            let actions = {
                let states: Vec<_> = runs.iter().map(|r| r.state()).collect();
                strategy.choose_batch(&states, &mut rngs, prior)?
            };
            step_all(&mut runs, &mut patients, &actions)?;
        }
        for (run, field) in runs.iter().zip(chunk) {
            out.push(run.report(Some(field))?);
        }
    }
    Ok(out)
}

pub(crate) fn step_all(
    runs: &mut [TestRun],
    patients: &mut [Box<dyn Responder + Send>],
    actions: &[Action],
) -> Result<()> {
    runs.par_iter_mut()
        .zip(patients.par_iter_mut())
        .zip(actions.par_iter())
        .try_for_each(|((run, patient), &a)| run.step(a, patient.as_mut()).map(|_| ()))
}

/// Mean stimuli and mean MSE of a set of episodes.
pub fn summarize(seed: u64, episodes: &[EpisodeReport]) -> SeedSummary {
    let n = episodes.len() as f64;
    SeedSummary {
        seed,
        mean_stimuli: episodes.iter().map(|e| e.total_stimuli as f64).sum::<f64>() / n,
        mean_mse: episodes.iter().map(|e| e.mse.unwrap_or(f64::NAN)).sum::<f64>() / n,
    }
}

pub fn evaluate(
    strategy: &Strategy,
    fields: &[VisualField],
    prior: &Arc<ZestPrior>,
    cfg: &EvalConfig,
    seeds: &[u64],
) -> Result<RunReport> {
    if fields.is_empty() {
        return Err(Error::Config("no fields to evaluate".into()));
    }
    let per_seed = seeds
        .iter()
        .map(|&seed| Ok(summarize(seed, &run_episodes(strategy, fields, prior, cfg, seed)?)))
        .collect::<Result<Vec<_>>>()?;
    RunReport::from_seeds(strategy.kind().label(), cfg.zest.sigma_stop, fields.len(), per_seed)
}

/// Re-runs a recorded test from its response sequence. The strategy stream
/// is `(seed, Strategy, 0)`, the same one a live session uses.
pub fn replay_responses(
    strategy: &Strategy,
    prior: &Arc<ZestPrior>,
    zest: &ZestConfig,
    seed: u64,
    responses: &[bool],
    truth: Option<&VisualField>,
) -> Result<EpisodeReport> {
    let grid = GridSpec::shared();
    let mut run = TestRun::new(grid, prior.clone(), *zest)?;
    let mut rng = rng_from(seed, Stream::Strategy, 0);
    let mut responder = ScriptedResponder::new(responses.to_vec());
    while !run.is_complete() {
        let action = strategy.choose(run.state(), &mut rng, prior)?;
        run.step(action, &mut responder)?;
    }
    if responder.remaining() != 0 {
        return Err(Error::Protocol(format!("{} responses left over after replay", responder.remaining())));
    }
    run.report(truth)
}
