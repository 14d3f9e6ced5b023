//! A single perimetry test driven one location at a time.
//!
//! [`TestRun`] owns the state, the per-location ZEST estimator and the
//! bookkeeping for an [`EpisodeReport`]. It can be stepped either a whole
//! location at a time against a [`Responder`], or one response at a time
//! (the session service does this), with identical results.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, VisualField, N_STIMULI};
use crate::patient::Responder;
use crate::state::{Presentation, TestState};
use crate::zest::{ZestConfig, ZestEstimator, ZestPrior};

/// Which location to test next and the first stimulus to show there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub location: usize,
    pub stimulus: u8,
}

/// Summary of one finished location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub location: usize,
    pub initial: u8,
    pub presentations: u32,
    pub estimate: u8,
}

/// What happened after a response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    /// Same location, present this stimulus next.
    Continue(u8),
    /// The location finished.
    Done(StepRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub total_stimuli: u32,
    /// Estimated threshold per location, location-index order.
    pub reconstruction: Vec<u8>,
    /// Against the ground truth, when one is known.
    pub mse: Option<f64>,
    pub per_location_stimuli: Vec<u32>,
    /// Locations in the order they were tested.
    pub order: Vec<usize>,
    /// First stimulus shown at each location, location-index order.
    pub initial_values: Vec<u8>,
}

/// Mean over locations of the squared threshold error.
pub fn mse(truth: &VisualField, recon: &VisualField) -> Result<f64> {
    if truth.len() != recon.len() || truth.is_empty() {
        return Err(Error::Shape(format!("fields have {} and {} locations", truth.len(), recon.len())));
    }
    let sse: f64 = truth
        .values()
        .iter()
        .zip(recon.values())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(sse / truth.len() as f64)
}

struct Active {
    location: usize,
    stimulus: u8,
    initial: u8,
    estimator: ZestEstimator,
}

pub struct TestRun {
    state: TestState,
    prior: Arc<ZestPrior>,
    zest: ZestConfig,
    active: Option<Active>,
    steps: Vec<StepRecord>,
    log: Vec<Presentation>,
}

impl TestRun {
    pub fn new(grid: Arc<GridSpec>, prior: Arc<ZestPrior>, zest: ZestConfig) -> Result<Self> {
        zest.validate()?;
        if prior.len() != grid.len() {
            return Err(Error::Shape(format!("prior has {} locations, grid has {}", prior.len(), grid.len())));
        }
        Ok(Self { state: TestState::new(grid), prior, zest, active: None, steps: Vec::new(), log: Vec::new() })
    }

    pub fn state(&self) -> &TestState {
        &self.state
    }

    pub fn prior(&self) -> &ZestPrior {
        &self.prior
    }

    pub fn zest_config(&self) -> &ZestConfig {
        &self.zest
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_terminal()
    }

    /// Completed locations, oldest first.
    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Every presentation so far, oldest first.
    pub fn presentations(&self) -> &[Presentation] {
        &self.log
    }

    /// The stimulus awaiting a response, if a location is in progress.
    pub fn pending(&self) -> Option<Action> {
        self.active.as_ref().map(|a| Action { location: a.location, stimulus: a.stimulus })
    }

    /// Opens a location; returns the first stimulus to present.
    pub fn begin(&mut self, action: Action) -> Result<u8> {
        if self.active.is_some() {
            return Err(Error::Protocol("a location is already in progress".into()));
        }
        if action.location >= self.state.grid().len() {
            return Err(Error::InvalidLocation(action.location));
        }
        if action.stimulus as usize >= N_STIMULI {
            return Err(Error::InvalidStimulus(action.stimulus as i32));
        }
        if self.state.is_tested(action.location) {
            return Err(Error::AlreadyTested(action.location));
        }
        let estimator = ZestEstimator::new(self.prior.pdf(action.location)?)?;
        self.active = Some(Active {
            location: action.location,
            stimulus: action.stimulus,
            initial: action.stimulus,
            estimator,
        });
        Ok(action.stimulus)
    }

    /// Folds the response to the pending stimulus into the state.
    pub fn respond(&mut self, seen: bool) -> Result<Progress> {
        let active = self.active.as_mut().ok_or_else(|| Error::Protocol("no stimulus is pending".into()))?;
        let p = Presentation { location: active.location, stimulus: active.stimulus, seen };
        let done = active.estimator.update(seen, active.stimulus, &self.zest)?;
        self.state.apply(p)?;
        self.log.push(p);
        if !done {
            active.stimulus = active.estimator.estimate();
            return Ok(Progress::Continue(active.stimulus));
        }
        let record = StepRecord {
            location: active.location,
            initial: active.initial,
            presentations: active.estimator.presentations(),
            estimate: active.estimator.estimate(),
        };
        self.active = None;
        self.state.mark_tested(record.location, record.estimate)?;
        self.steps.push(record);
        Ok(Progress::Done(record))
    }

    /// Tests one location to completion.
    pub fn step(&mut self, action: Action, responder: &mut dyn Responder) -> Result<StepRecord> {
        let mut stimulus = self.begin(action)?;
        loop {
            let seen = responder.respond(action.location, stimulus)?;
            match self.respond(seen)? {
                Progress::Continue(next) => stimulus = next,
                Progress::Done(record) => return Ok(record),
            }
        }
    }

    /// Report of the test so far. Untested locations read as 0 in the
    /// reconstruction and initial values.
    pub fn report(&self, truth: Option<&VisualField>) -> Result<EpisodeReport> {
        let n = self.state.grid().len();
        let mut reconstruction = vec![0u8; n];
        let mut per_location_stimuli = vec![0u32; n];
        let mut initial_values = vec![0u8; n];
        for s in &self.steps {
            reconstruction[s.location] = s.estimate;
            per_location_stimuli[s.location] = s.presentations;
            initial_values[s.location] = s.initial;
        }
        let mse = match truth {
            Some(t) => Some(mse(t, &VisualField::new(reconstruction.clone(), self.state.grid())?)?),
            None => None,
        };
        Ok(EpisodeReport {
            total_stimuli: self.state.total_presentations(),
            reconstruction,
            mse,
            per_location_stimuli,
            order: self.steps.iter().map(|s| s.location).collect(),
            initial_values,
        })
    }
}

/// Rebuilds the state after the first `steps` completed locations of a
/// recorded run.
pub fn replay_state(grid: &Arc<GridSpec>, records: &[StepRecord], log: &[Presentation], steps: usize) -> Result<TestState> {
    let mut state = TestState::new(grid.clone());
    let mut offset = 0;
    for r in &records[..steps] {
        let end = offset + r.presentations as usize;
        for &p in &log[offset..end] {
            state.apply(p)?;
        }
        state.mark_tested(r.location, r.estimate)?;
        offset = end;
    }
    Ok(state)
}
