//! Experience replay.
//!
//! Each finished episode is stored once as an [`EpisodeLog`]; an
//! [`Experience`] is a shared handle to its log plus a step index, and the
//! `s`/`s'` snapshots are rebuilt from the log on demand. Rebuilt states
//! are identical to copies taken while the episode ran.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;

use crate::episode::{replay_state, Action, StepRecord};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::rng::Rng;
use crate::state::{Presentation, TestState};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub grid: Arc<GridSpec>,
    pub steps: Vec<StepRecord>,
    pub presentations: Vec<Presentation>,
    pub rewards: Vec<f64>,
    /// Potential before each step and after the last: `steps + 1` values.
    pub potentials: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Experience {
    log: Arc<EpisodeLog>,
    step: usize,
}

impl Experience {
    pub fn new(log: Arc<EpisodeLog>, step: usize) -> Result<Self> {
        if step >= log.steps.len() {
            return Err(Error::Shape(format!("episode has {} steps, asked for {step}", log.steps.len())));
        }
        Ok(Self { log, step })
    }

    pub fn state(&self) -> Result<TestState> {
        replay_state(&self.log.grid, &self.log.steps, &self.log.presentations, self.step)
    }

    pub fn next_state(&self) -> Result<TestState> {
        replay_state(&self.log.grid, &self.log.steps, &self.log.presentations, self.step + 1)
    }

    pub fn action(&self) -> Action {
        let s = &self.log.steps[self.step];
        Action { location: s.location, stimulus: s.initial }
    }

    pub fn reward(&self) -> f64 {
        self.log.rewards[self.step]
    }

    /// The last step of a complete test.
    pub fn terminal(&self) -> bool {
        self.step + 1 == self.log.grid.len()
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

/// All experiences of a logged episode, in order.
pub fn experiences(log: &Arc<EpisodeLog>) -> Vec<Experience> {
    (0..log.steps.len()).map(|step| Experience { log: log.clone(), step }).collect()
}

/// Bounded FIFO.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<E> {
    items: VecDeque<E>,
    capacity: usize,
}

impl<E: Clone> ReplayBuffer<E> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self { items: VecDeque::with_capacity(capacity.min(1 << 20)), capacity })
    }

    pub fn push(&mut self, item: E) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &E> {
        self.items.iter()
    }

    /// `n` distinct items drawn uniformly.
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Vec<E>> {
        if n > self.items.len() {
            return Err(Error::Config(format!("cannot sample {n} from {} experiences", self.items.len())));
        }
        Ok(index::sample(rng, self.items.len(), n).into_iter().map(|i| self.items[i].clone()).collect())
    }
}
