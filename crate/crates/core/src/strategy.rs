//! Location / initial-stimulus policies: the learned network and three
//! ZEST baselines.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::IteratorRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::episode::Action;
use crate::error::{Error, Result};
use crate::field::MAX_DB;
use crate::net::QNetwork;
use crate::rng::Rng;
use crate::state::TestState;
use crate::zest::ZestPrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Rlperi,
    Random,
    Raster,
    Neighbor,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Rlperi => "rlperi",
            StrategyKind::Random => "random",
            StrategyKind::Raster => "raster",
            StrategyKind::Neighbor => "neighbor",
        }
    }

    /// Report label, e.g. `random_zest`.
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Rlperi => "rlperi",
            StrategyKind::Random => "random_zest",
            StrategyKind::Raster => "raster_zest",
            StrategyKind::Neighbor => "neighbor_zest",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rlperi" => Ok(Self::Rlperi),
            "random" | "random_zest" => Ok(Self::Random),
            "raster" | "raster_zest" => Ok(Self::Raster),
            "neighbor" | "neighbor_zest" => Ok(Self::Neighbor),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// A policy that picks the next `(location, initial stimulus)`.
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Greedy with respect to a trained network.
    Rlperi(Arc<QNetwork<f32>>),
    /// Uniform untested location, uniform initial value.
    Random,
    /// Location-index order, prior mode as initial value.
    Raster,
    /// Location-index order, initial value from already-estimated neighbours.
    Neighbor,
}

impl Strategy {
    pub fn kind(&self) -> StrategyKind {
        match self {
            Strategy::Rlperi(_) => StrategyKind::Rlperi,
            Strategy::Random => StrategyKind::Random,
            Strategy::Raster => StrategyKind::Raster,
            Strategy::Neighbor => StrategyKind::Neighbor,
        }
    }

    pub fn baseline(kind: StrategyKind) -> Result<Self> {
        match kind {
            StrategyKind::Random => Ok(Strategy::Random),
            StrategyKind::Raster => Ok(Strategy::Raster),
            StrategyKind::Neighbor => Ok(Strategy::Neighbor),
            StrategyKind::Rlperi => Err(Error::Config("rlperi needs a checkpoint".into())),
        }
    }

    pub fn choose(&self, state: &TestState, rng: &mut Rng, prior: &ZestPrior) -> Result<Action> {
        Ok(self.choose_batch(&[state], std::slice::from_mut(rng), prior)?.remove(0))
    }

    /// One action per state; `rngs[i]` is the stream of test `i`.
    pub fn choose_batch(&self, states: &[&TestState], rngs: &mut [Rng], prior: &ZestPrior) -> Result<Vec<Action>> {
        if states.len() != rngs.len() {
            return Err(Error::Shape(format!("{} states but {} rngs", states.len(), rngs.len())));
        }
        if let Strategy::Rlperi(net) = self {
            return net.greedy_actions(states);
        }
        states
            .iter()
            .zip(rngs.iter_mut())
            .map(|(s, rng)| match self {
                Strategy::Random => random_action(s, rng),
                Strategy::Raster => {
                    let location = first_untested(s)?;
                    Ok(Action { location, stimulus: prior.mode(location)? })
                }
                Strategy::Neighbor => {
                    let location = first_untested(s)?;
                    Ok(Action { location, stimulus: neighbor_value(s, location, prior)? })
                }
                Strategy::Rlperi(_) => unreachable!(),
            })
            .collect()
    }
}

fn first_untested(state: &TestState) -> Result<usize> {
    state.untested().next().ok_or_else(|| Error::Protocol("no untested location left".into()))
}

/// Uniform untested location and uniform initial value in `[0, 40]`.
pub fn random_action(state: &TestState, rng: &mut Rng) -> Result<Action> {
    let location = state
        .untested()
        .choose(rng)
        .ok_or_else(|| Error::Protocol("no untested location left".into()))?;
    Ok(Action { location, stimulus: rng.gen_range(0..=MAX_DB) })
}

/// Rounded mean of the estimated 8-neighbours, prior mode if none.
pub fn neighbor_value(state: &TestState, location: usize, prior: &ZestPrior) -> Result<u8> {
    let known: Vec<u8> = state.grid().neighbors(location).into_iter().filter_map(|n| state.prediction(n)).collect();
    if known.is_empty() {
        return prior.mode(location);
    }
    let mean = known.iter().map(|&v| v as f64).sum::<f64>() / known.len() as f64;
    Ok(mean.round() as u8)
}
