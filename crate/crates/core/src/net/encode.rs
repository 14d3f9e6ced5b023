use ndarray::Array2;

use super::{NetConfig, Real, StateEncoding};
use crate::error::{Error, Result};
use crate::field::N_STIMULI;
use crate::state::TestState;

/// A batch of states in the network's input layout.
#[derive(Debug, Clone, PartialEq)]
pub enum NetInput<T> {
    /// Seen and not-seen volumes, each `[N_STIMULI, B·P]`.
    Counts { seen: Array2<T>, not_seen: Array2<T>, batch: usize },
    /// Prediction maps, `[B, P]`.
    Predictions(Array2<T>),
}

impl<T: Real> NetInput<T> {
    pub fn batch(&self) -> usize {
        match self {
            NetInput::Counts { batch, .. } => *batch,
            NetInput::Predictions(m) => m.nrows(),
        }
    }

    /// Swaps the seen and not-seen volumes.
    pub fn swapped(&self) -> Self {
        match self {
            NetInput::Counts { seen, not_seen, batch } => {
                NetInput::Counts { seen: not_seen.clone(), not_seen: seen.clone(), batch: *batch }
            }
            other => other.clone(),
        }
    }
}

pub fn encode_states<T: Real>(states: &[&TestState], cfg: &NetConfig) -> Result<NetInput<T>> {
    let p = cfg.pixels();
    for s in states {
        if s.grid().rows() != cfg.rows || s.grid().cols() != cfg.cols || s.grid().len() != cfg.locations {
            return Err(Error::Shape(format!(
                "state grid {}x{} ({} locations) does not match network {}x{} ({})",
                s.grid().rows(),
                s.grid().cols(),
                s.grid().len(),
                cfg.rows,
                cfg.cols,
                cfg.locations
            )));
        }
    }
    let b = states.len();
    Ok(match cfg.features.encoding {
        StateEncoding::Counts3d => {
            let mut seen = Array2::zeros((N_STIMULI, b * p));
            let mut not_seen = Array2::zeros((N_STIMULI, b * p));
            for (bi, s) in states.iter().enumerate() {
                for ch in 0..N_STIMULI {
                    let src = ch * p..(ch + 1) * p;
                    for (dst, (&a, &n)) in (bi * p..(bi + 1) * p)
                        .zip(s.seen_counts()[src.clone()].iter().zip(&s.not_seen_counts()[src]))
                    {
                        seen[[ch, dst]] = T::from(a).unwrap();
                        not_seen[[ch, dst]] = T::from(n).unwrap();
                    }
                }
            }
            NetInput::Counts { seen, not_seen, batch: b }
        }
        StateEncoding::Predictions2d => {
            let mut m = Array2::zeros((b, p));
            for (bi, s) in states.iter().enumerate() {
                for (j, v) in s.prediction_map().into_iter().enumerate() {
                    m[[bi, j]] = T::from(v).unwrap();
                }
            }
            NetInput::Predictions(m)
        }
    })
}
