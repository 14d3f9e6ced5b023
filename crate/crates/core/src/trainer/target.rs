//! Branched double-Q targets and the combined loss.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{masked_argmax, Real};

/// How the two branch errors form the per-sample loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// `(½[(y - Q_l) + (y - Q_v)])²`. Opposite errors cancel.
    #[default]
    Combined,
    /// `½[(y - Q_l)² + (y - Q_v)²]`.
    PerBranch,
}

/// Q outputs of one next state.
#[derive(Debug, Clone, Copy)]
pub struct BranchValues<'a, T> {
    pub location: ArrayView1<'a, T>,
    pub stimulus: ArrayView1<'a, T>,
}

/// `y = r` for terminal steps, otherwise
/// `r + γ/2 [Q_l(s', argmax_l Q_l(s'; θ); θ⁻) + Q_v(s', argmax_v Q_v(s'; θ); θ⁻)]`,
/// the location argmax running over locations untested in `s'`.
pub fn compute_target<T: Real>(
    reward: f64,
    terminal: bool,
    gamma: f64,
    online: BranchValues<'_, T>,
    target: BranchValues<'_, T>,
    untested: impl Fn(usize) -> bool,
) -> Result<f64> {
    if terminal {
        return Ok(reward);
    }
    let l = masked_argmax(online.location, untested)
        .ok_or_else(|| Error::Protocol("non-terminal next state has no untested location".into()))?;
    let v = masked_argmax(online.stimulus, |_| true).ok_or_else(|| Error::Shape("empty stimulus branch".into()))?;
    let ql = target.location[l].to_f64().unwrap();
    let qv = target.stimulus[v].to_f64().unwrap();
    Ok(reward + gamma / 2.0 * (ql + qv))
}

/// Batch loss and its gradients with respect to `Q_l(s, a_l)` and `Q_v(s, a_v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub d_location: Vec<f64>,
    pub d_stimulus: Vec<f64>,
}

pub fn compute_loss(targets: &[f64], q_location: &[f64], q_stimulus: &[f64], mode: LossMode) -> Result<LossOutput> {
    let b = targets.len();
    if b == 0 || q_location.len() != b || q_stimulus.len() != b {
        return Err(Error::Shape(format!(
            "loss needs equal non-empty batches, got {b}/{}/{}",
            q_location.len(),
            q_stimulus.len()
        )));
    }
    let n = b as f64;
    let mut loss = 0.0;
    let mut d_location = Vec::with_capacity(b);
    let mut d_stimulus = Vec::with_capacity(b);
    for ((&y, &ql), &qv) in targets.iter().zip(q_location).zip(q_stimulus) {
        let (el, ev) = (y - ql, y - qv);
        match mode {
            LossMode::Combined => {
                let d = 0.5 * (el + ev);
                loss += d * d;
                d_location.push(-d / n);
                d_stimulus.push(-d / n);
            }
            LossMode::PerBranch => {
                loss += 0.5 * (el * el + ev * ev);
                d_location.push(-el / n);
                d_stimulus.push(-ev / n);
            }
        }
    }
    Ok(LossOutput { loss: loss / n, d_location, d_stimulus })
}
