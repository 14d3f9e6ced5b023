use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-step reward signal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// `-n + γ φ(s') - φ(s)`.
    #[default]
    Shaping,
    /// `-n`.
    NumStimuli,
    /// `φ(s') - φ(s)`: accuracy only.
    Reconstruction,
}

impl RewardMode {
    pub const ALL: [RewardMode; 3] = [RewardMode::Shaping, RewardMode::NumStimuli, RewardMode::Reconstruction];

    pub fn as_str(self) -> &'static str {
        match self {
            RewardMode::Shaping => "shaping",
            RewardMode::NumStimuli => "num_stimuli",
            RewardMode::Reconstruction => "reconstruction",
        }
    }
}

impl fmt::Display for RewardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown reward mode '{s}'")))
    }
}

/// Reward for a step that used `n_stimuli` presentations and moved the
/// potential from `phi` to `phi_next`.
pub fn shaped_reward(n_stimuli: u32, phi: f64, phi_next: f64, gamma: f64, mode: RewardMode) -> Result<f64> {
    if n_stimuli == 0 {
        return Err(Error::Domain("a step presents at least one stimulus".into()));
    }
    let n = n_stimuli as f64;
    Ok(match mode {
        RewardMode::Shaping => -n + gamma * phi_next - phi,
        RewardMode::NumStimuli => -n,
        RewardMode::Reconstruction => phi_next - phi,
    })
}
