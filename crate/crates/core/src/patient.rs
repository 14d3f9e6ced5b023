//! Simulated patient with Gaussian frequency-of-seeing curves.
//!
//! A stimulus `x` dB at a location with threshold `t` is seen with
//! probability `Φ((t - x) / sigma_fos)`: 50% at threshold, falling as the
//! stimulus gets dimmer (higher dB).

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::field::{VisualField, MAX_DB};
use crate::rng::Rng;
use crate::stats::normal_cdf;

pub const DEFAULT_SIGMA_FOS: f64 = 1.0;

/// Anything that can answer seen / not-seen for a stimulus.
pub trait Responder {
    fn respond(&mut self, location: usize, stimulus: u8) -> Result<bool>;
}

#[derive(Debug, Clone)]
pub struct FosPatient {
    field: VisualField,
    sigma_fos: f64,
    rng: Rng,
}

impl FosPatient {
    pub fn new(field: VisualField, sigma_fos: f64, rng: Rng) -> Result<Self> {
        if !(sigma_fos > 0.0 && sigma_fos.is_finite()) {
            return Err(Error::Config(format!("sigma_fos must be positive, got {sigma_fos}")));
        }
        Ok(Self { field, sigma_fos, rng })
    }

    pub fn field(&self) -> &VisualField {
        &self.field
    }

    pub fn p_seen(&self, location: usize, stimulus: f64) -> Result<f64> {
        let t = self.field.threshold(location)?;
        if !(0.0..=MAX_DB as f64).contains(&stimulus) {
            return Err(Error::Domain(format!("stimulus {stimulus} dB outside [0, {MAX_DB}]")));
        }
        Ok(normal_cdf((t as f64 - stimulus) / self.sigma_fos))
    }

    /// `1 - p_seen`, evaluated on the lower tail so it stays strictly
    /// monotone where `p_seen` has already rounded to 1.
    pub fn p_not_seen(&self, location: usize, stimulus: f64) -> Result<f64> {
        let t = self.field.threshold(location)?;
        if !(0.0..=MAX_DB as f64).contains(&stimulus) {
            return Err(Error::Domain(format!("stimulus {stimulus} dB outside [0, {MAX_DB}]")));
        }
        Ok(normal_cdf((stimulus - t as f64) / self.sigma_fos))
    }
}

impl Responder for FosPatient {
    fn respond(&mut self, location: usize, stimulus: u8) -> Result<bool> {
        let p = self.p_seen(location, stimulus as f64)?;
        let u: f64 = self.rng.gen();
        Ok(u <= p)
    }
}

/// Deterministic observer: seen iff `stimulus <= threshold`.
#[derive(Debug, Clone)]
pub struct StepPatient {
    pub field: VisualField,
}

impl Responder for StepPatient {
    fn respond(&mut self, location: usize, stimulus: u8) -> Result<bool> {
        Ok(stimulus <= self.field.threshold(location)?)
    }
}

/// How simulated patients answer.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PatientModel {
    Fos { sigma: f64 },
    Step,
}

impl Default for PatientModel {
    fn default() -> Self {
        PatientModel::Fos { sigma: DEFAULT_SIGMA_FOS }
    }
}

impl PatientModel {
    pub fn build(self, field: VisualField, rng: Rng) -> Result<Box<dyn Responder + Send>> {
        Ok(match self {
            PatientModel::Fos { sigma } => Box::new(FosPatient::new(field, sigma, rng)?),
            PatientModel::Step => Box::new(StepPatient { field }),
        })
    }
}

/// Replays a fixed response sequence, e.g. a recorded session transcript.
#[derive(Debug, Clone)]
pub struct ScriptedResponder {
    responses: std::vec::IntoIter<bool>,
}

impl ScriptedResponder {
    pub fn new(responses: Vec<bool>) -> Self {
        Self { responses: responses.into_iter() }
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl Responder for ScriptedResponder {
    fn respond(&mut self, _location: usize, _stimulus: u8) -> Result<bool> {
        self.responses
            .next()
            .ok_or_else(|| Error::Protocol("scripted responses exhausted".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridSpec;
    use crate::rng::{rng_from, Stream};
    use approx::assert_abs_diff_eq;

    fn patient(t: u8, seed: u64) -> FosPatient {
        let f = VisualField::uniform(t, GridSpec::standard()).unwrap();
        FosPatient::new(f, 1.0, rng_from(seed, Stream::Patient, 0)).unwrap()
    }

    #[test]
    fn p_seen_examples() {
        let p = patient(30, 0);
        assert_eq!(p.p_seen(0, 30.0).unwrap(), 0.5);
        assert_abs_diff_eq!(p.p_seen(0, 29.0).unwrap(), 0.841345, epsilon = 1e-6);
        assert_abs_diff_eq!(p.p_seen(0, 32.0).unwrap(), 0.022750, epsilon = 1e-6);
        assert!(p.p_seen(54, 30.0).is_err());
        assert!(p.p_seen(0, 41.0).is_err());
    }

    #[test]
    fn strictly_decreasing() {
        let p = patient(20, 0);
        let ps: Vec<f64> = (0..=40).map(|x| p.p_seen(3, x as f64).unwrap()).collect();
        assert!(ps.windows(2).all(|w| w[0] >= w[1]));
        let qs: Vec<f64> = (0..=40).map(|x| p.p_not_seen(3, x as f64).unwrap()).collect();
        // Each adjacent pair is strictly ordered on whichever side of the
        // curve is not rounded to 1.
        for x in 0..40 {
            assert!(ps[x] > ps[x + 1] || qs[x] < qs[x + 1], "tie at {x}");
        }
        for (a, b) in ps.iter().zip(&qs) {
            assert!((a + b - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn extreme_stimuli() {
        let mut bright = patient(40, 1);
        assert!((0..1000).all(|_| bright.respond(0, 0).unwrap()));
        let mut blind = patient(0, 2);
        assert!((0..1000).all(|_| !blind.respond(0, 40).unwrap()));
    }

    #[test]
    fn seeded_sequences_repeat() {
        let run = |seed| {
            let mut p = patient(25, seed);
            (0..200).map(|i| p.respond(i % 54, (20 + i % 10) as u8).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn invalid_sigma() {
        let f = VisualField::uniform(1, GridSpec::standard()).unwrap();
        assert!(FosPatient::new(f, 0.0, rng_from(0, Stream::Patient, 0)).is_err());
    }

    #[test]
    fn script_runs_out() {
        let mut s = ScriptedResponder::new(vec![true]);
        assert!(s.respond(0, 0).unwrap());
        assert!(s.respond(0, 0).is_err());
    }
}
