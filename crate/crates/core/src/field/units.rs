use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_DB: u8 = 0;
pub const MAX_DB: u8 = 40;
/// Number of distinct integer stimulus values, 0..=40 dB.
pub const N_STIMULI: usize = (MAX_DB - MIN_DB) as usize + 1;

/// Default maximum luminance of the perimetric surface, in apostilb.
pub const DEFAULT_L_MAX: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusScale {
    pub min_db: u8,
    pub max_db: u8,
    pub l_max: f64,
}

impl Default for StimulusScale {
    fn default() -> Self {
        Self { min_db: MIN_DB, max_db: MAX_DB, l_max: DEFAULT_L_MAX }
    }
}

impl StimulusScale {
    pub fn count(&self) -> usize {
        (self.max_db - self.min_db) as usize + 1
    }

    pub fn contains(&self, db: i32) -> bool {
        db >= self.min_db as i32 && db <= self.max_db as i32
    }

    pub fn luminance(&self, db: f64) -> Result<f64> {
        luminance_from_db(self.l_max, db)
    }
}

/// Attenuation in dB of a stimulus of luminance `l` relative to `l_max`.
pub fn db_from_luminance(l_max: f64, l: f64) -> Result<f64> {
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::Domain(format!("maximum luminance must be positive, got {l_max}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Domain(format!("luminance must be positive, got {l}")));
    }
    if l > l_max {
        return Err(Error::Domain(format!("luminance {l} exceeds maximum {l_max}")));
    }
    Ok(10.0 * (l_max / l).log10())
}

/// Inverse of [`db_from_luminance`].
pub fn luminance_from_db(l_max: f64, db: f64) -> Result<f64> {
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::Domain(format!("maximum luminance must be positive, got {l_max}")));
    }
    if !(db >= 0.0 && db.is_finite()) {
        return Err(Error::Domain(format!("attenuation must be non-negative, got {db} dB")));
    }
    Ok(l_max * 10f64.powf(-db / 10.0))
}
