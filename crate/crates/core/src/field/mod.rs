//! Visual-field geometry, dB arithmetic, field files and synthetic fields.

mod grid;
mod io;
mod split;
mod synth;
mod units;

pub use grid::{Cell, GridSpec, MASK_24_2};
pub use io::{load_fields, parse_fields, write_fields};
pub use split::{split_dataset, DatasetSplit};
pub use synth::{generate_synthetic_fields, SyntheticConfig};
pub use units::{
    db_from_luminance, luminance_from_db, StimulusScale, DEFAULT_L_MAX, MAX_DB, MIN_DB, N_STIMULI,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth (or reconstructed) sensitivity thresholds, one integer dB
/// value per valid location, in location-index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VisualField {
    values: Vec<u8>,
}

impl VisualField {
    pub fn new(values: Vec<u8>, grid: &GridSpec) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} locations",
                values.len(),
                grid.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v > MAX_DB) {
            return Err(Error::Domain(format!("location {i} has threshold {v} dB > {MAX_DB}")));
        }
        Ok(Self { values })
    }

    pub fn uniform(value: u8, grid: &GridSpec) -> Result<Self> {
        Self::new(vec![value; grid.len()], grid)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn threshold(&self, location: usize) -> Result<u8> {
        self.values.get(location).copied().ok_or(Error::InvalidLocation(location))
    }
}
