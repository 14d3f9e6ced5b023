pub mod episode;
pub mod error;
pub mod eval;
pub mod field;
pub mod net;
pub mod patient;
pub mod rng;
pub mod service;
pub mod state;
pub mod strategy;
pub mod trainer;
mod stats;
pub mod zest;

pub use error::{Error, Result};
