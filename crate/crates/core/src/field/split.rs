use rand::seq::SliceRandom;

use super::VisualField;
use crate::error::{Error, Result};
use crate::rng::{rng_from, Stream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<VisualField>,
    pub test: Vec<VisualField>,
    pub validation: Vec<VisualField>,
}

/// Seeded 60/20/20 partition. `train = floor(0.6 n)`; the remainder is
/// halved, test taking the floor and validation the rest.
pub fn split_dataset(fields: &[VisualField], seed: u64) -> Result<DatasetSplit> {
    let n = fields.len();
    if n < 5 {
        return Err(Error::Config(format!("need at least 5 fields to split, got {n}")));
    }
    let n_train = n * 6 / 10;
    let n_test = (n - n_train) / 2;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(seed, Stream::Shuffle, 0));
    let pick = |idx: &[usize]| idx.iter().map(|&i| fields[i].clone()).collect::<Vec<_>>();
    Ok(DatasetSplit {
        train: pick(&order[..n_train]),
        test: pick(&order[n_train..n_train + n_test]),
        validation: pick(&order[n_train + n_test..]),
    })
}
