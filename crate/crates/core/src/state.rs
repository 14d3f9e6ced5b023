//! The test state: paired seen / not-seen count volumes.
//!
//! Each volume is `N_STIMULI × rows × cols`. Entry `[i, r, c]` counts the
//! responses to an `i` dB stimulus at cell `(r, c)`. Cells outside the test
//! pattern hold [`MASKED`] in every channel.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{GridSpec, VisualField, N_STIMULI};

/// Fill value of cells outside the test pattern.
pub const MASKED: i32 = -2;
/// Prediction placeholder for untested locations.
pub const UNTESTED: i16 = -1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestState {
    grid: Arc<GridSpec>,
    seen: Vec<i32>,
    not_seen: Vec<i32>,
    pred: Vec<i16>,
    presentations: u32,
    tested: usize,
}

/// One stimulus presentation and its outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    pub location: usize,
    pub stimulus: u8,
    pub seen: bool,
}

impl TestState {
    pub fn new(grid: Arc<GridSpec>) -> Self {
        let area = grid.area();
        let mut volume = vec![0; N_STIMULI * area];
        for (offset, &valid) in grid.mask().iter().enumerate() {
            if !valid {
                for ch in 0..N_STIMULI {
                    volume[ch * area + offset] = MASKED;
                }
            }
        }
        let pred = vec![UNTESTED; grid.len()];
        Self { grid, seen: volume.clone(), not_seen: volume, pred, presentations: 0, tested: 0 }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn grid_handle(&self) -> &Arc<GridSpec> {
        &self.grid
    }

    fn check(&self, location: usize, stimulus: u8) -> Result<usize> {
        if location >= self.grid.len() {
            return Err(Error::InvalidLocation(location));
        }
        if stimulus as usize >= N_STIMULI {
            return Err(Error::InvalidStimulus(stimulus as i32));
        }
        Ok(stimulus as usize * self.grid.area() + self.grid.offset(location))
    }

    pub fn record_response(&mut self, location: usize, stimulus: u8, seen: bool) -> Result<()> {
        let idx = self.check(location, stimulus)?;
        if seen {
            self.seen[idx] += 1;
        } else {
            self.not_seen[idx] += 1;
        }
        self.presentations += 1;
        Ok(())
    }

    pub fn apply(&mut self, p: Presentation) -> Result<()> {
        self.record_response(p.location, p.stimulus, p.seen)
    }

    pub fn mark_tested(&mut self, location: usize, estimate: u8) -> Result<()> {
        if location >= self.grid.len() {
            return Err(Error::InvalidLocation(location));
        }
        if estimate as usize >= N_STIMULI {
            return Err(Error::InvalidStimulus(estimate as i32));
        }
        if self.pred[location] != UNTESTED {
            return Err(Error::AlreadyTested(location));
        }
        self.pred[location] = estimate as i16;
        self.tested += 1;
        Ok(())
    }

    pub fn is_tested(&self, location: usize) -> bool {
        self.pred.get(location).is_some_and(|&p| p != UNTESTED)
    }

    pub fn untested(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.pred.len()).filter(|&l| self.pred[l] == UNTESTED)
    }

    pub fn tested_count(&self) -> usize {
        self.tested
    }

    pub fn is_terminal(&self) -> bool {
        self.tested == self.grid.len()
    }

    /// Estimated threshold per location, [`UNTESTED`] where not yet tested.
    pub fn predictions(&self) -> &[i16] {
        &self.pred
    }

    pub fn prediction(&self, location: usize) -> Option<u8> {
        self.pred.get(location).filter(|&&p| p != UNTESTED).map(|&p| p as u8)
    }

    pub fn seen_counts(&self) -> &[i32] {
        &self.seen
    }

    pub fn not_seen_counts(&self) -> &[i32] {
        &self.not_seen
    }

    pub fn count(&self, seen: bool, stimulus: u8, location: usize) -> Result<i32> {
        let idx = self.check(location, stimulus)?;
        Ok(if seen { self.seen[idx] } else { self.not_seen[idx] })
    }

    pub fn total_presentations(&self) -> u32 {
        self.presentations
    }

    /// Sum of both volumes over valid cells; equals the number of recorded
    /// presentations.
    pub fn count_sum(&self) -> i64 {
        let area = self.grid.area();
        let mask = self.grid.mask();
        self.seen
            .iter()
            .zip(&self.not_seen)
            .enumerate()
            .filter(|(i, _)| mask[i % area])
            .map(|(_, (&a, &b))| (a + b) as i64)
            .sum()
    }

    /// The `rows × cols` prediction map: masked cells [`MASKED`], untested
    /// cells [`UNTESTED`], estimates elsewhere.
    pub fn prediction_map(&self) -> Vec<i32> {
        let mut map = vec![MASKED; self.grid.area()];
        for (l, &p) in self.pred.iter().enumerate() {
            map[self.grid.offset(l)] = p as i32;
        }
        map
    }

    /// Shaping potential: negative mean squared error of the tested
    /// locations against `truth`, zero when nothing has been tested.
    pub fn potential(&self, truth: &VisualField) -> f64 {
        if self.tested == 0 {
            return 0.0;
        }
        let sse: f64 = self
            .pred
            .iter()
            .zip(truth.values())
            .filter(|(&p, _)| p != UNTESTED)
            .map(|(&p, &t)| (p as f64 - t as f64).powi(2))
            .sum();
        -sse / self.tested as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Cell;
    use proptest::prelude::*;

    fn fresh() -> TestState {
        TestState::new(GridSpec::shared())
    }

    fn masked_intact(s: &TestState) -> bool {
        let g = s.grid();
        (0..N_STIMULI * g.area()).filter(|i| !g.mask()[i % g.area()]).all(|i| {
            s.seen_counts()[i] == MASKED && s.not_seen_counts()[i] == MASKED
        })
    }

    #[test]
    fn initial_state() {
        let s = fresh();
        assert_eq!(s.count_sum(), 0);
        assert!(masked_intact(&s));
        assert_eq!(s.seen_counts()[0], MASKED);
        assert_eq!(s.untested().count(), 54);
        let truth = VisualField::uniform(20, s.grid()).unwrap();
        assert_eq!(s.potential(&truth), 0.0);
    }

    #[test]
    fn record_increments_one_entry() {
        let mut s = fresh();
        let loc = s.grid().location(Cell { row: 3, col: 4 }).unwrap();
        s.record_response(loc, 25, true).unwrap();
        assert_eq!(s.seen_counts()[25 * 72 + 3 * 9 + 4], 1);
        assert_eq!(s.count_sum(), 1);
        s.record_response(loc, 25, false).unwrap();
        s.record_response(loc, 25, false).unwrap();
        assert_eq!(s.not_seen_counts()[25 * 72 + 3 * 9 + 4], 2);
        assert_eq!(s.count(true, 25, loc).unwrap(), 1);
        assert!(s.record_response(54, 0, true).is_err());
        assert!(s.record_response(0, 41, true).is_err());
    }

    #[test]
    fn marking() {
        let mut s = fresh();
        s.mark_tested(5, 28).unwrap();
        assert_eq!(s.tested_count(), 1);
        assert_eq!(s.prediction(5), Some(28));
        assert!(matches!(s.mark_tested(5, 1), Err(Error::AlreadyTested(5))));
        for l in (0..54).filter(|&l| l != 5) {
            assert!(!s.is_terminal());
            s.mark_tested(l, 0).unwrap();
        }
        assert!(s.is_terminal());
    }

    #[test]
    fn potential_examples() {
        let mut s = fresh();
        let truth = VisualField::uniform(30, s.grid()).unwrap();
        s.mark_tested(0, 28).unwrap();
        assert_eq!(s.potential(&truth), -4.0);
        let mut s = fresh();
        s.mark_tested(0, 30).unwrap();
        s.mark_tested(7, 30).unwrap();
        assert_eq!(s.potential(&truth), 0.0);
    }

    #[test]
    fn prediction_map_layout() {
        let mut s = fresh();
        s.mark_tested(0, 12).unwrap();
        let m = s.prediction_map();
        assert_eq!(m[0], MASKED);
        assert_eq!(m[3], 12);
        assert_eq!(m[4], UNTESTED as i32);
    }

    proptest! {
        #[test]
        fn conservation_under_random_interleavings(
            ops in proptest::collection::vec((0usize..54, 0u8..41, any::<bool>(), any::<bool>()), 0..300)
        ) {
            let mut s = fresh();
            let truth = VisualField::uniform(20, s.grid()).unwrap();
            let mut n = 0;
            for (loc, stim, seen, mark) in ops {
                if mark {
                    let _ = s.mark_tested(loc, stim);
                } else {
                    s.record_response(loc, stim, seen).unwrap();
                    n += 1;
                }
                prop_assert!(s.potential(&truth) <= 0.0);
            }
            prop_assert_eq!(s.count_sum(), n);
            prop_assert_eq!(s.total_presentations() as i64, n);
            prop_assert!(masked_intact(&s));
            for l in 0..54 {
                prop_assert_eq!(s.is_tested(l), s.predictions()[l] != UNTESTED);
            }
        }
    }
}
