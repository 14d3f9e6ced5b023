//! One live test as a turn-based state machine.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::clock::Clock;
use crate::episode::{Action, Progress, TestRun};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::net::QNetwork;
use crate::rng::{rng_from, Rng, Stream};
use crate::strategy::{Strategy, StrategyKind};
use crate::zest::{ZestConfig, ZestPrior};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: StrategyKind,
    pub sigma_stop: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { strategy: StrategyKind::Random, sigma_stop: 2.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingResponse,
    ChoosingLocation,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationRef {
    pub index: usize,
    pub row: usize,
    pub col: usize,
}

impl LocationRef {
    fn new(grid: &GridSpec, index: usize) -> Result<Self> {
        let c = grid.cell(index)?;
        Ok(Self { index, row: c.row, col: c.col })
    }
}

/// The stimulus the client should present next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub turn: u64,
    pub location: LocationRef,
    pub stimulus_db: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: u64,
    pub location: LocationRef,
    pub stimulus_db: u8,
    pub seen: bool,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationResult {
    pub location: LocationRef,
    pub estimate_db: u8,
    pub presentations: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub reconstruction: Vec<u8>,
    pub total_stimuli: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ResponseOutcome {
    /// Same location, next stimulus.
    Next { proposal: Proposal },
    /// A location finished; testing moves on.
    LocationComplete { result: LocationResult, proposal: Proposal },
    SessionComplete { result: LocationResult, summary: Summary },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub phase: Phase,
    pub config_strategy: StrategyKind,
    pub turn: u64,
    pub pending: Option<Proposal>,
    pub tested: usize,
    pub total_stimuli: u32,
}

/// Partial or final reconstruction. Untested locations are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub phase: Phase,
    pub tested: usize,
    pub total_stimuli: u32,
    pub reconstruction: Vec<Option<u8>>,
    pub per_location_stimuli: Vec<u32>,
    pub transcript: Vec<TranscriptEntry>,
}

pub struct Session {
    config: SessionConfig,
    strategy: Strategy,
    prior: Arc<ZestPrior>,
    run: TestRun,
    rng: Rng,
    clock: Arc<dyn Clock>,
    phase: Phase,
    turn: u64,
    transcript: Vec<TranscriptEntry>,
    last: Option<(u64, ResponseOutcome)>,
}

impl Session {
    /// Opens a session and returns its first proposal. `net` is required
    /// for the learned strategy.
    pub fn new(
        config: SessionConfig,
        net: Option<Arc<QNetwork<f32>>>,
        prior: Arc<ZestPrior>,
        clock: Arc<dyn Clock>,
    ) -> Result<(Self, Proposal)> {
        let strategy = match (config.strategy, net) {
            (StrategyKind::Rlperi, Some(net)) => Strategy::Rlperi(net),
            (StrategyKind::Rlperi, None) => {
                return Err(Error::Config("the rlperi strategy needs a loaded checkpoint".into()))
            }
            (kind, _) => Strategy::baseline(kind)?,
        };
        let zest = ZestConfig::with_sigma_stop(config.sigma_stop);
        let run = TestRun::new(GridSpec::shared(), prior.clone(), zest)?;
        let mut s = Self {
            config,
            strategy,
            prior,
            run,
            rng: rng_from(config.seed, Stream::Strategy, 0),
            clock,
            phase: Phase::ChoosingLocation,
            turn: 0,
            transcript: Vec::new(),
            last: None,
        };
        let p = s.choose_next()?;
        Ok((s, p))
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn proposal(&self) -> Result<Option<Proposal>> {
        match self.run.pending() {
            Some(a) if self.phase == Phase::AwaitingResponse => Ok(Some(Proposal {
                turn: self.turn,
                location: LocationRef::new(self.run.state().grid(), a.location)?,
                stimulus_db: a.stimulus,
            })),
            _ => Ok(None),
        }
    }

    fn choose_next(&mut self) -> Result<Proposal> {
        self.phase = Phase::ChoosingLocation;
        let action: Action = self.strategy.choose(self.run.state(), &mut self.rng, &self.prior)?;
        self.run.begin(action)?;
        self.phase = Phase::AwaitingResponse;
        Ok(self.proposal()?.expect("a stimulus was just opened"))
    }

    /// Records the answer to the pending stimulus. With `turn`, a repeat of
    /// the previous call returns the previous outcome unchanged.
    pub fn submit(&mut self, seen: bool, turn: Option<u64>) -> Result<ResponseOutcome> {
        if let (Some(t), Some((last_turn, outcome))) = (turn, &self.last) {
            if t == *last_turn {
                return Ok(outcome.clone());
            }
        }
        if self.phase != Phase::AwaitingResponse {
            return Err(Error::Protocol(format!("session is {:?}; no response expected", self.phase)));
        }
        if let Some(t) = turn {
            if t != self.turn {
                return Err(Error::Protocol(format!("response for turn {t}, but turn {} is pending", self.turn)));
            }
        }
        let pending = self.run.pending().expect("awaiting a response");
        let location = LocationRef::new(self.run.state().grid(), pending.location)?;
        let progress = self.run.respond(seen)?;
        self.transcript.push(TranscriptEntry {
            turn: self.turn,
            location,
            stimulus_db: pending.stimulus,
            seen,
            timestamp_ms: self.clock.now_ms(),
        });
        let answered = self.turn;
        self.turn += 1;
        let outcome = match progress {
            Progress::Continue(_) => ResponseOutcome::Next { proposal: self.proposal()?.expect("same location") },
            Progress::Done(rec) => {
                let result = LocationResult {
                    location: LocationRef::new(self.run.state().grid(), rec.location)?,
                    estimate_db: rec.estimate,
                    presentations: rec.presentations,
                };
                if self.run.is_complete() {
                    self.phase = Phase::Complete;
                    let report = self.run.report(None)?;
                    ResponseOutcome::SessionComplete {
                        result,
                        summary: Summary { reconstruction: report.reconstruction, total_stimuli: report.total_stimuli },
                    }
                } else {
                    ResponseOutcome::LocationComplete { result, proposal: self.choose_next()? }
                }
            }
        };
        self.last = Some((answered, outcome.clone()));
        Ok(outcome)
    }

    pub fn status(&self) -> Result<SessionStatus> {
        Ok(SessionStatus {
            phase: self.phase,
            config_strategy: self.config.strategy,
            turn: self.turn,
            pending: self.proposal()?,
            tested: self.run.state().tested_count(),
            total_stimuli: self.run.state().total_presentations(),
        })
    }

    pub fn result(&self) -> Result<SessionResult> {
        let report = self.run.report(None)?;
        let state = self.run.state();
        Ok(SessionResult {
            phase: self.phase,
            tested: state.tested_count(),
            total_stimuli: report.total_stimuli,
            reconstruction: (0..state.grid().len()).map(|l| state.prediction(l)).collect(),
            per_location_stimuli: report.per_location_stimuli,
            transcript: self.transcript.clone(),
        })
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::clock::LogicalClock;
    use proptest::prelude::*;

    fn open(seed: u64) -> (Session, Proposal) {
        let cfg = SessionConfig { seed, ..SessionConfig::default() };
        Session::new(cfg, None, Arc::new(ZestPrior::uniform(54)), Arc::new(LogicalClock::default())).unwrap()
    }

    fn answer(p: &Proposal, threshold: u8) -> bool {
        p.stimulus_db <= threshold
    }

    fn finish(s: &mut Session, first: Proposal) -> Summary {
        let mut p = first;
        loop {
            match s.submit(answer(&p, 25), Some(p.turn)).unwrap() {
                ResponseOutcome::Next { proposal } | ResponseOutcome::LocationComplete { proposal, .. } => p = proposal,
                ResponseOutcome::SessionComplete { summary, .. } => return summary,
            }
        }
    }

    #[test]
    fn fresh_session() {
        let (s, p) = open(1);
        assert_eq!(p.turn, 0);
        assert!(p.stimulus_db <= 40);
        let r = s.result().unwrap();
        assert_eq!((r.tested, r.total_stimuli, r.transcript.len()), (0, 0, 0));
        assert!(r.reconstruction.iter().all(|v| v.is_none()));
        assert_eq!(open(1).1, p);
    }

    #[test]
    fn complete_run_and_late_response() {
        let (mut s, p) = open(2);
        let summary = finish(&mut s, p);
        assert_eq!(s.phase(), Phase::Complete);
        assert_eq!(summary.reconstruction.len(), 54);
        assert_eq!(s.transcript().len() as u32, summary.total_stimuli);
        assert!(matches!(s.submit(true, None), Err(Error::Protocol(_))));
        let r = s.result().unwrap();
        assert_eq!(r.tested, 54);
        assert_eq!(r.per_location_stimuli.iter().sum::<u32>(), r.total_stimuli);
    }

    #[test]
    fn retries_are_idempotent() {
        let (mut s, p) = open(3);
        let a = s.submit(true, Some(p.turn)).unwrap();
        let b = s.submit(true, Some(p.turn)).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.transcript().len(), 1);
        assert!(matches!(s.submit(true, Some(p.turn + 5)), Err(Error::Protocol(_))));
    }

    #[test]
    fn rlperi_needs_a_network() {
        let cfg = SessionConfig { strategy: StrategyKind::Rlperi, ..SessionConfig::default() };
        let r = Session::new(cfg, None, Arc::new(ZestPrior::uniform(54)), Arc::new(LogicalClock::default()));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn transcripts_are_byte_identical() {
        let run = || {
            let (mut s, p) = open(4);
            finish(&mut s, p);
            serde_json::to_string(s.transcript()).unwrap()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn only_legal_transitions(calls in proptest::collection::vec((any::<bool>(), 0u8..4), 1..400)) {
            let (mut s, mut p) = open(5);
            for (seen, kind) in calls {
                let before = s.phase();
                let turn = match kind {
                    0 => None,
                    1 => Some(p.turn),
                    2 => Some(p.turn + 1),
                    _ => Some(p.turn.wrapping_sub(1)),
                };
                let pending_turn = s.status().unwrap().turn;
                match s.submit(seen, turn) {
                    Ok(out) => {
                        prop_assert!(before == Phase::AwaitingResponse || turn == Some(pending_turn.wrapping_sub(1)));
                        match out {
                            ResponseOutcome::Next { proposal } | ResponseOutcome::LocationComplete { proposal, .. } => {
                                prop_assert_eq!(s.phase(), Phase::AwaitingResponse);
                                p = proposal;
                            }
                            ResponseOutcome::SessionComplete { .. } => prop_assert_eq!(s.phase(), Phase::Complete),
                        }
                    }
                    Err(e) => {
                        prop_assert!(matches!(e, Error::Protocol(_)));
                        prop_assert_eq!(s.phase(), before);
                        prop_assert_eq!(s.status().unwrap().turn, pending_turn);
                    }
                }
                prop_assert!(s.phase() != Phase::ChoosingLocation);
                let st = s.status().unwrap();
                prop_assert_eq!(st.phase == Phase::Complete, st.tested == 54);
                prop_assert_eq!(st.pending.is_some(), st.phase == Phase::AwaitingResponse);
                prop_assert_eq!(s.transcript().len() as u32, st.total_stimuli);
            }
        }
    }
}
