//! Registry of live sessions. Each session sits behind its own lock, so
//! calls on one session are serialized while different sessions proceed
//! in parallel.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::clock::{Clock, SystemClock};
use super::session::{Proposal, ResponseOutcome, Session, SessionConfig, SessionResult, SessionStatus};
use super::transcript::{TranscriptEvent, TranscriptWriter};
use crate::error::{Error, Result};
use crate::net::QNetwork;
use crate::strategy::StrategyKind;
use crate::zest::ZestPrior;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    pub strategy: Option<StrategyKind>,
    pub sigma_stop: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub id: String,
    pub config: SessionConfig,
    pub proposal: Proposal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRequest {
    pub seen: bool,
    #[serde(default)]
    pub turn: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusView {
    pub id: String,
    pub config: SessionConfig,
    #[serde(flatten)]
    pub status: SessionStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultView {
    pub id: String,
    #[serde(flatten)]
    pub result: SessionResult,
}

enum IdSource {
    Random,
    Sequential(AtomicU64),
}

struct Entry {
    session: Session,
    writer: Option<TranscriptWriter>,
}

pub struct SessionManager {
    net: Option<Arc<QNetwork<f32>>>,
    prior: Arc<ZestPrior>,
    defaults: SessionConfig,
    clock: Arc<dyn Clock>,
    ids: IdSource,
    transcript_dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
}

impl SessionManager {
    pub fn new(net: Option<Arc<QNetwork<f32>>>, prior: Arc<ZestPrior>, defaults: SessionConfig) -> Self {
        Self {
            net,
            prior,
            defaults,
            clock: Arc::new(SystemClock),
            ids: IdSource::Random,
            transcript_dir: None,
            sessions: RwLock::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Ids become `00000000-0000-0000-0000-000000000001`, `...02`, and so on.
    pub fn with_sequential_ids(mut self) -> Self {
        self.ids = IdSource::Sequential(AtomicU64::new(1));
        self
    }

    pub fn with_transcripts(mut self, dir: impl Into<PathBuf>) -> Self {
        self.transcript_dir = Some(dir.into());
        self
    }

    pub fn prior(&self) -> &Arc<ZestPrior> {
        &self.prior
    }

    pub fn network(&self) -> Option<&Arc<QNetwork<f32>>> {
        self.net.as_ref()
    }

    fn next_id(&self) -> Uuid {
        match &self.ids {
            IdSource::Random => Uuid::new_v4(),
            IdSource::Sequential(n) => Uuid::from_u128(n.fetch_add(1, Ordering::Relaxed) as u128),
        }
    }

    pub fn create(&self, req: CreateRequest) -> Result<CreateResponse> {
        let uuid = self.next_id();
        let id = uuid.to_string();
        let config = SessionConfig {
            strategy: req.strategy.unwrap_or(self.defaults.strategy),
            sigma_stop: req.sigma_stop.unwrap_or(self.defaults.sigma_stop),
            // Unseeded sessions still get a recorded seed so they replay.
            seed: req.seed.unwrap_or_else(|| uuid.as_u64_pair().0),
        };
        if !(config.sigma_stop > 0.0 && config.sigma_stop.is_finite()) {
            return Err(Error::Config(format!("sigma_stop must be positive, got {}", config.sigma_stop)));
        }
        let (session, proposal) = Session::new(config, self.net.clone(), self.prior.clone(), self.clock.clone())?;
        let writer = match &self.transcript_dir {
            Some(dir) => {
                let mut w = TranscriptWriter::create(dir, &id)?;
                w.append(&TranscriptEvent::Created { id: id.clone(), config, timestamp_ms: self.clock.now_ms() })?;
                Some(w)
            }
            None => None,
        };
        let entry = Arc::new(Mutex::new(Entry { session, writer }));
        self.sessions.write().expect("session map poisoned").insert(id.clone(), entry);
        Ok(CreateResponse { id, config, proposal })
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>> {
        self.sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| Error::NotFound(id.to_string()))
    }

    pub fn submit(&self, id: &str, req: ResponseRequest) -> Result<ResponseOutcome> {
        let entry = self.entry(id)?;
        let mut guard = entry.lock().expect("session lock poisoned");
        let Entry { session, writer } = &mut *guard;
        let before = session.transcript().len();
        let outcome = session.submit(req.seen, req.turn)?;
        if let Some(w) = writer {
            for e in &session.transcript()[before..] {
                w.append(&TranscriptEvent::Response(*e))?;
            }
            if let (ResponseOutcome::SessionComplete { summary, .. }, true) = (&outcome, session.transcript().len() > before) {
                w.append(&TranscriptEvent::Complete { summary: summary.clone() })?;
            }
        }
        Ok(outcome)
    }

    pub fn status(&self, id: &str) -> Result<StatusView> {
        let entry = self.entry(id)?;
        let guard = entry.lock().expect("session lock poisoned");
        Ok(StatusView { id: id.to_string(), config: *guard.session.config(), status: guard.session.status()? })
    }

    pub fn result(&self, id: &str) -> Result<ResultView> {
        let entry = self.entry(id)?;
        let guard = entry.lock().expect("session lock poisoned");
        Ok(ResultView { id: id.to_string(), result: guard.session.result()? })
    }

    pub fn transcript_path(&self, id: &str) -> Result<Option<PathBuf>> {
        let entry = self.entry(id)?;
        let guard = entry.lock().expect("session lock poisoned");
        Ok(guard.writer.as_ref().map(|w| w.path().to_path_buf()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
