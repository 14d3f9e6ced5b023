//! Append-only JSONL transcripts: one `created` line, one `response` line
//! per presentation, one `complete` line at the end.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::session::{SessionConfig, Summary, TranscriptEntry};
use crate::episode::EpisodeReport;
use crate::error::{Error, Result};
use crate::eval::replay_responses;
use crate::net::QNetwork;
use crate::strategy::{Strategy, StrategyKind};
use crate::zest::{ZestConfig, ZestPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Created { id: String, config: SessionConfig, timestamp_ms: u64 },
    Response(TranscriptEntry),
    Complete { summary: Summary },
}

pub struct TranscriptWriter {
    file: File,
    path: PathBuf,
}

impl TranscriptWriter {
    pub fn create(dir: &Path, id: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{id}.jsonl"));
        let file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        Ok(Self { file, path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, event: &TranscriptEvent) -> Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedSession {
    pub id: String,
    pub config: SessionConfig,
    pub entries: Vec<TranscriptEntry>,
    pub summary: Option<Summary>,
}

impl RecordedSession {
    pub fn responses(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.seen).collect()
    }

    /// Re-runs the session offline from its recorded answers.
    pub fn replay(&self, net: Option<Arc<QNetwork<f32>>>, prior: &Arc<ZestPrior>) -> Result<EpisodeReport> {
        let strategy = match (self.config.strategy, net) {
            (StrategyKind::Rlperi, Some(n)) => Strategy::Rlperi(n),
            (StrategyKind::Rlperi, None) => return Err(Error::Config("replaying rlperi needs the checkpoint".into())),
            (k, _) => Strategy::baseline(k)?,
        };
        let zest = ZestConfig::with_sigma_stop(self.config.sigma_stop);
        replay_responses(&strategy, prior, &zest, self.config.seed, &self.responses(), None)
    }
}

pub fn read_transcript(path: impl AsRef<Path>) -> Result<RecordedSession> {
    let reader = BufReader::new(File::open(path)?);
    let mut head = None;
    let mut entries = Vec::new();
    let mut summary = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line)? {
            TranscriptEvent::Created { id, config, .. } if i == 0 => head = Some((id, config)),
            TranscriptEvent::Created { .. } => return Err(Error::Protocol(format!("line {}: duplicate created event", i + 1))),
            TranscriptEvent::Response(e) => entries.push(e),
            TranscriptEvent::Complete { summary: s } => summary = Some(s),
        }
    }
    let (id, config) = head.ok_or_else(|| Error::Protocol("transcript does not start with a created event".into()))?;
    Ok(RecordedSession { id, config, entries, summary })
}
