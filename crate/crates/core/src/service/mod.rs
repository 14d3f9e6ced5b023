//! Live, turn-based test sessions: the strategy proposes, a client answers.

mod clock;
mod http;
mod manager;
mod session;
mod transcript;

pub use clock::{Clock, LogicalClock, SystemClock};
pub use http::{router, serve, ApiError};
pub use manager::{CreateRequest, CreateResponse, ResponseRequest, ResultView, SessionManager, StatusView};
pub use session::{
    LocationRef, LocationResult, Phase, Proposal, ResponseOutcome, Session, SessionConfig, SessionResult, SessionStatus,
    Summary, TranscriptEntry,
};
pub use transcript::{read_transcript, RecordedSession, TranscriptEvent, TranscriptWriter};
