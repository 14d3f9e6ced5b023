//! C ABI over `rlperi`.
//!
//! Every fallible call returns an [`RlperiStatus`]; on failure the message
//! is available from [`rlperi_last_error`] on the same thread. Handles are
//! opaque pointers created by `*_new` and released by the matching `*_free`.
//! Strings returned as `char *` are owned by the caller and must be released
//! with [`rlperi_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use rlperi::field::{db_from_luminance, luminance_from_db, GridSpec, VisualField, N_STIMULI};
use rlperi::net::load_checkpoint;
use rlperi::patient::FosPatient;
use rlperi::rng::{rng_from, Stream};
use rlperi::service::{LogicalClock, Proposal, ResponseOutcome, Session, SessionConfig};
use rlperi::strategy::StrategyKind;
use rlperi::zest::{ZestConfig, ZestEstimator, ZestPrior};
use rlperi::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlperiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Protocol = 4,
    Io = 5,
    Checkpoint = 6,
    Numerical = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> RlperiStatus {
    match e {
        Error::Domain(_) | Error::InvalidLocation(_) | Error::InvalidStimulus(_) => RlperiStatus::Domain,
        Error::Protocol(_) | Error::AlreadyTested(_) | Error::NotFound(_) => RlperiStatus::Protocol,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => RlperiStatus::Io,
        Error::Checkpoint(_) | Error::Shape(_) => RlperiStatus::Checkpoint,
        Error::Numerical(_) | Error::Diverged(_) => RlperiStatus::Numerical,
        Error::Config(_) => RlperiStatus::InvalidArgument,
    }
}

struct Fail(RlperiStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RlperiStatus::InvalidArgument, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RlperiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RlperiStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RlperiStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail(RlperiStatus::NullPointer, "null output pointer".into()))
}

unsafe fn handle<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail(RlperiStatus::NullPointer, "null handle".into()))
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| invalid("string is not UTF-8"))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next `rlperi_*` call on the same thread.
#[no_mangle]
pub extern "C" fn rlperi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn rlperi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rlperi_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `10 log10(l_max / l)`.
///
/// # Safety
/// `db` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_db_from_luminance(l_max: f64, l: f64, db: *mut f64) -> RlperiStatus {
    guard(|| {
        *out(db)? = db_from_luminance(l_max, l)?;
        Ok(())
    })
}

/// `l_max · 10^(-db / 10)`.
///
/// # Safety
/// `l` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_luminance_from_db(l_max: f64, db: f64, l: *mut f64) -> RlperiStatus {
    guard(|| {
        *out(l)? = luminance_from_db(l_max, db)?;
        Ok(())
    })
}

/// Probability that a stimulus of `stimulus_db` is seen at a location with
/// threshold `threshold_db`, under a Gaussian frequency-of-seeing curve.
///
/// # Safety
/// `p` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_p_seen(threshold_db: u8, stimulus_db: f64, sigma_fos: f64, p: *mut f64) -> RlperiStatus {
    guard(|| {
        let field = VisualField::uniform(threshold_db, GridSpec::standard())?;
        let patient = FosPatient::new(field, sigma_fos, rng_from(0, Stream::Patient, 0))?;
        *out(p)? = patient.p_seen(0, stimulus_db)?;
        Ok(())
    })
}

/// ZEST estimator for one location.
pub struct RlperiZest {
    estimator: ZestEstimator,
    config: ZestConfig,
}

/// Starts a ZEST run from `prior` (`len` must be 41; it is normalized).
///
/// # Safety
/// `prior` must point to `len` doubles and `zest` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_new(
    prior: *const f64,
    len: usize,
    sigma_stop: f64,
    sigma_lik: f64,
    max_presentations: u32,
    zest: *mut *mut RlperiZest,
) -> RlperiStatus {
    guard(|| {
        let slot = out(zest)?;
        if prior.is_null() {
            return Err(Fail(RlperiStatus::NullPointer, "null prior".into()));
        }
        if len != N_STIMULI {
            return Err(invalid(format!("prior has {len} entries, expected {N_STIMULI}")));
        }
        let config = ZestConfig { sigma_stop, sigma_lik, max_presentations, ..ZestConfig::default() };
        config.validate()?;
        let mut pdf = [0.0; N_STIMULI];
        pdf.copy_from_slice(std::slice::from_raw_parts(prior, len));
        let sum: f64 = pdf.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(invalid("prior must have positive finite mass"));
        }
        pdf.iter_mut().for_each(|p| *p /= sum);
        let estimator = ZestEstimator::new(&pdf)?;
        *slot = Box::into_raw(Box::new(RlperiZest { estimator, config }));
        Ok(())
    })
}

/// Folds one response in; `done` reports whether testing should stop.
///
/// # Safety
/// `zest` must be a live handle and `done` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_update(zest: *mut RlperiZest, seen: bool, presented_db: u8, done: *mut bool) -> RlperiStatus {
    guard(|| {
        let z = handle(zest)?;
        let done = out(done)?;
        if presented_db as usize >= N_STIMULI {
            return Err(Error::InvalidStimulus(presented_db as i32).into());
        }
        *done = z.estimator.update(seen, presented_db, &z.config)?;
        Ok(())
    })
}

/// Current estimate (pdf mode), which is also the next stimulus to present.
///
/// # Safety
/// `zest` must be a live handle and `estimate` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_estimate(zest: *mut RlperiZest, estimate: *mut u8) -> RlperiStatus {
    guard(|| {
        *out(estimate)? = handle(zest)?.estimator.estimate();
        Ok(())
    })
}

/// Posterior standard deviation, dB.
///
/// # Safety
/// `zest` must be a live handle and `std` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_std(zest: *mut RlperiZest, std: *mut f64) -> RlperiStatus {
    guard(|| {
        *out(std)? = handle(zest)?.estimator.std();
        Ok(())
    })
}

/// Copies the posterior into `pdf` (`len` must be 41).
///
/// # Safety
/// `zest` must be a live handle and `pdf` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_pdf(zest: *mut RlperiZest, pdf: *mut f64, len: usize) -> RlperiStatus {
    guard(|| {
        let z = handle(zest)?;
        if pdf.is_null() {
            return Err(Fail(RlperiStatus::NullPointer, "null pdf buffer".into()));
        }
        if len != N_STIMULI {
            return Err(invalid(format!("buffer has {len} entries, expected {N_STIMULI}")));
        }
        std::slice::from_raw_parts_mut(pdf, len).copy_from_slice(z.estimator.pdf());
        Ok(())
    })
}

/// # Safety
/// `zest` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlperi_zest_free(zest: *mut RlperiZest) {
    if !zest.is_null() {
        drop(Box::from_raw(zest));
    }
}

/// A stimulus to present.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RlperiProposal {
    pub turn: u64,
    pub location: u32,
    pub row: u32,
    pub col: u32,
    pub stimulus_db: u8,
}

impl From<Proposal> for RlperiProposal {
    fn from(p: Proposal) -> Self {
        Self {
            turn: p.turn,
            location: p.location.index as u32,
            row: p.location.row as u32,
            col: p.location.col as u32,
            stimulus_db: p.stimulus_db,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlperiStep {
    /// Same location, next stimulus in `proposal`.
    Next = 0,
    /// `finished_location` is done; `proposal` starts the next one.
    LocationComplete = 1,
    /// All 54 locations done; `proposal` is unset.
    SessionComplete = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RlperiResponse {
    pub step: RlperiStep,
    pub proposal: RlperiProposal,
    pub finished_location: u32,
    pub estimate_db: u8,
    pub total_stimuli: u32,
}

/// A live test session.
pub struct RlperiSession {
    session: Session,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, Fail> {
    s.parse().map_err(|e: Error| invalid(e.to_string()))
}

/// Opens a session. `strategy` is one of rlperi, random, raster, neighbor.
/// `checkpoint` is required for rlperi; the prior comes from `prior_csv`
/// when given, else from the checkpoint. Either may be null.
///
/// # Safety
/// Strings must be null or NUL-terminated; `session` and `first` must be
/// valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rlperi_session_new(
    strategy: *const c_char,
    sigma_stop: f64,
    seed: u64,
    checkpoint: *const c_char,
    prior_csv: *const c_char,
    session: *mut *mut RlperiSession,
    first: *mut RlperiProposal,
) -> RlperiStatus {
    guard(|| {
        let slot = out(session)?;
        let first = out(first)?;
        let kind = parse_strategy(opt_str(strategy)?.ok_or(Fail(RlperiStatus::NullPointer, "null strategy".into()))?)?;
        if !(sigma_stop > 0.0 && sigma_stop.is_finite()) {
            return Err(invalid(format!("sigma_stop must be positive, got {sigma_stop}")));
        }
        let ckpt = opt_str(checkpoint)?.map(|p| load_checkpoint(Path::new(p))).transpose()?;
        let prior = match (opt_str(prior_csv)?, ckpt.as_ref().and_then(|c| c.prior.clone())) {
            (Some(p), _) => ZestPrior::load(p)?,
            (None, Some(p)) => p,
            (None, None) => return Err(invalid("no prior: pass a prior CSV or a checkpoint that embeds one")),
        };
        let config = SessionConfig { strategy: kind, sigma_stop, seed };
        let (s, p) = Session::new(config, ckpt.map(|c| Arc::new(c.net)), Arc::new(prior), Arc::new(LogicalClock::default()))?;
        *first = p.into();
        *slot = Box::into_raw(Box::new(RlperiSession { session: s }));
        Ok(())
    })
}

/// Answers the pending stimulus.
///
/// # Safety
/// `session` must be a live handle and `response` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_session_respond(
    session: *mut RlperiSession,
    seen: bool,
    response: *mut RlperiResponse,
) -> RlperiStatus {
    guard(|| {
        let s = handle(session)?;
        let response = out(response)?;
        let outcome = s.session.submit(seen, None)?;
        let total = s.session.transcript().len() as u32;
        *response = match outcome {
            ResponseOutcome::Next { proposal } => RlperiResponse {
                step: RlperiStep::Next,
                proposal: proposal.into(),
                finished_location: 0,
                estimate_db: 0,
                total_stimuli: total,
            },
            ResponseOutcome::LocationComplete { result, proposal } => RlperiResponse {
                step: RlperiStep::LocationComplete,
                proposal: proposal.into(),
                finished_location: result.location.index as u32,
                estimate_db: result.estimate_db,
                total_stimuli: total,
            },
            ResponseOutcome::SessionComplete { result, summary } => RlperiResponse {
                step: RlperiStep::SessionComplete,
                proposal: RlperiProposal::default(),
                finished_location: result.location.index as u32,
                estimate_db: result.estimate_db,
                total_stimuli: summary.total_stimuli,
            },
        };
        Ok(())
    })
}

/// Writes the 54 per-location estimates, -1 where untested.
///
/// # Safety
/// `session` must be a live handle and `values` must point to `len` int16s.
#[no_mangle]
pub unsafe extern "C" fn rlperi_session_reconstruction(
    session: *mut RlperiSession,
    values: *mut i16,
    len: usize,
) -> RlperiStatus {
    guard(|| {
        let s = handle(session)?;
        if values.is_null() {
            return Err(Fail(RlperiStatus::NullPointer, "null buffer".into()));
        }
        let result = s.session.result()?;
        if len != result.reconstruction.len() {
            return Err(invalid(format!("buffer has {len} entries, expected {}", result.reconstruction.len())));
        }
        let dst = std::slice::from_raw_parts_mut(values, len);
        for (d, v) in dst.iter_mut().zip(&result.reconstruction) {
            *d = v.map_or(-1, i16::from);
        }
        Ok(())
    })
}

/// The full result (reconstruction, counts, transcript) as JSON. Free the
/// string with [`rlperi_string_free`].
///
/// # Safety
/// `session` must be a live handle and `json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rlperi_session_result_json(session: *mut RlperiSession, json: *mut *mut c_char) -> RlperiStatus {
    guard(|| {
        let s = handle(session)?;
        let slot = out(json)?;
        let text = serde_json::to_string(&s.session.result()?).map_err(Error::from)?;
        *slot = CString::new(text).map_err(|_| invalid("result contains NUL"))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `session` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rlperi_session_free(session: *mut RlperiSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Null-safe helper for C callers that want an empty handle slot.
#[no_mangle]
pub extern "C" fn rlperi_null_session() -> *mut RlperiSession {
    ptr::null_mut()
}
