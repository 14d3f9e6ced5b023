use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rlperi::field::{generate_synthetic_fields, GridSpec, SyntheticConfig, VisualField};
use rlperi::net::{NetConfig, QNetwork};
use rlperi::patient::{FosPatient, Responder};
use rlperi::rng::{rng_from, Stream};
use rlperi::service::{
    read_transcript, router, LogicalClock, ResponseOutcome, SessionConfig, SessionManager,
};
use rlperi::strategy::StrategyKind;
use rlperi::zest::ZestPrior;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fields() -> Vec<VisualField> {
    generate_synthetic_fields(60, 11, &SyntheticConfig::default(), GridSpec::standard()).unwrap()
}

fn manager() -> SessionManager {
    let prior = Arc::new(ZestPrior::from_fields(&fields(), GridSpec::standard()).unwrap());
    let net = QNetwork::new(NetConfig::reduced(), &mut rng_from(3, Stream::Init, 0)).unwrap();
    SessionManager::new(Some(Arc::new(net)), prior, SessionConfig::default())
        .with_clock(Arc::new(LogicalClock::default()))
        .with_sequential_ids()
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

/// Drives a session over HTTP with a simulated patient; returns its id and
/// the number of answers given.
async fn run_session(app: &axum::Router, create: Value, patient: &mut dyn Responder) -> (String, usize) {
    let (st, created) = call(app, "POST", "/sessions", Some(create)).await;
    assert_eq!(st, StatusCode::CREATED, "{created}");
    let id = created["id"].as_str().unwrap().to_string();
    let mut proposal = created["proposal"].clone();
    let mut answers = 0;
    loop {
        let loc = proposal["location"]["index"].as_u64().unwrap() as usize;
        let stim = proposal["stimulus_db"].as_u64().unwrap() as u8;
        assert_eq!(proposal["turn"].as_u64().unwrap() as usize, answers);
        let seen = patient.respond(loc, stim).unwrap();
        let body = json!({ "seen": seen, "turn": proposal["turn"] });
        let (st, out) = call(app, "POST", &format!("/sessions/{id}/response"), Some(body)).await;
        assert_eq!(st, StatusCode::OK, "{out}");
        answers += 1;
        match out["status"].as_str().unwrap() {
            "next" | "location_complete" => proposal = out["proposal"].clone(),
            "session_complete" => {
                assert_eq!(out["summary"]["reconstruction"].as_array().unwrap().len(), 54);
                assert_eq!(out["summary"]["total_stimuli"].as_u64().unwrap() as usize, answers);
                return (id, answers);
            }
            other => panic!("unexpected status {other}"),
        }
    }
}

fn patient(field: &VisualField, i: u64) -> FosPatient {
    FosPatient::new(field.clone(), 1.0, rng_from(9, Stream::Patient, i)).unwrap()
}

#[tokio::test]
async fn full_session_over_http() {
    let app = router(Arc::new(manager()));
    let f = &fields()[0];
    let (id, answers) = run_session(&app, json!({"strategy": "random", "seed": 5}), &mut patient(f, 0)).await;

    let (st, status) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(status["phase"], "complete");
    assert_eq!(status["tested"], 54);
    assert!(status["pending"].is_null());

    let (_, result) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(result["transcript"].as_array().unwrap().len(), answers);
    assert!(result["reconstruction"].as_array().unwrap().iter().all(|v| v.is_u64()));

    let (st, err) = call(&app, "POST", &format!("/sessions/{id}/response"), Some(json!({"seen": true}))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(err["kind"], "protocol");
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = router(Arc::new(manager()));
    let missing = "00000000-0000-0000-0000-0000000000ff";
    assert_eq!(call(&app, "GET", &format!("/sessions/{missing}"), None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", &format!("/sessions/{missing}/result"), None).await.0, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "POST", &format!("/sessions/{missing}/response"), Some(json!({"seen": true}))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"strategy": "bogus"}))).await;
    assert!(st.is_client_error());
    let (st, _) = call(&app, "POST", "/sessions", Some(json!({"sigma_stop": -1.0}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn fresh_sessions_are_distinct() {
    let app = router(Arc::new(manager()));
    let (_, a) = call(&app, "POST", "/sessions", Some(json!({"strategy": "rlperi", "seed": 1}))).await;
    let (_, b) = call(&app, "POST", "/sessions", Some(json!({"strategy": "rlperi", "seed": 1}))).await;
    assert_ne!(a["id"], b["id"]);
    assert_eq!(a["proposal"], b["proposal"]);
    assert!(a["proposal"]["stimulus_db"].as_u64().unwrap() <= 40);
    let id = a["id"].as_str().unwrap();
    let (_, r) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!((r["tested"].as_u64(), r["total_stimuli"].as_u64()), (Some(0), Some(0)));
}

#[tokio::test]
async fn retry_returns_the_same_answer() {
    let app = router(Arc::new(manager()));
    let (_, c) = call(&app, "POST", "/sessions", Some(json!({"seed": 2}))).await;
    let id = c["id"].as_str().unwrap();
    let uri = format!("/sessions/{id}/response");
    let body = json!({"seen": false, "turn": 0});
    let first = call(&app, "POST", &uri, Some(body.clone())).await;
    let again = call(&app, "POST", &uri, Some(body)).await;
    assert_eq!(first, again);
    let (_, r) = call(&app, "GET", &format!("/sessions/{id}/result"), None).await;
    assert_eq!(r["transcript"].as_array().unwrap().len(), 1);
    let (st, _) = call(&app, "POST", &uri, Some(json!({"seen": false, "turn": 7}))).await;
    assert_eq!(st, StatusCode::CONFLICT);
}

#[tokio::test]
async fn transcript_replays_to_identical_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    let m = Arc::new(manager().with_transcripts(dir.path()));
    let app = router(m.clone());
    let fs = fields();
    for (i, strategy) in ["rlperi", "random", "neighbor"].into_iter().enumerate() {
        let create = json!({"strategy": strategy, "seed": 40 + i, "sigma_stop": 1.0 + i as f64});
        let (id, _) = run_session(&app, create, &mut patient(&fs[i + 1], i as u64)).await;
        let live = m.result(&id).unwrap().result;
        let path = m.transcript_path(&id).unwrap().unwrap();
        let rec = read_transcript(&path).unwrap();
        assert_eq!(rec.entries, live.transcript);
        let offline = rec.replay(m.network().cloned(), m.prior()).unwrap();
        let live_values: Vec<u8> = live.reconstruction.iter().map(|v| v.unwrap()).collect();
        assert_eq!(offline.reconstruction, live_values);
        assert_eq!(offline.total_stimuli, live.total_stimuli);
        assert_eq!(offline.per_location_stimuli, live.per_location_stimuli);
        assert_eq!(rec.summary.unwrap().reconstruction, live_values);
    }
}

#[test]
fn interleaved_sessions_do_not_interfere() {
    let fs = fields();
    let solo = |seed: u64, f: &VisualField| {
        let m = manager();
        let c = m.create(rlperi::service::CreateRequest { seed: Some(seed), ..Default::default() }).unwrap();
        let mut p = patient(f, seed);
        let mut prop = c.proposal;
        loop {
            let seen = p.respond(prop.location.index, prop.stimulus_db).unwrap();
            match m.submit(&c.id, rlperi::service::ResponseRequest { seen, turn: Some(prop.turn) }).unwrap() {
                ResponseOutcome::Next { proposal } | ResponseOutcome::LocationComplete { proposal, .. } => prop = proposal,
                ResponseOutcome::SessionComplete { .. } => return m.result(&c.id).unwrap().result,
            }
        }
    };
    let expected = [solo(1, &fs[3]), solo(2, &fs[4])];

    let m = Arc::new(manager());
    let handles: Vec<_> = [(1u64, fs[3].clone()), (2, fs[4].clone())]
        .into_iter()
        .map(|(seed, f)| {
            let m = m.clone();
            std::thread::spawn(move || {
                let c = m.create(rlperi::service::CreateRequest { seed: Some(seed), ..Default::default() }).unwrap();
                let mut p = patient(&f, seed);
                let mut prop = c.proposal;
                loop {
                    std::thread::yield_now();
                    let seen = p.respond(prop.location.index, prop.stimulus_db).unwrap();
                    match m.submit(&c.id, rlperi::service::ResponseRequest { seen, turn: None }).unwrap() {
                        ResponseOutcome::Next { proposal } | ResponseOutcome::LocationComplete { proposal, .. } => {
                            prop = proposal
                        }
                        ResponseOutcome::SessionComplete { .. } => return m.result(&c.id).unwrap().result,
                    }
                }
            })
        })
        .collect();
    let got: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    for (g, e) in got.iter().zip(&expected) {
        assert_eq!(g.reconstruction, e.reconstruction);
        assert_eq!(g.per_location_stimuli, e.per_location_stimuli);
        let strip = |t: &[rlperi::service::TranscriptEntry]| t.iter().map(|e| (e.turn, e.location, e.stimulus_db, e.seen)).collect::<Vec<_>>();
        assert_eq!(strip(&g.transcript), strip(&e.transcript));
    }
    assert_eq!(m.len(), 2);
}

#[test]
fn rlperi_without_checkpoint_is_rejected() {
    let m = SessionManager::new(None, Arc::new(ZestPrior::uniform(54)), SessionConfig::default());
    let req = rlperi::service::CreateRequest { strategy: Some(StrategyKind::Rlperi), ..Default::default() };
    assert!(m.create(req).is_err());
    assert!(m.is_empty());
}
