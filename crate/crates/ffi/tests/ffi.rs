use std::ffi::{CStr, CString};
use std::ptr;

use rlperi_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rlperi_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn conversions() {
    let mut db = 0.0;
    let mut l = 0.0;
    unsafe {
        assert_eq!(rlperi_db_from_luminance(10_000.0, 10.0, &mut db), RlperiStatus::Ok);
        assert!((db - 30.0).abs() < 1e-12);
        assert_eq!(rlperi_luminance_from_db(10_000.0, 30.0, &mut l), RlperiStatus::Ok);
        assert!((l - 10.0).abs() < 1e-9);
        assert_eq!(rlperi_db_from_luminance(10_000.0, -1.0, &mut db), RlperiStatus::Domain);
        assert!(!last_error().is_empty());
        assert_eq!(rlperi_db_from_luminance(10_000.0, 10.0, ptr::null_mut()), RlperiStatus::NullPointer);
    }
}

#[test]
fn p_seen_matches_the_curve() {
    let mut p = 0.0;
    unsafe {
        assert_eq!(rlperi_p_seen(30, 30.0, 1.0, &mut p), RlperiStatus::Ok);
        assert_eq!(p, 0.5);
        assert_eq!(rlperi_p_seen(30, 32.0, 1.0, &mut p), RlperiStatus::Ok);
        assert!((p - 0.022750).abs() < 1e-6);
        assert_eq!(rlperi_p_seen(30, 30.0, 0.0, &mut p), RlperiStatus::InvalidArgument);
        assert_eq!(rlperi_p_seen(41, 30.0, 1.0, &mut p), RlperiStatus::Domain);
    }
}

#[test]
fn zest_converges_on_a_step_observer() {
    let prior = [1.0; 41];
    let threshold = 23u8;
    let mut z = ptr::null_mut();
    unsafe {
        assert_eq!(rlperi_zest_new(prior.as_ptr(), 41, 1.0, 0.5, 50, &mut z), RlperiStatus::Ok);
        let mut done = false;
        let mut n = 0;
        while !done {
            let mut x = 0u8;
            assert_eq!(rlperi_zest_estimate(z, &mut x), RlperiStatus::Ok);
            assert_eq!(rlperi_zest_update(z, x <= threshold, x, &mut done), RlperiStatus::Ok);
            n += 1;
        }
        assert!(n <= 50);
        let mut est = 0u8;
        let mut sd = 0.0;
        let mut pdf = [0.0; 41];
        rlperi_zest_estimate(z, &mut est);
        rlperi_zest_std(z, &mut sd);
        assert_eq!(rlperi_zest_pdf(z, pdf.as_mut_ptr(), 41), RlperiStatus::Ok);
        assert!((est as i32 - threshold as i32).abs() <= 1);
        assert!(sd < 1.0);
        assert!((pdf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(rlperi_zest_pdf(z, pdf.as_mut_ptr(), 40), RlperiStatus::InvalidArgument);
        assert_eq!(rlperi_zest_update(z, true, 41, &mut done), RlperiStatus::Domain);
        rlperi_zest_free(z);
        assert_eq!(rlperi_zest_new(prior.as_ptr(), 40, 1.0, 0.5, 50, &mut z), RlperiStatus::InvalidArgument);
        let zeros = [0.0; 41];
        assert_eq!(rlperi_zest_new(zeros.as_ptr(), 41, 1.0, 0.5, 50, &mut z), RlperiStatus::InvalidArgument);
        rlperi_zest_free(ptr::null_mut());
    }
}

fn write_uniform_prior(dir: &std::path::Path) -> CString {
    let path = dir.join("prior.csv");
    rlperi::zest::ZestPrior::uniform(54).save(&path).unwrap();
    CString::new(path.to_str().unwrap()).unwrap()
}

#[test]
fn session_runs_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let prior = write_uniform_prior(dir.path());
    let strategy = CString::new("neighbor").unwrap();
    let mut s = ptr::null_mut();
    let mut first = RlperiProposal::default();
    unsafe {
        assert_eq!(
            rlperi_session_new(strategy.as_ptr(), 2.0, 7, ptr::null(), prior.as_ptr(), &mut s, &mut first),
            RlperiStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(first.turn, 0);
        let mut proposal = first;
        let mut done = Vec::new();
        let total = loop {
            let mut r = std::mem::zeroed::<RlperiResponse>();
            let seen = proposal.stimulus_db <= 25;
            assert_eq!(rlperi_session_respond(s, seen, &mut r), RlperiStatus::Ok, "{}", last_error());
            match r.step {
                RlperiStep::Next => {}
                RlperiStep::LocationComplete => done.push(r.finished_location),
                RlperiStep::SessionComplete => {
                    done.push(r.finished_location);
                    break r.total_stimuli;
                }
            }
            proposal = r.proposal;
        };
        done.sort_unstable();
        assert_eq!(done, (0..54).collect::<Vec<u32>>());

        let mut recon = [0i16; 54];
        assert_eq!(rlperi_session_reconstruction(s, recon.as_mut_ptr(), 54), RlperiStatus::Ok);
        // A stopping std of 2 dB leaves a couple of dB of slack on a step observer.
        assert!(recon.iter().all(|&v| (23..=27).contains(&v)), "{recon:?}");

        let mut r = std::mem::zeroed::<RlperiResponse>();
        assert_eq!(rlperi_session_respond(s, true, &mut r), RlperiStatus::Protocol);

        let mut json = ptr::null_mut();
        assert_eq!(rlperi_session_result_json(s, &mut json), RlperiStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["total_stimuli"].as_u64().unwrap(), total as u64);
        assert_eq!(v["transcript"].as_array().unwrap().len(), total as usize);
        rlperi_string_free(json);
        rlperi_session_free(s);
    }
}

#[test]
fn session_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let prior = write_uniform_prior(dir.path());
    let mut s = rlperi_null_session();
    let mut first = RlperiProposal::default();
    let rl = CString::new("rlperi").unwrap();
    let bogus = CString::new("bogus").unwrap();
    let missing = CString::new(dir.path().join("nope.ckpt").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(
            rlperi_session_new(rl.as_ptr(), 2.0, 0, ptr::null(), prior.as_ptr(), &mut s, &mut first),
            RlperiStatus::InvalidArgument
        );
        assert!(last_error().contains("network") || last_error().contains("checkpoint"), "{}", last_error());
        assert_eq!(
            rlperi_session_new(bogus.as_ptr(), 2.0, 0, ptr::null(), prior.as_ptr(), &mut s, &mut first),
            RlperiStatus::InvalidArgument
        );
        assert_eq!(
            rlperi_session_new(rl.as_ptr(), 2.0, 0, missing.as_ptr(), ptr::null(), &mut s, &mut first),
            RlperiStatus::Io
        );
        assert_eq!(
            rlperi_session_new(ptr::null(), 2.0, 0, ptr::null(), prior.as_ptr(), &mut s, &mut first),
            RlperiStatus::NullPointer
        );
        assert!(s.is_null());
        let mut r = std::mem::zeroed::<RlperiResponse>();
        assert_eq!(rlperi_session_respond(ptr::null_mut(), true, &mut r), RlperiStatus::NullPointer);
    }
}

#[test]
fn version_and_header() {
    let v = unsafe { CStr::from_ptr(rlperi_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rlperi.h")).unwrap();
    for name in [
        "rlperi_last_error",
        "rlperi_string_free",
        "rlperi_p_seen",
        "rlperi_zest_new",
        "rlperi_zest_update",
        "rlperi_zest_free",
        "rlperi_session_new",
        "rlperi_session_respond",
        "rlperi_session_result_json",
        "rlperi_session_free",
        "RLPERI_STATUS_OK",
        "typedef struct RlperiSession RlperiSession",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
