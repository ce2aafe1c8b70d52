use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use revmatch_ffi::*;

fn fixture() -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tiny");
    CString::new(p.to_str().unwrap()).unwrap()
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/revmatch.h")
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(rm_last_error()) }.to_string_lossy().into_owned()
}

fn load() -> *mut RmCorpus {
    let mut c = ptr::null_mut();
    assert_eq!(unsafe { rm_corpus_load(fixture().as_ptr(), &mut c) }, RmStatus::Ok);
    assert!(!c.is_null());
    c
}

#[test]
fn load_count_free() {
    let c = load();
    let (mut p, mut r) = (0usize, 0usize);
    assert_eq!(unsafe { rm_corpus_counts(c, &mut p, &mut r) }, RmStatus::Ok);
    assert_eq!((p, r), (3, 8));
    unsafe { rm_corpus_free(c) };
    unsafe { rm_corpus_free(ptr::null_mut()) };
}

#[test]
fn load_errors_have_codes_and_messages() {
    let mut c = ptr::null_mut();
    let missing = CString::new("/nonexistent/dir").unwrap();
    assert_eq!(unsafe { rm_corpus_load(missing.as_ptr(), &mut c) }, RmStatus::Schema);
    assert!(c.is_null());
    assert!(last_error().contains("regions.csv"), "{}", last_error());
    assert_eq!(unsafe { rm_corpus_load(ptr::null(), &mut c) }, RmStatus::NullArgument);
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { rm_corpus_load(bad.as_ptr().cast(), &mut c) },
        RmStatus::InvalidUtf8
    );
}

#[test]
fn solve_and_read_pairs() {
    let c = load();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { rm_match_solve(c, ptr::null(), 2021, 1, &mut m) }, RmStatus::Ok, "{}", last_error());
    let mut n = 0usize;
    assert_eq!(unsafe { rm_match_pair_count(m, &mut n) }, RmStatus::Ok);
    assert!(n > 0);
    for i in 0..n {
        let (mut p, mut r) = (ptr::null(), ptr::null());
        assert_eq!(unsafe { rm_match_pair(m, i, &mut p, &mut r) }, RmStatus::Ok);
        let p = unsafe { CStr::from_ptr(p) }.to_str().unwrap();
        let r = unsafe { CStr::from_ptr(r) }.to_str().unwrap();
        assert!(p.starts_with('p') && !r.is_empty());
        assert!(!(p == "p1" && r == "r1"), "conflicted pair assigned");
    }
    let (mut p, mut r) = (ptr::null(), ptr::null());
    assert_eq!(unsafe { rm_match_pair(m, n, &mut p, &mut r) }, RmStatus::OutOfRange);

    let mut terms = [0.0f64; 6];
    let (mut total, mut ub) = (0.0, 0.0);
    assert_eq!(
        unsafe { rm_match_objective(m, terms.as_mut_ptr(), &mut total, &mut ub) },
        RmStatus::Ok
    );
    assert!((terms.iter().sum::<f64>() - total).abs() < 1e-9);
    assert!(total <= ub + 1e-9);
    unsafe { rm_match_free(m) };
    unsafe { rm_corpus_free(c) };
}

#[test]
fn solve_config_errors() {
    let c = load();
    let mut m = ptr::null_mut();
    // no COI year anywhere
    assert_eq!(unsafe { rm_match_solve(c, ptr::null(), 0, 0, &mut m) }, RmStatus::Config);
    let cfg = CString::new("[match]\nbogus = 1\n").unwrap();
    assert_eq!(unsafe { rm_match_solve(c, cfg.as_ptr(), 2021, 0, &mut m) }, RmStatus::Config);
    assert!(last_error().contains("bogus"), "{}", last_error());
    let cfg = CString::new("[coi]\ncurrent_year = 2021\n[solver]\nbackend = \"exact\"\n").unwrap();
    assert_eq!(unsafe { rm_match_solve(c, cfg.as_ptr(), 0, 0, &mut m) }, RmStatus::Ok);
    unsafe { rm_match_free(m) };
    unsafe { rm_corpus_free(c) };
}

#[test]
fn scalar_helpers() {
    let mut out = 0.0;
    assert_eq!(unsafe { rm_base_score(0.8, 1, 0.4, 1, 0.6, &mut out) }, RmStatus::Ok);
    assert!((out - (0.25 * 0.8 + 0.25 * 0.4 + 0.5 * 0.6)).abs() < 1e-12);
    assert_eq!(unsafe { rm_base_score(0.0, 0, 0.0, 0, 0.6, &mut out) }, RmStatus::Ok);
    assert!((out - 0.6).abs() < 1e-12);
    assert_eq!(unsafe { rm_simulate_gap(2000, 0.0, 4.5, 2, 0, &mut out) }, RmStatus::Ok);
    assert_eq!(out, 0.0);
    assert_eq!(unsafe { rm_simulate_gap(2000, -1.0, 4.5, 2, 0, &mut out) }, RmStatus::Config);
    assert_eq!(unsafe { rm_base_score(0.0, 0, 0.0, 0, 0.6, ptr::null_mut()) }, RmStatus::NullArgument);
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct RmCorpus RmCorpus",
        "typedef struct RmMatch RmMatch",
        "RM_STATUS_OK = 0",
        "rm_corpus_load",
        "rm_match_solve",
        "rm_match_pair",
        "rm_last_error",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(header()).output() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
