//! C ABI over the matching pipeline.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns an [`RmStatus`];
//! on failure [`rm_last_error`] describes the most recent error on the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use revmatch::cli::prepare;
use revmatch::config::{BackendKind, RunConfig};
use revmatch::corpus::{load_corpus, Corpus, CorpusPaths};
use revmatch::eval::mean_gap;
use revmatch::model::{build_model, BuildOptions};
use revmatch::scoring::base_score;
use revmatch::solve::solve_with_row_generation;
use revmatch::Error;

/// Result of every fallible call. `RM_STATUS_OK` is 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmStatus {
    Ok = 0,
    /// Malformed input file.
    Schema = 1,
    /// Input references an unknown id.
    Reference = 2,
    /// Invalid configuration or argument value.
    Config = 3,
    /// Solver or other runtime failure.
    Runtime = 4,
    NullArgument = 5,
    InvalidUtf8 = 6,
    OutOfRange = 7,
    Panic = 8,
}

impl RmStatus {
    fn from_exit(code: i32) -> Self {
        match code {
            revmatch::EXIT_SCHEMA => RmStatus::Schema,
            revmatch::EXIT_REFERENCE => RmStatus::Reference,
            revmatch::EXIT_CONFIG => RmStatus::Config,
            _ => RmStatus::Runtime,
        }
    }
}

/// A loaded, validated conference corpus.
pub struct RmCorpus {
    corpus: Corpus,
}

/// A solved assignment. Id strings live as long as the handle.
pub struct RmMatch {
    pairs: Vec<(CString, CString)>,
    terms: [f64; 6],
    total: f64,
    upper_bound: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn fail(status: RmStatus, msg: impl Into<String>) -> RmStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> RmStatus {
    fail(RmStatus::from_exit(e.exit_code()), e.to_string())
}

/// Runs `f` with panics converted to `RM_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> RmStatus) -> RmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RmStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, RmStatus> {
    if p.is_null() {
        return Err(fail(RmStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RmStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads the corpus CSV files from directory `dir`.
///
/// # Safety
/// `dir` is a NUL-terminated string; `out` points to writable storage.
#[no_mangle]
pub unsafe extern "C" fn rm_corpus_load(dir: *const c_char, out: *mut *mut RmCorpus) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return fail(RmStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match load_corpus(&CorpusPaths::in_dir(Path::new(dir))) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(RmCorpus { corpus }));
                RmStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}

/// # Safety
/// `c` is null or a handle from [`rm_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rm_corpus_free(c: *mut RmCorpus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` is a live corpus handle; the out pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn rm_corpus_counts(c: *const RmCorpus, papers: *mut usize, reviewers: *mut usize) -> RmStatus {
    guard(|| {
        if c.is_null() || papers.is_null() || reviewers.is_null() {
            return fail(RmStatus::NullArgument, "null argument");
        }
        let c = &(*c).corpus;
        *papers = c.papers().len();
        *reviewers = c.reviewers().len();
        RmStatus::Ok
    })
}

/// Runs conflicts, bids, scoring and the solve. `config_toml` is null or a
/// run configuration in TOML; `current_year` overrides its COI year when
/// nonzero; `exact` nonzero selects the exhaustive backend.
///
/// # Safety
/// `c` is a live corpus handle, `config_toml` null or NUL-terminated, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn rm_match_solve(
    c: *const RmCorpus,
    config_toml: *const c_char,
    current_year: i32,
    exact: i32,
    out: *mut *mut RmMatch,
) -> RmStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return fail(RmStatus::NullArgument, "null argument");
        }
        *out = ptr::null_mut();
        let corpus = &(*c).corpus;
        let mut cfg = if config_toml.is_null() {
            RunConfig::default()
        } else {
            let text = match str_arg(config_toml, "config_toml") {
                Ok(t) => t,
                Err(s) => return s,
            };
            match RunConfig::from_toml(text, "config") {
                Ok(cfg) => cfg,
                Err(e) => return from_error(e.into()),
            }
        };
        if current_year != 0 {
            cfg.coi.current_year = Some(current_year);
        }
        if exact != 0 {
            cfg.solver.backend = BackendKind::Exact;
        }
        match solve(corpus, &cfg) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(m));
                RmStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

fn solve(corpus: &Corpus, cfg: &RunConfig) -> Result<RmMatch, Error> {
    cfg.validate()?;
    let prep = prepare(corpus, cfg)?;
    let model = build_model(
        corpus,
        &prep.scores,
        &prep.conflicts,
        &prep.bids,
        &cfg.matching,
        &BuildOptions::default(),
    )?;
    let report = solve_with_row_generation(&model, &cfg.solver.backend(), cfg.solver.max_iters)?;
    let o = report.objective;
    let pairs = model
        .pairs(&report.assignment)
        .into_iter()
        .map(|(p, r)| {
            let c = |s: String| CString::new(s).expect("ids come from CSV fields without NUL");
            (c(p), c(r))
        })
        .collect();
    Ok(RmMatch {
        pairs,
        terms: [o.matching, o.capacity, o.seniority, o.coauthor, o.region, o.cycle],
        total: o.total(),
        upper_bound: report.upper_bound,
    })
}

/// # Safety
/// `m` is null or a handle from [`rm_match_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rm_match_free(m: *mut RmMatch) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` is a live match handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rm_match_pair_count(m: *const RmMatch, out: *mut usize) -> RmStatus {
    guard(|| {
        if m.is_null() || out.is_null() {
            return fail(RmStatus::NullArgument, "null argument");
        }
        let m = &*m;
        *out = m.pairs.len();
        RmStatus::Ok
    })
}

/// Borrowed ids of pair `index`, valid until the handle is freed.
///
/// # Safety
/// `m` is a live match handle; the out pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn rm_match_pair(
    m: *const RmMatch,
    index: usize,
    paper_id: *mut *const c_char,
    reviewer_id: *mut *const c_char,
) -> RmStatus {
    guard(|| {
        if m.is_null() || paper_id.is_null() || reviewer_id.is_null() {
            return fail(RmStatus::NullArgument, "null argument");
        }
        let m = &*m;
        match m.pairs.get(index) {
            Some((p, r)) => {
                *paper_id = p.as_ptr();
                *reviewer_id = r.as_ptr();
                RmStatus::Ok
            }
            None => fail(RmStatus::OutOfRange, format!("pair index {index} out of range")),
        }
    })
}

/// Writes the six objective terms (matching, capacity, seniority,
/// coauthor, region, cycle), their total and the solver's upper bound.
///
/// # Safety
/// `m` is a live match handle; `terms` has room for 6 doubles; the other
/// out pointers are writable.
#[no_mangle]
pub unsafe extern "C" fn rm_match_objective(
    m: *const RmMatch,
    terms: *mut f64,
    total: *mut f64,
    upper_bound: *mut f64,
) -> RmStatus {
    guard(|| {
        if m.is_null() || terms.is_null() || total.is_null() || upper_bound.is_null() {
            return fail(RmStatus::NullArgument, "null argument");
        }
        let m = &*m;
        ptr::copy_nonoverlapping(m.terms.as_ptr(), terms, 6);
        *total = m.total;
        *upper_bound = m.upper_bound;
        RmStatus::Ok
    })
}

/// Base affinity from normalized TPMS, ACL and SAM. A component with its
/// `has_*` flag zero is treated as missing.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rm_base_score(
    tpms: f64,
    has_tpms: i32,
    acl: f64,
    has_acl: i32,
    sam: f64,
    out: *mut f64,
) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return fail(RmStatus::NullArgument, "out is null");
        }
        *out = base_score((has_tpms != 0).then_some(tpms), (has_acl != 0).then_some(acl), sam);
        RmStatus::Ok
    })
}

/// Mean phase-1 minus phase-2 score gap over `seeds` simulated conferences
/// with default priors and noise `sigma`.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rm_simulate_gap(
    papers: usize,
    sigma: f64,
    threshold: f64,
    seeds: usize,
    seed: u64,
    out: *mut f64,
) -> RmStatus {
    guard(|| {
        if out.is_null() {
            return fail(RmStatus::NullArgument, "out is null");
        }
        let mut cfg = RunConfig::default();
        cfg.sim.sigma = sigma;
        cfg.policy.reject_score_threshold = threshold;
        if let Err(e) = cfg.validate() {
            return from_error(e.into());
        }
        match mean_gap(papers, &cfg.sim.noise(), &cfg.policy, seeds, seed) {
            Ok((gap, _)) => {
                *out = gap;
                RmStatus::Ok
            }
            Err(e) => from_error(e.into()),
        }
    })
}
