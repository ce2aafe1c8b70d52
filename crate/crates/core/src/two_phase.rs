//! Two-phase reviewing: a first assignment, early rejection of papers with
//! two confident negative reviews, and a second assignment that keeps every
//! phase-1 pair and adds reviewers to surviving and fast-track papers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PaperId, PersonId, Role, Track};
use crate::model::{build_model, BuildOptions, CapacityMode, MatchParams, Model, ModelError};
use crate::solve::{solve_with_row_generation, PhaseInputs, SolveError, SolveReport, SolverBackend};

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("{file}:{line}: {message}")]
    Reviews { file: String, line: u64, message: String },
    #[error("{file}:{line}: unknown {kind} `{id}`")]
    UnknownId {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<ModelError> for PhaseError {
    fn from(e: ModelError) -> Self {
        PhaseError::Solve(SolveError::Model(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub paper_id: PaperId,
    pub reviewer_id: PersonId,
    /// On the 1 to 10 scale.
    pub score: f64,
    /// 1 (low) to 4 (expert).
    pub confidence: u8,
    pub phase: u8,
    pub pre_rebuttal: bool,
}

impl Review {
    pub fn validate(&self) -> Result<(), String> {
        if !(1.0..=10.0).contains(&self.score) {
            return Err(format!("score {} outside 1..=10", self.score));
        }
        if !(1..=4).contains(&self.confidence) {
            return Err(format!("confidence {} outside 1..=4", self.confidence));
        }
        if !(1..=2).contains(&self.phase) {
            return Err(format!("phase {} is not 1 or 2", self.phase));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhasePolicy {
    /// A review recommends rejection when its score is below this.
    pub reject_score_threshold: f64,
    pub reject_confidence_min: u8,
    pub required_phase1_reviews: u32,
    pub total_reviews_min: u32,
    /// Reviews a fast-track paper needs, imported ones included.
    pub fasttrack_reviews_min: u32,
}

impl Default for PhasePolicy {
    fn default() -> Self {
        PhasePolicy {
            reject_score_threshold: 4.5,
            reject_confidence_min: 3,
            required_phase1_reviews: 2,
            total_reviews_min: 4,
            fasttrack_reviews_min: 3,
        }
    }
}

impl PhasePolicy {
    pub fn validate(&self) -> Result<(), PhaseError> {
        if !(1.0..=10.0).contains(&self.reject_score_threshold) {
            return Err(PhaseError::Policy("reject_score_threshold outside 1..=10".into()));
        }
        if !(1..=4).contains(&self.reject_confidence_min) {
            return Err(PhaseError::Policy("reject_confidence_min outside 1..=4".into()));
        }
        if self.required_phase1_reviews == 0 {
            return Err(PhaseError::Policy("required_phase1_reviews must be positive".into()));
        }
        Ok(())
    }

    /// Whether a review counts toward phase-1 rejection.
    pub fn is_confident_reject(&self, score: f64, confidence: u8) -> bool {
        score < self.reject_score_threshold && confidence >= self.reject_confidence_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromotionReason {
    Survived,
    MissingReview,
    LowConfidence,
    Fasttrack,
}

impl PromotionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PromotionReason::Survived => "survived",
            PromotionReason::MissingReview => "missing_review",
            PromotionReason::LowConfidence => "low_confidence",
            PromotionReason::Fasttrack => "fasttrack",
        }
    }
}

impl fmt::Display for PromotionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Rejected and promoted papers partition the phase-1 paper set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PhaseOutcome {
    pub rejected_phase1: BTreeSet<PaperId>,
    pub promoted: BTreeMap<PaperId, PromotionReason>,
}

/// Phase-1 reviews of each paper.
pub type ReviewsByPaper = BTreeMap<PaperId, Vec<Review>>;

pub fn group_reviews(reviews: &[Review]) -> ReviewsByPaper {
    let mut out: ReviewsByPaper = BTreeMap::new();
    for r in reviews {
        out.entry(r.paper_id.clone()).or_default().push(r.clone());
    }
    out
}

/// Decides each paper after phase 1. Fast-track papers are always promoted.
pub fn phase1_decide(papers: &[(PaperId, Track)], reviews: &ReviewsByPaper, policy: &PhasePolicy) -> PhaseOutcome {
    let mut out = PhaseOutcome::default();
    for (id, track) in papers {
        if *track == Track::Fasttrack {
            out.promoted.insert(id.clone(), PromotionReason::Fasttrack);
            continue;
        }
        let phase1: Vec<&Review> = reviews
            .get(id)
            .map(|rs| rs.iter().filter(|r| r.phase == 1).collect())
            .unwrap_or_default();
        let required = policy.required_phase1_reviews as usize;
        let confident = phase1
            .iter()
            .filter(|r| policy.is_confident_reject(r.score, r.confidence))
            .count();
        let negative = phase1
            .iter()
            .filter(|r| r.score < policy.reject_score_threshold)
            .count();
        if confident >= required {
            out.rejected_phase1.insert(id.clone());
        } else if phase1.len() < required {
            out.promoted.insert(id.clone(), PromotionReason::MissingReview);
        } else if negative >= required {
            out.promoted.insert(id.clone(), PromotionReason::LowConfidence);
        } else {
            out.promoted.insert(id.clone(), PromotionReason::Survived);
        }
    }
    out
}

/// Additional PC reviews each paper needs in phase 2. Rejected papers map
/// to 0; fast-track papers count their imported reviews.
pub fn phase2_requirements(outcome: &PhaseOutcome, reviews: &ReviewsByPaper, policy: &PhasePolicy) -> BTreeMap<PaperId, u32> {
    let completed = |id: &PaperId| reviews.get(id).map_or(0, |rs| rs.iter().filter(|r| r.phase == 1).count()) as u32;
    let mut out = BTreeMap::new();
    for id in &outcome.rejected_phase1 {
        out.insert(id.clone(), 0);
    }
    for (id, reason) in &outcome.promoted {
        let target = match reason {
            PromotionReason::Fasttrack => policy.fasttrack_reviews_min,
            _ => policy.total_reviews_min,
        };
        out.insert(id.clone(), target.saturating_sub(completed(id)));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoPhaseConfig {
    pub phase1_gamma: [u32; 3],
    pub phase1_pc_capacity: u32,
    pub phase2_pc_capacity: u32,
    /// SPC and AC quota of a fast-track paper in phase 2.
    pub fasttrack_spc: u32,
    pub fasttrack_ac: u32,
    pub max_iters: usize,
}

impl Default for TwoPhaseConfig {
    fn default() -> Self {
        TwoPhaseConfig {
            phase1_gamma: [2, 1, 1],
            phase1_pc_capacity: 3,
            phase2_pc_capacity: 4,
            fasttrack_spc: 1,
            fasttrack_ac: 1,
            max_iters: crate::solve::DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseRun {
    pub model: Model,
    pub report: SolveReport,
}

impl PhaseRun {
    pub fn pairs(&self) -> Vec<(PaperId, PersonId)> {
        self.model.pairs(&self.report.assignment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnderAssigned {
    pub paper_id: PaperId,
    pub role: Role,
    pub required: u32,
    pub assigned: u32,
}

#[derive(Debug, Clone)]
pub struct Phase2Run {
    pub run: PhaseRun,
    pub requirements: BTreeMap<PaperId, u32>,
    /// Papers that received fewer new reviewers than required.
    pub under_assigned: Vec<UnderAssigned>,
}

#[derive(Debug, Clone)]
pub struct TwoPhaseResult {
    pub phase1: PhaseRun,
    pub outcome: PhaseOutcome,
    pub phase2: Phase2Run,
}

/// Phase 1 over main-track papers.
pub fn run_phase1(
    inp: &PhaseInputs<'_>,
    cfg: &TwoPhaseConfig,
    backend: &dyn SolverBackend,
) -> Result<PhaseRun, PhaseError> {
    let mut params: MatchParams = inp.params.clone();
    params.set_gamma(cfg.phase1_gamma);
    params.pc_capacity = cfg.phase1_pc_capacity;
    let main: BTreeSet<PaperId> = inp
        .corpus
        .papers()
        .iter()
        .filter(|p| p.track == Track::Main)
        .map(|p| p.id.clone())
        .collect();
    let opts = BuildOptions {
        papers: Some(main),
        ..Default::default()
    };
    let model = build_model(inp.corpus, inp.scores, inp.conflicts, inp.bids, &params, &opts)?;
    let report = solve_with_row_generation(&model, backend, cfg.max_iters)?;
    Ok(PhaseRun { model, report })
}

/// Phase 2 over promoted papers, with `phase1_pairs` fixed and PC limits
/// applying to new assignments only.
pub fn run_phase2(
    inp: &PhaseInputs<'_>,
    cfg: &TwoPhaseConfig,
    phase1_pairs: &[(PaperId, PersonId)],
    outcome: &PhaseOutcome,
    reviews: &ReviewsByPaper,
    policy: &PhasePolicy,
    backend: &dyn SolverBackend,
) -> Result<Phase2Run, PhaseError> {
    let c: &Corpus = inp.corpus;
    let requirements = phase2_requirements(outcome, reviews, policy);
    let promoted: BTreeSet<PaperId> = outcome.promoted.keys().cloned().collect();
    let fixed: BTreeSet<(PaperId, PersonId)> = phase1_pairs
        .iter()
        .filter(|(p, _)| promoted.contains(p))
        .cloned()
        .collect();
    let mut fixed_roles: BTreeMap<PaperId, [u32; 3]> = BTreeMap::new();
    for (p, r) in &fixed {
        let role = c.reviewer(r).map(|r| r.role).unwrap_or(Role::Pc);
        fixed_roles.entry(p.clone()).or_default()[role.index()] += 1;
    }
    let mut quota = BTreeMap::new();
    for (id, reason) in &outcome.promoted {
        let f = fixed_roles.get(id).copied().unwrap_or_default();
        let need = requirements.get(id).copied().unwrap_or(0);
        let q = match reason {
            PromotionReason::Fasttrack => [f[0] + need, f[1] + cfg.fasttrack_spc, f[2] + cfg.fasttrack_ac],
            _ => [f[0] + need, f[1], f[2]],
        };
        quota.insert(id.clone(), q);
    }
    let mut params = inp.params.clone();
    params.pc_capacity = cfg.phase2_pc_capacity;
    let opts = BuildOptions {
        papers: Some(promoted),
        fixed,
        quota: quota.clone(),
        capacity_mode: CapacityMode::PerPhase,
    };
    let model = build_model(c, inp.scores, inp.conflicts, inp.bids, &params, &opts)?;
    let report = solve_with_row_generation(&model, backend, cfg.max_iters)?;

    let mut under_assigned = Vec::new();
    for (i, paper) in model.papers.iter().enumerate() {
        let mut added = [0u32; 3];
        for &v in &model.by_paper[i] {
            if report.assignment[v] && !model.vars[v].fixed {
                added[model.reviewers[model.vars[v].reviewer].role.index()] += 1;
            }
        }
        let f = fixed_roles.get(&paper.id).copied().unwrap_or_default();
        for role in Role::ALL {
            let required = quota[&paper.id][role.index()] - f[role.index()];
            if added[role.index()] < required {
                under_assigned.push(UnderAssigned {
                    paper_id: paper.id.clone(),
                    role,
                    required,
                    assigned: added[role.index()],
                });
            }
        }
    }
    Ok(Phase2Run {
        run: PhaseRun { model, report },
        requirements,
        under_assigned,
    })
}

/// Runs both phases. `collect_reviews` receives the phase-1 pairs and
/// returns the completed phase-1 reviews (imported fast-track reviews
/// included).
pub fn run_two_phase(
    inp: &PhaseInputs<'_>,
    cfg: &TwoPhaseConfig,
    policy: &PhasePolicy,
    backend: &dyn SolverBackend,
    collect_reviews: &mut dyn FnMut(&[(PaperId, PersonId)]) -> ReviewsByPaper,
) -> Result<TwoPhaseResult, PhaseError> {
    policy.validate()?;
    let phase1 = run_phase1(inp, cfg, backend)?;
    let pairs = phase1.pairs();
    let reviews = collect_reviews(&pairs);
    let papers: Vec<(PaperId, Track)> = inp.corpus.papers().iter().map(|p| (p.id.clone(), p.track)).collect();
    let outcome = phase1_decide(&papers, &reviews, policy);
    let phase2 = run_phase2(inp, cfg, &pairs, &outcome, &reviews, policy, backend)?;
    Ok(TwoPhaseResult { phase1, outcome, phase2 })
}

pub const REVIEWS_HEADER: [&str; 6] = ["paper_id", "reviewer_id", "score", "confidence", "phase", "pre_rebuttal"];

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

/// Reads reviews.csv; every row is validated and must reference corpus ids.
pub fn load_reviews(path: &Path, c: &Corpus) -> Result<Vec<Review>, PhaseError> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != REVIEWS_HEADER {
        return Err(PhaseError::Reviews {
            file,
            line: 1,
            message: format!("expected header {}", REVIEWS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| PhaseError::Reviews {
            file: file.clone(),
            line,
            message,
        };
        let review = Review {
            paper_id: rec[0].to_string(),
            reviewer_id: rec[1].to_string(),
            score: rec[2].parse().map_err(|_| err(format!("bad score `{}`", &rec[2])))?,
            confidence: rec[3].parse().map_err(|_| err(format!("bad confidence `{}`", &rec[3])))?,
            phase: rec[4].parse().map_err(|_| err(format!("bad phase `{}`", &rec[4])))?,
            pre_rebuttal: parse_bool(&rec[5]).ok_or_else(|| err(format!("bad flag `{}`", &rec[5])))?,
        };
        review.validate().map_err(err)?;
        let unknown = |kind: &'static str, id: &str| PhaseError::UnknownId {
            file: file.clone(),
            line,
            kind,
            id: id.to_string(),
        };
        if c.paper(&review.paper_id).is_none() {
            return Err(unknown("paper", &review.paper_id));
        }
        if c.reviewer(&review.reviewer_id).is_none() {
            return Err(unknown("reviewer", &review.reviewer_id));
        }
        out.push(review);
    }
    Ok(out)
}

pub fn write_reviews(path: &Path, reviews: &[Review]) -> Result<(), PhaseError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REVIEWS_HEADER)?;
    for r in reviews {
        w.write_record([
            r.paper_id.as_str(),
            r.reviewer_id.as_str(),
            &r.score.to_string(),
            &r.confidence.to_string(),
            &r.phase.to_string(),
            if r.pre_rebuttal { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// decisions.csv: one row per phase-1 paper.
pub fn write_decisions(path: &Path, outcome: &PhaseOutcome) -> Result<(), PhaseError> {
    let mut rows: Vec<(&str, &str, &str)> = outcome
        .rejected_phase1
        .iter()
        .map(|p| (p.as_str(), "rejected", "two_confident_rejects"))
        .chain(outcome.promoted.iter().map(|(p, r)| (p.as_str(), "promoted", r.as_str())))
        .collect();
    rows.sort();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["paper_id", "decision", "reason"])?;
    for (p, d, r) in rows {
        w.write_record([p, d, r])?;
    }
    w.flush()?;
    Ok(())
}
