//! The sparse assignment model: candidate variables, hard constraints and the
//! soft terms for reviewer load, seniority, coauthorship distance, region
//! diversity and bidding cycles.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bids::FilteredBids;
use crate::coi::ConflictSet;
use crate::corpus::{Corpus, PaperId, PersonId, Role};
use crate::lp::{sanitize, Bound, LpError, LpProblem, Row, Sense};
use crate::scoring::ScoreMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },
    #[error("fixed pair ({paper}, {reviewer}) is conflicted or unscored")]
    FixedConflict { paper: String, reviewer: String },
    #[error("fixed assignments on paper `{paper}` exceed its {role} quota")]
    FixedOverQuota { paper: String, role: Role },
    #[error("hard constraint violated: {0}")]
    HardViolation(String),
    #[error("assignment has {got} entries, model has {expected} variables")]
    WrongLength { expected: usize, got: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityLevel {
    pub capacity: u32,
    pub penalty: f64,
}

/// How bidding cycles are penalized.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleMode {
    /// One slack per cycle tuple: each half of a cycle is penalized when assigned.
    #[default]
    PerAssignment,
    /// One slack per reviewer pair, charged only when both halves of some
    /// cycle are assigned.
    PairSlack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchParams {
    pub gamma_pc: u32,
    pub gamma_spc: u32,
    pub gamma_ac: u32,
    /// Hard PC load limit; a reviewer's own capacity can only lower it.
    pub pc_capacity: u32,
    pub spc_levels: Vec<CapacityLevel>,
    pub ac_levels: Vec<CapacityLevel>,
    pub reward_sen: f64,
    pub target_seniority: u32,
    pub min_seniority: u32,
    pub p_co_1: f64,
    pub p_co_2: f64,
    pub reward_reg: f64,
    pub p_cy: f64,
    pub cycle_mode: CycleMode,
    pub k: usize,
    pub score_threshold: f64,
    pub mip_gap_abs: f64,
}

fn levels(caps: [u32; 5]) -> Vec<CapacityLevel> {
    caps.iter()
        .enumerate()
        .map(|(w, &capacity)| CapacityLevel {
            capacity,
            penalty: if w + 1 == caps.len() { -0.5 } else { -0.05 },
        })
        .collect()
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            gamma_pc: 2,
            gamma_spc: 1,
            gamma_ac: 1,
            pc_capacity: 3,
            spc_levels: levels([8, 12, 16, 20, 24]),
            ac_levels: levels([20, 30, 40, 50, 60]),
            reward_sen: 4.0,
            target_seniority: 4,
            min_seniority: 0,
            p_co_1: -0.3,
            p_co_2: -0.2,
            reward_reg: 0.1,
            p_cy: -0.05,
            cycle_mode: CycleMode::PerAssignment,
            k: 50,
            score_threshold: 0.15,
            mip_gap_abs: 20.0,
        }
    }
}

impl MatchParams {
    pub fn gamma(&self) -> [u32; 3] {
        [self.gamma_pc, self.gamma_spc, self.gamma_ac]
    }

    pub fn set_gamma(&mut self, g: [u32; 3]) {
        self.gamma_pc = g[0];
        self.gamma_spc = g[1];
        self.gamma_ac = g[2];
    }

    /// Penalty for two reviewers at coauthorship distance `d`.
    pub fn p_co(&self, d: u8) -> f64 {
        match d {
            1 => self.p_co_1,
            2 => self.p_co_2,
            _ => 0.0,
        }
    }

    pub fn levels_for(&self, role: Role) -> &[CapacityLevel] {
        match role {
            Role::Pc => &[],
            Role::Spc => &self.spc_levels,
            Role::Ac => &self.ac_levels,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        for (name, lv) in [("spc_levels", &self.spc_levels), ("ac_levels", &self.ac_levels)] {
            if lv.windows(2).any(|w| w[0].capacity >= w[1].capacity) {
                return bad(&format!("{name} must be strictly increasing"));
            }
            if lv.iter().any(|l| l.penalty > 0.0 || !l.penalty.is_finite()) {
                return bad(&format!("{name} penalties must be finite and <= 0"));
            }
        }
        if !(self.p_co_1 <= self.p_co_2 && self.p_co_2 <= 0.0) {
            return bad("coauthor penalties must satisfy p_co_1 <= p_co_2 <= 0");
        }
        if !(self.p_cy <= 0.0) {
            return bad("p_cy must be <= 0");
        }
        if !(self.reward_sen >= 0.0 && self.reward_reg >= 0.0) {
            return bad("rewards must be >= 0");
        }
        if self.min_seniority > self.target_seniority {
            return bad("min_seniority exceeds target_seniority");
        }
        if !(self.score_threshold.is_finite() && self.mip_gap_abs >= 0.0) {
            return bad("score_threshold must be finite and mip_gap_abs >= 0");
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        Ok(())
    }
}

/// Candidate (paper position, reviewer position) pairs: per paper the top-k
/// of each role, per reviewer the top k / 5k / 10k papers by role, minus
/// pairs scoring below the threshold.
pub fn candidate_pairs(c: &Corpus, scores: &ScoreMatrix, params: &MatchParams) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    let k = params.k;
    // positions follow id order, so position order is the id tie-break
    let mut per_reviewer: Vec<Vec<(f64, usize)>> = vec![Vec::new(); c.reviewers().len()];
    for p in 0..scores.paper_count() {
        let mut by_role: [Vec<(f64, usize)>; 3] = Default::default();
        for &(r, ref e) in scores.row(p) {
            let role = c.reviewers()[r].role;
            by_role[role.index()].push((e.aggscore, r));
            per_reviewer[r].push((e.aggscore, p));
        }
        for list in &mut by_role {
            list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            out.extend(list.iter().take(k).map(|&(_, r)| (p, r)));
        }
    }
    for (r, list) in per_reviewer.iter_mut().enumerate() {
        let limit = match c.reviewers()[r].role {
            Role::Pc => k,
            Role::Spc => k.saturating_mul(5),
            Role::Ac => k.saturating_mul(10),
        };
        list.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.extend(list.iter().take(limit).map(|&(_, p)| (p, r)));
    }
    out.retain(|&(p, r)| {
        scores
            .get(p, r)
            .is_some_and(|e| e.aggscore >= params.score_threshold)
    });
    out
}

/// Coauthorship distance (1 or 2) between PC/SPC reviewers, keyed by
/// reviewer positions with the smaller first.
pub fn reviewer_distances(c: &Corpus) -> BTreeMap<(usize, usize), u8> {
    let discussants: HashMap<&str, usize> = c
        .reviewers()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.role.is_discussant())
        .map(|(i, r)| (r.id.as_str(), i))
        .collect();
    let g = &c.coauthor_graph;
    let mut out = BTreeMap::new();
    for (&id, &a) in &discussants {
        let mut dist: HashMap<&str, u8> = HashMap::new();
        let mut queue = VecDeque::from([(id, 0u8)]);
        dist.insert(id, 0);
        while let Some((node, d)) = queue.pop_front() {
            if d == 2 {
                continue;
            }
            for nb in g.neighbors(node) {
                if !dist.contains_key(nb.as_str()) {
                    dist.insert(nb.as_str(), d + 1);
                    queue.push_back((nb.as_str(), d + 1));
                }
            }
        }
        for (other, d) in dist {
            if d == 0 {
                continue;
            }
            if let Some(&b) = discussants.get(other) {
                out.insert((a.min(b), a.max(b)), d);
            }
        }
    }
    out
}

/// A bidding cycle `(j, j', i, i')`: j bid positively on i authored by j',
/// and j' bid positively on i' authored by j. Positions index the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CycleTuple {
    pub j: usize,
    pub j2: usize,
    pub i: usize,
    pub i2: usize,
}

/// All bidding cycles between PC/SPC reviewers; closed under swapping the
/// two halves.
pub fn cycle_set(c: &Corpus, bids: &FilteredBids) -> Vec<CycleTuple> {
    let mut authored: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pi, p) in c.papers().iter().enumerate() {
        for a in &p.author_ids {
            if let Some(j) = c.reviewer_position(a) {
                if c.reviewers()[j].role.is_discussant() {
                    authored.entry(j).or_default().push(pi);
                }
            }
        }
    }
    let positive = |j: usize, i: usize| bids.level(&c.reviewers()[j].id, &c.papers()[i].id).is_positive();
    let mut out = Vec::new();
    for (&j, papers_j) in &authored {
        for (&j2, papers_j2) in &authored {
            if j == j2 {
                continue;
            }
            for &i in papers_j2 {
                if !positive(j, i) {
                    continue;
                }
                for &i2 in papers_j {
                    if positive(j2, i2) {
                        out.push(CycleTuple { j, j2, i, i2 });
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelPaper {
    pub id: PaperId,
    /// Corpus position.
    pub position: usize,
    /// Maximum assigned count per role, fixed assignments included.
    pub quota: [u32; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReviewer {
    pub id: PersonId,
    pub role: Role,
    pub seniority: u8,
    pub region: usize,
    /// Hard load limit (PCs only).
    pub hard_cap: Option<u32>,
    /// Soft load levels (SPCs and ACs).
    pub levels: Vec<CapacityLevel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Var {
    pub paper: usize,
    pub reviewer: usize,
    pub score: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoauthorTerm {
    pub a: usize,
    pub b: usize,
    pub distance: u8,
    pub penalty: f64,
}

/// A cycle penalty attached to variable `var` (x_ij). In pair mode `partner`
/// is the other half x_i'j' and `pair` indexes the shared slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleTerm {
    pub tuple: CycleTuple,
    pub var: usize,
    pub partner: Option<usize>,
    pub pair: usize,
}

/// How fixed assignments interact with capacities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    /// Fixed assignments count against the configured capacities.
    #[default]
    Total,
    /// Capacities apply to new assignments only: every limit is raised by the
    /// reviewer's fixed load.
    PerPhase,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildOptions {
    /// Restrict the model to these papers.
    pub papers: Option<BTreeSet<PaperId>>,
    /// Assignments forced to 1.
    pub fixed: BTreeSet<(PaperId, PersonId)>,
    /// Per-paper role quotas replacing the params' gammas.
    pub quota: BTreeMap<PaperId, [u32; 3]>,
    pub capacity_mode: CapacityMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub params: MatchParams,
    pub papers: Vec<ModelPaper>,
    pub reviewers: Vec<ModelReviewer>,
    pub regions: Vec<String>,
    /// Sorted by (paper, reviewer).
    pub vars: Vec<Var>,
    pub by_paper: Vec<Vec<usize>>,
    pub by_reviewer: Vec<Vec<usize>>,
    /// Every potential coauthor term between reviewers sharing a candidate paper.
    pub coauthor_master: Vec<CoauthorTerm>,
    /// Which master terms are part of the model's objective.
    pub coauthor_active: Vec<bool>,
    pub cycles: Vec<CycleTerm>,
    /// Reviewer pairs owning a pair-mode cycle slack.
    pub cycle_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub matching: f64,
    pub capacity: f64,
    pub seniority: f64,
    pub coauthor: f64,
    pub region: f64,
    pub cycle: f64,
}

impl Objective {
    pub fn total(&self) -> f64 {
        self.matching + self.capacity + self.seniority + self.coauthor + self.region + self.cycle
    }

    pub fn terms(&self) -> [(&'static str, f64); 6] {
        [
            ("matching", self.matching),
            ("capacity", self.capacity),
            ("seniority", self.seniority),
            ("coauthor", self.coauthor),
            ("region", self.region),
            ("cycle", self.cycle),
        ]
    }

    /// Largest absolute per-term difference.
    pub fn max_term_diff(&self, other: &Objective) -> f64 {
        self.terms()
            .iter()
            .zip(other.terms())
            .map(|(a, b)| (a.1 - b.1).abs())
            .fold(0.0, f64::max)
    }
}

/// Which coauthor terms an evaluation charges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoauthorScope {
    Master,
    Active,
}

impl Model {
    pub fn var_index(&self, paper: usize, reviewer: usize) -> Option<usize> {
        self.by_paper
            .get(paper)?
            .iter()
            .copied()
            .find(|&v| self.vars[v].reviewer == reviewer)
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn fixed_assignment(&self) -> Vec<bool> {
        self.vars.iter().map(|v| v.fixed).collect()
    }

    /// Sets the active coauthor terms.
    pub fn set_active_coauthor(&mut self, active: &BTreeSet<usize>) {
        for (k, flag) in self.coauthor_active.iter_mut().enumerate() {
            *flag = active.contains(&k);
        }
    }

    pub fn active_coauthor(&self) -> BTreeSet<usize> {
        (0..self.coauthor_master.len())
            .filter(|&k| self.coauthor_active[k])
            .collect()
    }

    /// (paper id, reviewer id) pairs set in `x`.
    pub fn pairs(&self, x: &[bool]) -> Vec<(PaperId, PersonId)> {
        self.vars
            .iter()
            .zip(x)
            .filter(|(_, &on)| on)
            .map(|(v, _)| (self.papers[v.paper].id.clone(), self.reviewers[v.reviewer].id.clone()))
            .collect()
    }

    /// Master coauthor terms whose two reviewers share an assigned paper.
    pub fn realized_coauthor_terms(&self, x: &[bool]) -> BTreeSet<usize> {
        let mut on_paper: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.papers.len()];
        for (v, var) in self.vars.iter().enumerate() {
            if x[v] {
                on_paper[var.paper].insert(var.reviewer);
            }
        }
        self.coauthor_master
            .iter()
            .enumerate()
            .filter(|(_, t)| on_paper.iter().any(|s| s.contains(&t.a) && s.contains(&t.b)))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn stats(&self) -> ModelStats {
        let lp = self.to_lp();
        let mut rows: BTreeMap<String, usize> = BTreeMap::new();
        for r in &lp.rows {
            let family = r.name.split('_').next().unwrap_or("").to_string();
            *rows.entry(family).or_default() += 1;
        }
        ModelStats {
            papers: self.papers.len(),
            reviewers: self.reviewers.len(),
            variables: self.vars.len(),
            fixed: self.vars.iter().filter(|v| v.fixed).count(),
            coauthor_terms: self.coauthor_master.len(),
            active_coauthor_terms: self.coauthor_active.iter().filter(|&&a| a).count(),
            cycle_terms: self.cycles.len(),
            rows_by_family: rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelStats {
    pub papers: usize,
    pub reviewers: usize,
    pub variables: usize,
    pub fixed: usize,
    pub coauthor_terms: usize,
    pub active_coauthor_terms: usize,
    pub cycle_terms: usize,
    pub rows_by_family: BTreeMap<String, usize>,
}

/// Builds the model over candidate pairs. Fixed pairs that are not
/// candidates are added with their true score.
pub fn build_model(
    c: &Corpus,
    scores: &ScoreMatrix,
    conflicts: &ConflictSet,
    bids: &FilteredBids,
    params: &MatchParams,
    opts: &BuildOptions,
) -> Result<Model, ModelError> {
    params.validate()?;
    if let Some(subset) = &opts.papers {
        for id in subset {
            if c.paper(id).is_none() {
                return Err(ModelError::UnknownId { kind: "paper", id: id.clone() });
            }
        }
    }
    let paper_positions: Vec<usize> = (0..c.papers().len())
        .filter(|&p| opts.papers.as_ref().is_none_or(|s| s.contains(&c.papers()[p].id)))
        .collect();
    let model_paper: HashMap<usize, usize> = paper_positions.iter().enumerate().map(|(m, &p)| (p, m)).collect();

    let mut pairs: BTreeSet<(usize, usize)> = candidate_pairs(c, scores, params)
        .into_iter()
        .filter(|(p, _)| model_paper.contains_key(p))
        .collect();
    let mut fixed_pairs = BTreeSet::new();
    for (pid, rid) in &opts.fixed {
        let p = c
            .paper_position(pid)
            .ok_or_else(|| ModelError::UnknownId { kind: "paper", id: pid.clone() })?;
        let r = c
            .reviewer_position(rid)
            .ok_or_else(|| ModelError::UnknownId { kind: "reviewer", id: rid.clone() })?;
        if !model_paper.contains_key(&p) {
            return Err(ModelError::UnknownId { kind: "paper in model", id: pid.clone() });
        }
        if conflicts.contains(pid, rid) || scores.get(p, r).is_none() {
            return Err(ModelError::FixedConflict {
                paper: pid.clone(),
                reviewer: rid.clone(),
            });
        }
        pairs.insert((p, r));
        fixed_pairs.insert((p, r));
    }
    // defensive: conflicts never become variables
    pairs.retain(|&(p, r)| !conflicts.contains(&c.papers()[p].id, &c.reviewers()[r].id));

    let regions: Vec<String> = c.regions.iter().cloned().collect();
    let region_index: HashMap<&str, usize> = regions.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();

    let mut fixed_load = vec![0u32; c.reviewers().len()];
    for &(_, r) in &fixed_pairs {
        fixed_load[r] += 1;
    }
    let shift = |r: usize| match opts.capacity_mode {
        CapacityMode::Total => 0,
        CapacityMode::PerPhase => fixed_load[r],
    };
    let reviewers: Vec<ModelReviewer> = c
        .reviewers()
        .iter()
        .enumerate()
        .map(|(ri, r)| ModelReviewer {
            id: r.id.clone(),
            role: r.role,
            seniority: r.seniority(),
            region: region_index[r.region.as_str()],
            hard_cap: (r.role == Role::Pc).then(|| params.pc_capacity.min(r.capacity) + shift(ri)),
            levels: params
                .levels_for(r.role)
                .iter()
                .map(|l| CapacityLevel {
                    capacity: l.capacity + shift(ri),
                    penalty: l.penalty,
                })
                .collect(),
        })
        .collect();

    let papers: Vec<ModelPaper> = paper_positions
        .iter()
        .map(|&p| {
            let id = c.papers()[p].id.clone();
            let quota = opts.quota.get(&id).copied().unwrap_or(params.gamma());
            ModelPaper { id, position: p, quota }
        })
        .collect();

    let mut vars = Vec::with_capacity(pairs.len());
    for &(p, r) in &pairs {
        vars.push(Var {
            paper: model_paper[&p],
            reviewer: r,
            score: scores.get(p, r).map(|e| e.aggscore).unwrap_or(0.0),
            fixed: fixed_pairs.contains(&(p, r)),
        });
    }
    vars.sort_by(|a, b| (a.paper, a.reviewer).cmp(&(b.paper, b.reviewer)));
    let mut by_paper = vec![Vec::new(); papers.len()];
    let mut by_reviewer = vec![Vec::new(); reviewers.len()];
    for (v, var) in vars.iter().enumerate() {
        by_paper[var.paper].push(v);
        by_reviewer[var.reviewer].push(v);
    }

    for (m, paper) in papers.iter().enumerate() {
        let mut fixed_by_role = [0u32; 3];
        for &v in &by_paper[m] {
            if vars[v].fixed {
                fixed_by_role[reviewers[vars[v].reviewer].role.index()] += 1;
            }
        }
        for role in Role::ALL {
            if fixed_by_role[role.index()] > paper.quota[role.index()] {
                return Err(ModelError::FixedOverQuota {
                    paper: paper.id.clone(),
                    role,
                });
            }
        }
    }

    // coauthor terms among discussants that share a candidate paper
    let distances = reviewer_distances(c);
    let mut coauthor_master = Vec::new();
    let mut shared: BTreeSet<(usize, usize)> = BTreeSet::new();
    for vs in &by_paper {
        let rs: Vec<usize> = vs
            .iter()
            .map(|&v| vars[v].reviewer)
            .filter(|&r| reviewers[r].role.is_discussant())
            .collect();
        for (x, &a) in rs.iter().enumerate() {
            for &b in &rs[x + 1..] {
                shared.insert((a.min(b), a.max(b)));
            }
        }
    }
    for (&(a, b), &d) in &distances {
        let penalty = params.p_co(d);
        if penalty != 0.0 && shared.contains(&(a, b)) {
            coauthor_master.push(CoauthorTerm { a, b, distance: d, penalty });
        }
    }
    let coauthor_active = vec![true; coauthor_master.len()];

    // cycle terms attach to candidate variables only
    let var_of = |p: usize, r: usize| -> Option<usize> {
        let m = *model_paper.get(&p)?;
        by_paper[m].iter().copied().find(|&v| vars[v].reviewer == r)
    };
    let mut cycles = Vec::new();
    let mut cycle_pairs: Vec<(usize, usize)> = Vec::new();
    let mut pair_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    if params.p_cy != 0.0 {
        for t in cycle_set(c, bids) {
            let Some(var) = var_of(t.i, t.j) else { continue };
            let partner = var_of(t.i2, t.j2);
            if params.cycle_mode == CycleMode::PairSlack && partner.is_none() {
                continue;
            }
            let key = (t.j.min(t.j2), t.j.max(t.j2));
            let pair = match params.cycle_mode {
                CycleMode::PerAssignment => 0,
                CycleMode::PairSlack => *pair_index.entry(key).or_insert_with(|| {
                    cycle_pairs.push(key);
                    cycle_pairs.len() - 1
                }),
            };
            cycles.push(CycleTerm {
                tuple: t,
                var,
                partner: if params.cycle_mode == CycleMode::PairSlack { partner } else { None },
                pair,
            });
        }
    }

    Ok(Model {
        params: params.clone(),
        papers,
        reviewers,
        regions,
        vars,
        by_paper,
        by_reviewer,
        coauthor_master,
        coauthor_active,
        cycles,
        cycle_pairs,
    })
}

fn check_hard(m: &Model, x: &[bool]) -> Result<(), ModelError> {
    if x.len() != m.vars.len() {
        return Err(ModelError::WrongLength {
            expected: m.vars.len(),
            got: x.len(),
        });
    }
    for (v, var) in m.vars.iter().enumerate() {
        if var.fixed && !x[v] {
            return Err(ModelError::HardViolation(format!(
                "fixed pair ({}, {}) unassigned",
                m.papers[var.paper].id, m.reviewers[var.reviewer].id
            )));
        }
    }
    for (i, paper) in m.papers.iter().enumerate() {
        let mut count = [0u32; 3];
        for &v in &m.by_paper[i] {
            if x[v] {
                count[m.reviewers[m.vars[v].reviewer].role.index()] += 1;
            }
        }
        for role in Role::ALL {
            if count[role.index()] > paper.quota[role.index()] {
                return Err(ModelError::HardViolation(format!(
                    "paper `{}` has {} {} reviewers, quota {}",
                    paper.id,
                    count[role.index()],
                    role,
                    paper.quota[role.index()]
                )));
            }
        }
    }
    for (j, r) in m.reviewers.iter().enumerate() {
        if let Some(cap) = r.hard_cap {
            let load = m.by_reviewer[j].iter().filter(|&&v| x[v]).count() as u32;
            if load > cap {
                return Err(ModelError::HardViolation(format!(
                    "PC `{}` load {load} exceeds capacity {cap}",
                    r.id
                )));
            }
        }
    }
    Ok(())
}

/// Recomputes every objective term from the raw assignment, charging all
/// master coauthor terms.
pub fn evaluate_objective(m: &Model, x: &[bool]) -> Result<Objective, ModelError> {
    evaluate_scoped(m, x, CoauthorScope::Master)
}

/// Like [`evaluate_objective`] with a choice of coauthor terms.
pub fn evaluate_scoped(m: &Model, x: &[bool], scope: CoauthorScope) -> Result<Objective, ModelError> {
    check_hard(m, x)?;
    let p = &m.params;
    let mut obj = Objective::default();

    for (v, var) in m.vars.iter().enumerate() {
        if x[v] {
            obj.matching += var.score;
        }
    }

    for (j, r) in m.reviewers.iter().enumerate() {
        let load = m.by_reviewer[j].iter().filter(|&&v| x[v]).count() as f64;
        for level in &r.levels {
            obj.capacity += level.penalty * (load - level.capacity as f64).max(0.0);
        }
    }

    let mut on_paper: Vec<Vec<usize>> = vec![Vec::new(); m.papers.len()];
    for (v, var) in m.vars.iter().enumerate() {
        if x[v] {
            on_paper[var.paper].push(var.reviewer);
        }
    }
    for (i, rs) in on_paper.iter().enumerate() {
        let sen: u32 = rs
            .iter()
            .filter(|&&r| m.reviewers[r].role == Role::Pc)
            .map(|&r| m.reviewers[r].seniority as u32)
            .sum();
        if sen < p.min_seniority {
            return Err(ModelError::HardViolation(format!(
                "paper `{}` seniority {sen} below minimum {}",
                m.papers[i].id, p.min_seniority
            )));
        }
        obj.seniority += p.reward_sen * sen.min(p.target_seniority) as f64;

        let distinct: BTreeSet<usize> = rs
            .iter()
            .filter(|&&r| m.reviewers[r].role.is_discussant())
            .map(|&r| m.reviewers[r].region)
            .collect();
        obj.region += p.reward_reg * distinct.len() as f64;
    }

    for (k, t) in m.coauthor_master.iter().enumerate() {
        if scope == CoauthorScope::Active && !m.coauthor_active[k] {
            continue;
        }
        if on_paper.iter().any(|rs| rs.contains(&t.a) && rs.contains(&t.b)) {
            obj.coauthor += t.penalty;
        }
    }

    match p.cycle_mode {
        CycleMode::PerAssignment => {
            for t in &m.cycles {
                if x[t.var] {
                    obj.cycle += p.p_cy;
                }
            }
        }
        CycleMode::PairSlack => {
            let mut hit = vec![false; m.cycle_pairs.len()];
            for t in &m.cycles {
                if x[t.var] && t.partner.is_some_and(|q| x[q]) {
                    hit[t.pair] = true;
                }
            }
            obj.cycle = p.p_cy * hit.iter().filter(|&&h| h).count() as f64;
        }
    }
    Ok(obj)
}

// ---------------------------------------------------------------------------
// LP export
// ---------------------------------------------------------------------------

struct Names {
    paper: Vec<String>,
    reviewer: Vec<String>,
    region: Vec<String>,
}

impl Names {
    fn new(m: &Model) -> Result<Self, ModelError> {
        let unique = |ids: Vec<String>| -> Result<Vec<String>, ModelError> {
            let mut seen = BTreeSet::new();
            for s in &ids {
                if !seen.insert(s.clone()) {
                    return Err(ModelError::Lp(LpError::NameCollision(s.clone())));
                }
            }
            Ok(ids)
        };
        Ok(Names {
            paper: unique(m.papers.iter().map(|p| sanitize(&p.id)).collect())?,
            reviewer: unique(m.reviewers.iter().map(|r| sanitize(&r.id)).collect())?,
            region: unique(m.regions.iter().map(|r| sanitize(r)).collect())?,
        })
    }

    fn x(&self, m: &Model, v: usize) -> String {
        let var = &m.vars[v];
        format!("x_{}_{}", self.paper[var.paper], self.reviewer[var.reviewer])
    }
}

impl Model {
    /// LP rendering of the model with its active coauthor terms.
    ///
    /// Panics if sanitized ids collide; use [`Model::try_to_lp`] to get an
    /// error instead.
    pub fn to_lp(&self) -> LpProblem {
        self.try_to_lp().expect("model ids sanitize to unique names")
    }

    pub fn try_to_lp(&self) -> Result<LpProblem, ModelError> {
        let n = Names::new(self)?;
        let p = &self.params;
        let mut lp = LpProblem::default();
        let xs: Vec<String> = (0..self.vars.len()).map(|v| n.x(self, v)).collect();
        {
            let mut seen = BTreeSet::new();
            for name in &xs {
                if !seen.insert(name) {
                    return Err(ModelError::Lp(LpError::NameCollision(name.clone())));
                }
            }
        }

        for (v, var) in self.vars.iter().enumerate() {
            lp.objective.push((xs[v].clone(), var.score));
        }

        // paper quotas
        for (i, paper) in self.papers.iter().enumerate() {
            for role in Role::ALL {
                let terms: Vec<(String, f64)> = self.by_paper[i]
                    .iter()
                    .filter(|&&v| self.reviewers[self.vars[v].reviewer].role == role)
                    .map(|&v| (xs[v].clone(), 1.0))
                    .collect();
                if !terms.is_empty() {
                    lp.rows.push(Row {
                        name: format!("{}_{}", role.as_str().to_ascii_lowercase(), n.paper[i]),
                        terms,
                        sense: Sense::Le,
                        rhs: paper.quota[role.index()] as f64,
                    });
                }
            }
        }

        // reviewer loads
        for (j, r) in self.reviewers.iter().enumerate() {
            if self.by_reviewer[j].is_empty() {
                continue;
            }
            let load: Vec<(String, f64)> = self.by_reviewer[j].iter().map(|&v| (xs[v].clone(), 1.0)).collect();
            if let Some(cap) = r.hard_cap {
                lp.rows.push(Row {
                    name: format!("load_{}", n.reviewer[j]),
                    terms: load.clone(),
                    sense: Sense::Le,
                    rhs: cap as f64,
                });
            }
            for (w, level) in r.levels.iter().enumerate() {
                let slack = format!("scap_{}_{}", n.reviewer[j], w + 1);
                lp.objective.push((slack.clone(), level.penalty));
                let mut terms = load.clone();
                terms.push((slack.clone(), -1.0));
                lp.rows.push(Row {
                    name: format!("cap_{}_{}", n.reviewer[j], w + 1),
                    terms,
                    sense: Sense::Le,
                    rhs: level.capacity as f64,
                });
                lp.bounds.push(Bound {
                    var: slack,
                    lower: Some(0.0),
                    upper: None,
                });
            }
        }

        // seniority and region per paper
        for i in 0..self.papers.len() {
            let sen = format!("ssen_{}", n.paper[i]);
            lp.objective.push((sen.clone(), p.reward_sen));
            let mut terms = vec![(sen.clone(), 1.0)];
            for &v in &self.by_paper[i] {
                let r = &self.reviewers[self.vars[v].reviewer];
                if r.role == Role::Pc && r.seniority > 0 {
                    terms.push((xs[v].clone(), -(r.seniority as f64)));
                }
            }
            lp.rows.push(Row {
                name: format!("sen_{}", n.paper[i]),
                terms,
                sense: Sense::Le,
                rhs: 0.0,
            });
            lp.bounds.push(Bound {
                var: sen,
                lower: Some(p.min_seniority as f64),
                upper: Some(p.target_seniority as f64),
            });

            let mut by_region: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &v in &self.by_paper[i] {
                let r = &self.reviewers[self.vars[v].reviewer];
                if r.role.is_discussant() {
                    by_region.entry(r.region).or_default().push(v);
                }
            }
            if by_region.is_empty() {
                continue;
            }
            let reg = format!("reg_{}", n.paper[i]);
            lp.objective.push((reg.clone(), p.reward_reg));
            let mut reg_terms = vec![(reg.clone(), 1.0)];
            for (&g, vs) in &by_region {
                let ind = format!("v_{}_{}", n.paper[i], n.region[g]);
                reg_terms.push((ind.clone(), -1.0));
                let mut terms = vec![(ind.clone(), 1.0)];
                terms.extend(vs.iter().map(|&v| (xs[v].clone(), -1.0)));
                lp.rows.push(Row {
                    name: format!("reg_{}_{}", n.paper[i], n.region[g]),
                    terms,
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                lp.bounds.push(Bound {
                    var: ind,
                    lower: Some(0.0),
                    upper: Some(1.0),
                });
            }
            lp.rows.push(Row {
                name: format!("reg_{}", n.paper[i]),
                terms: reg_terms,
                sense: Sense::Le,
                rhs: 0.0,
            });
            lp.bounds.push(Bound {
                var: reg,
                lower: Some(0.0),
                upper: None,
            });
        }

        // active coauthor terms
        for (k, t) in self.coauthor_master.iter().enumerate() {
            if !self.coauthor_active[k] {
                continue;
            }
            let cad = format!("cad_{}_{}", n.reviewer[t.a], n.reviewer[t.b]);
            lp.objective.push((cad.clone(), t.penalty));
            for i in 0..self.papers.len() {
                let (Some(va), Some(vb)) = (self.var_index(i, t.a), self.var_index(i, t.b)) else {
                    continue;
                };
                lp.rows.push(Row {
                    name: format!("cad_{}_{}_{}", n.reviewer[t.a], n.reviewer[t.b], n.paper[i]),
                    terms: vec![(xs[va].clone(), 1.0), (xs[vb].clone(), 1.0), (cad.clone(), -1.0)],
                    sense: Sense::Le,
                    rhs: 1.0,
                });
            }
            lp.bounds.push(Bound {
                var: cad,
                lower: Some(0.0),
                upper: None,
            });
        }

        // bidding cycles
        match p.cycle_mode {
            CycleMode::PerAssignment => {
                for (t, term) in self.cycles.iter().enumerate() {
                    let s = format!("scy_{t}");
                    lp.objective.push((s.clone(), p.p_cy));
                    lp.rows.push(Row {
                        name: format!("cy_{t}"),
                        terms: vec![(xs[term.var].clone(), 1.0), (s.clone(), -1.0)],
                        sense: Sense::Le,
                        rhs: 0.0,
                    });
                    lp.bounds.push(Bound {
                        var: s,
                        lower: Some(0.0),
                        upper: None,
                    });
                }
            }
            CycleMode::PairSlack => {
                for (k, &(a, b)) in self.cycle_pairs.iter().enumerate() {
                    let s = format!("scy_{}_{}", n.reviewer[a], n.reviewer[b]);
                    lp.objective.push((s.clone(), p.p_cy));
                    lp.bounds.push(Bound {
                        var: s,
                        lower: Some(0.0),
                        upper: None,
                    });
                    let _ = k;
                }
                for (t, term) in self.cycles.iter().enumerate() {
                    let (a, b) = self.cycle_pairs[term.pair];
                    let s = format!("scy_{}_{}", n.reviewer[a], n.reviewer[b]);
                    let partner = term.partner.expect("pair mode cycles have partners");
                    lp.rows.push(Row {
                        name: format!("cy_{t}"),
                        terms: vec![(xs[term.var].clone(), 1.0), (xs[partner].clone(), 1.0), (s, -1.0)],
                        sense: Sense::Le,
                        rhs: 1.0,
                    });
                }
            }
        }

        for (v, var) in self.vars.iter().enumerate() {
            if var.fixed {
                lp.rows.push(Row {
                    name: format!("fix_{}", &xs[v][2..]),
                    terms: vec![(xs[v].clone(), 1.0)],
                    sense: Sense::Eq,
                    rhs: 1.0,
                });
            }
        }

        lp.binaries = xs;
        Ok(lp)
    }

    /// LP variable values for assignment `x` with every slack at its minimal
    /// feasible (objective-maximizing) value.
    pub fn minimal_slacks(&self, x: &[bool]) -> Result<BTreeMap<String, f64>, ModelError> {
        let n = Names::new(self)?;
        let p = &self.params;
        let mut vals = BTreeMap::new();
        for (v, &on) in x.iter().enumerate() {
            vals.insert(n.x(self, v), if on { 1.0 } else { 0.0 });
        }
        for (j, r) in self.reviewers.iter().enumerate() {
            let load = self.by_reviewer[j].iter().filter(|&&v| x[v]).count() as f64;
            for (w, level) in r.levels.iter().enumerate() {
                if !self.by_reviewer[j].is_empty() {
                    vals.insert(
                        format!("scap_{}_{}", n.reviewer[j], w + 1),
                        (load - level.capacity as f64).max(0.0),
                    );
                }
            }
        }
        for i in 0..self.papers.len() {
            let mut sen = 0u32;
            let mut regions = BTreeSet::new();
            for &v in &self.by_paper[i] {
                if !x[v] {
                    continue;
                }
                let r = &self.reviewers[self.vars[v].reviewer];
                if r.role == Role::Pc {
                    sen += r.seniority as u32;
                }
                if r.role.is_discussant() {
                    regions.insert(r.region);
                }
            }
            vals.insert(format!("ssen_{}", n.paper[i]), sen.min(p.target_seniority) as f64);
            let has_reg = self.by_paper[i]
                .iter()
                .any(|&v| self.reviewers[self.vars[v].reviewer].role.is_discussant());
            if has_reg {
                vals.insert(format!("reg_{}", n.paper[i]), regions.len() as f64);
                for &v in &self.by_paper[i] {
                    let r = &self.reviewers[self.vars[v].reviewer];
                    if r.role.is_discussant() {
                        vals.insert(
                            format!("v_{}_{}", n.paper[i], n.region[r.region]),
                            if regions.contains(&r.region) { 1.0 } else { 0.0 },
                        );
                    }
                }
            }
        }
        let realized = self.realized_coauthor_terms(x);
        for (k, t) in self.coauthor_master.iter().enumerate() {
            if self.coauthor_active[k] {
                vals.insert(
                    format!("cad_{}_{}", n.reviewer[t.a], n.reviewer[t.b]),
                    if realized.contains(&k) { 1.0 } else { 0.0 },
                );
            }
        }
        match p.cycle_mode {
            CycleMode::PerAssignment => {
                for (t, term) in self.cycles.iter().enumerate() {
                    vals.insert(format!("scy_{t}"), if x[term.var] { 1.0 } else { 0.0 });
                }
            }
            CycleMode::PairSlack => {
                for &(a, b) in &self.cycle_pairs {
                    vals.insert(format!("scy_{}_{}", n.reviewer[a], n.reviewer[b]), 0.0);
                }
                for term in &self.cycles {
                    let (a, b) = self.cycle_pairs[term.pair];
                    if x[term.var] && term.partner.is_some_and(|q| x[q]) {
                        vals.insert(format!("scy_{}_{}", n.reviewer[a], n.reviewer[b]), 1.0);
                    }
                }
            }
        }
        Ok(vals)
    }

    pub fn write_lp(&self, path: &std::path::Path) -> std::io::Result<()> {
        let lp = self
            .try_to_lp()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))?;
        std::fs::write(path, lp.write())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bids::FilteredBids;
    use crate::corpus::{BidLevel, CoauthorEdge, CoauthorGraph, SeniorityInputs};
    use crate::scoring::ScoreEntry;
    use crate::testutil::CorpusBuilder;
    use approx::assert_abs_diff_eq;

    fn entry(s: f64) -> ScoreEntry {
        ScoreEntry {
            sam: s,
            tpms_norm: None,
            acl_norm: None,
            base: s,
            bid: BidLevel::NotEntered,
            aggscore: s,
        }
    }

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::from_entries(
            rows.len(),
            rows.iter()
                .enumerate()
                .flat_map(|(p, row)| row.iter().enumerate().map(move |(r, &s)| (p, r, entry(s)))),
        )
    }

    fn quiet() -> MatchParams {
        MatchParams {
            gamma_pc: 4,
            gamma_spc: 0,
            gamma_ac: 0,
            reward_sen: 0.0,
            reward_reg: 0.0,
            p_cy: 0.0,
            ..MatchParams::default()
        }
    }

    #[test]
    fn defaults_validate() {
        MatchParams::default().validate().unwrap();
        let mut p = MatchParams::default();
        p.p_co_1 = -0.1;
        assert!(p.validate().is_err());
        let mut p = MatchParams::default();
        p.spc_levels[2].capacity = 12;
        assert!(p.validate().is_err());
    }

    #[test]
    fn top_k_per_paper() {
        let c = CorpusBuilder::new()
            .paper("p1", "k", &[], &["x"])
            .reviewer("a", Role::Pc, "k", &[])
            .reviewer("b", Role::Pc, "k", &[])
            .reviewer("c", Role::Pc, "k", &[])
            .build();
        let s = matrix(&[&[0.9, 0.5, 0.2]]);
        let mut p = MatchParams { k: 2, ..MatchParams::default() };
        // per-reviewer lists add every pair back unless k is tiny on that side too
        let pairs = candidate_pairs(&c, &s, &p);
        assert_eq!(pairs.len(), 3);
        p.k = 1;
        let s = matrix(&[&[0.9, 0.5, 0.2]]);
        let per_paper: BTreeSet<_> = candidate_pairs(&c, &s, &p);
        // each reviewer's single best paper is p1, so all three survive per reviewer
        assert_eq!(per_paper.len(), 3);
    }

    #[test]
    fn top_k_per_paper_only() {
        // every reviewer's top two papers are p1 and p2, so p3 keeps only its own top two
        let c = CorpusBuilder::new()
            .paper("p1", "k", &[], &["x"])
            .paper("p2", "k", &[], &["x"])
            .paper("p3", "k", &[], &["x"])
            .reviewer("a", Role::Pc, "k", &[])
            .reviewer("b", Role::Pc, "k", &[])
            .reviewer("c", Role::Pc, "k", &[])
            .build();
        let s = matrix(&[&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], &[0.9, 0.5, 0.2]]);
        let p = MatchParams { k: 2, ..MatchParams::default() };
        let pairs = candidate_pairs(&c, &s, &p);
        let p3: Vec<usize> = pairs.iter().filter(|x| x.0 == 2).map(|x| x.1).collect();
        assert_eq!(p3, vec![0, 1]);
    }

    #[test]
    fn threshold_drops_low_pairs() {
        let c = CorpusBuilder::new()
            .paper("p1", "k", &[], &["x"])
            .reviewer("a", Role::Pc, "k", &[])
            .reviewer("b", Role::Pc, "k", &[])
            .build();
        let s = matrix(&[&[0.10, 0.15]]);
        let pairs = candidate_pairs(&c, &s, &MatchParams::default());
        assert_eq!(pairs.into_iter().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn distances_truncate_at_two() {
        let mut g = CoauthorGraph::new();
        let e = CoauthorEdge { paper_count: 1, last_year: 2000 };
        g.add_edge("a", "b", e);
        g.add_edge("b", "c", e);
        g.add_edge("c", "d", e);
        let c = CorpusBuilder::new()
            .reviewer("a", Role::Pc, "k", &[])
            .reviewer("b", Role::Spc, "k", &[])
            .reviewer("c", Role::Pc, "k", &[])
            .reviewer("d", Role::Pc, "k", &[])
            .reviewer("e", Role::Ac, "k", &[])
            .graph(g)
            .build();
        let d = reviewer_distances(&c);
        assert_eq!(d.get(&(0, 1)), Some(&1));
        assert_eq!(d.get(&(0, 2)), Some(&2));
        assert_eq!(d.get(&(0, 3)), None);
    }

    #[test]
    fn cycles_are_swap_closed() {
        let c = CorpusBuilder::new()
            .paper("pa", "k", &[], &["a"])
            .paper("pb", "k", &[], &["b"])
            .reviewer("a", Role::Pc, "k", &[])
            .reviewer("b", Role::Spc, "k", &[])
            .bid("a", "pb", BidLevel::Eager)
            .bid("b", "pa", BidLevel::Willing)
            .build();
        let cy = cycle_set(&c, &FilteredBids::unfiltered(&c));
        assert_eq!(cy.len(), 2);
        for t in &cy {
            assert!(cy.contains(&CycleTuple { j: t.j2, j2: t.j, i: t.i2, i2: t.i }));
        }
    }

    #[test]
    fn empty_model_is_zero() {
        let c = CorpusBuilder::new().build();
        let m = build_model(
            &c,
            &ScoreMatrix::default(),
            &ConflictSet::new(),
            &FilteredBids::default(),
            &MatchParams::default(),
            &BuildOptions::default(),
        )
        .unwrap();
        assert_eq!(m.num_vars(), 0);
        assert_eq!(evaluate_objective(&m, &[]).unwrap().total(), 0.0);
    }

    fn four_pc_fixture() -> (Corpus, ScoreMatrix) {
        let mut g = CoauthorGraph::new();
        g.add_edge("r1", "r2", CoauthorEdge { paper_count: 1, last_year: 1990 });
        let sen = |c, p| SeniorityInputs { prior_committee_count: c, published_paper_count: p };
        let c = CorpusBuilder::new()
            .region("A")
            .region("B")
            .paper("p1", "k", &[], &["x"])
            .paper("p2", "k", &[], &["y"])
            .reviewer_with("r1", Role::Pc, "k", &[], |r| {
                r.seniority_inputs = sen(3, 0);
                r.region = "A".into();
            })
            .reviewer_with("r2", Role::Pc, "k", &[], |r| {
                r.seniority_inputs = sen(0, 5);
                r.region = "A".into();
            })
            .reviewer_with("r3", Role::Pc, "k", &[], |r| {
                r.seniority_inputs = sen(0, 0);
                r.region = "B".into();
            })
            .reviewer_with("r4", Role::Pc, "k", &[], |r| {
                r.seniority_inputs = sen(1, 0);
                r.region = "B".into();
            })
            .graph(g)
            .build();
        let s = matrix(&[&[0.9, 0.8, 0.7, 0.6], &[0.5, 0.4, 0.3, 0.2]]);
        (c, s)
    }

    #[test]
    fn hand_summed_objective() {
        let (c, s) = four_pc_fixture();
        let m = build_model(
            &c,
            &s,
            &ConflictSet::new(),
            &FilteredBids::unfiltered(&c),
            &MatchParams::default(),
            &BuildOptions::default(),
        )
        .unwrap();
        // p1 <- r1, r2 ; p2 <- r3, r4
        let want = [(0, 0), (0, 1), (1, 2), (1, 3)];
        let x: Vec<bool> = m
            .vars
            .iter()
            .map(|v| want.contains(&(v.paper, v.reviewer)))
            .collect();
        let o = evaluate_objective(&m, &x).unwrap();
        assert_abs_diff_eq!(o.matching, 0.9 + 0.8 + 0.3 + 0.2, epsilon = 1e-12);
        // seniorities: r1=3, r2=2 -> clip(5)=4 ; r3=0, r4=1 -> 1
        assert_abs_diff_eq!(o.seniority, 4.0 * 4.0 + 4.0 * 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.coauthor, -0.3, epsilon = 1e-12);
        // p1 regions {A}, p2 regions {B}
        assert_abs_diff_eq!(o.region, 0.1 + 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(o.capacity, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.cycle, 0.0, epsilon = 1e-12);

        let lp = m.to_lp();
        let vals = m.minimal_slacks(&x).unwrap();
        assert!(lp.violations(&vals, 1e-9).is_empty());
        assert_abs_diff_eq!(lp.objective_value(&vals), o.total(), epsilon = 1e-9);
    }

    #[test]
    fn region_and_capacity_terms() {
        let mut c = CorpusBuilder::new().region("A").region("B").paper("p1", "k", &[], &["x"]);
        for (id, reg) in [("a", "A"), ("b", "A"), ("c", "B")] {
            c = c.reviewer_with(id, Role::Pc, "k", &[], |r| r.region = reg.into());
        }
        let c = c.build();
        let s = matrix(&[&[0.5, 0.5, 0.5]]);
        let params = MatchParams { gamma_pc: 3, ..MatchParams::default() };
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &params, &BuildOptions::default())
            .unwrap();
        let o = evaluate_objective(&m, &[true, true, true]).unwrap();
        assert_abs_diff_eq!(o.region, 0.2, epsilon = 1e-12);
    }

    #[test]
    fn spc_levels_charge_cumulatively() {
        let mut b = CorpusBuilder::new().reviewer("s", Role::Spc, "k", &[]);
        for i in 0..13 {
            b = b.paper(&format!("p{i:02}"), "k", &[], &["x"]);
        }
        let c = b.build();
        let s = matrix(&vec![&[0.5][..]; 13]);
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &quiet_spc(), &BuildOptions::default())
            .unwrap();
        let o = evaluate_objective(&m, &vec![true; 13]).unwrap();
        // 13 over levels 8 and 12 by 5 and 1
        assert_abs_diff_eq!(o.capacity, -0.05 * 6.0, epsilon = 1e-12);
    }

    fn quiet_spc() -> MatchParams {
        MatchParams {
            gamma_spc: 1,
            ..quiet()
        }
    }

    #[test]
    fn hard_violations_are_named() {
        let (c, s) = four_pc_fixture();
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &quiet(), &BuildOptions::default())
            .unwrap();
        let mut p = quiet();
        p.gamma_pc = 1;
        let m1 = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &p, &BuildOptions::default())
            .unwrap();
        let x = vec![true; m1.num_vars()];
        assert!(matches!(evaluate_objective(&m1, &x), Err(ModelError::HardViolation(_))));
        assert!(evaluate_objective(&m, &vec![false; m.num_vars()]).is_ok());
    }

    #[test]
    fn fixed_pairs_outside_candidates_are_added() {
        let (c, _) = four_pc_fixture();
        let s = matrix(&[&[0.9, 0.8, 0.7, 0.1], &[0.5, 0.4, 0.3, 0.2]]);
        let opts = BuildOptions {
            fixed: [("p1".to_string(), "r4".to_string())].into_iter().collect(),
            ..Default::default()
        };
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &quiet(), &opts).unwrap();
        let v = m.var_index(0, 3).unwrap();
        assert!(m.vars[v].fixed);
        assert_abs_diff_eq!(m.vars[v].score, 0.1, epsilon = 1e-12);
        let lp = m.to_lp();
        assert!(lp.rows.iter().any(|r| r.name == "fix_p1_r4"));

        let mut cs = ConflictSet::new();
        cs.insert("p1", "r4", crate::coi::ConflictReason::Advisor);
        assert!(matches!(
            build_model(&c, &s, &cs, &FilteredBids::default(), &quiet(), &opts),
            Err(ModelError::FixedConflict { .. })
        ));
    }

    #[test]
    fn per_phase_mode_raises_limits() {
        let (c, s) = four_pc_fixture();
        let opts = BuildOptions {
            fixed: [("p1".to_string(), "r1".to_string())].into_iter().collect(),
            capacity_mode: CapacityMode::PerPhase,
            ..Default::default()
        };
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &quiet(), &opts).unwrap();
        assert_eq!(m.reviewers[0].hard_cap, Some(4));
        assert_eq!(m.reviewers[1].hard_cap, Some(3));
    }

    #[test]
    fn lp_single_variable() {
        let c = CorpusBuilder::new()
            .paper("p1", "k", &[], &["x"])
            .reviewer("r1", Role::Pc, "k", &[])
            .build();
        let s = matrix(&[&[0.5]]);
        let p = MatchParams { reward_sen: 0.0, reward_reg: 0.0, ..quiet() };
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &p, &BuildOptions::default()).unwrap();
        let text = m.to_lp().write();
        assert!(text.contains("obj: 0.5 x_p1_r1"));
        assert_eq!(crate::lp::parse_lp(&text).unwrap(), m.to_lp());
    }

    #[test]
    fn colliding_names_error() {
        let c = CorpusBuilder::new()
            .paper("p-1", "k", &[], &["x"])
            .paper("p_1", "k", &[], &["x"])
            .reviewer("r1", Role::Pc, "k", &[])
            .build();
        let s = matrix(&[&[0.5], &[0.5]]);
        let m = build_model(&c, &s, &ConflictSet::new(), &FilteredBids::default(), &quiet(), &BuildOptions::default()).unwrap();
        assert!(matches!(m.try_to_lp(), Err(ModelError::Lp(LpError::NameCollision(_)))));
    }
}
