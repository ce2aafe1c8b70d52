//! Solver backends for the assignment model, lazy coauthor-term generation
//! and multi-phase decomposition.
//!
//! Both backends share [`State`], an incremental evaluator of the model's
//! objective under its active coauthor terms.

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bids::FilteredBids;
use crate::coi::ConflictSet;
use crate::corpus::{Corpus, Role};
use crate::model::{
    build_model, evaluate_objective, evaluate_scoped, BuildOptions, CapacityMode, CoauthorScope, CycleMode,
    MatchParams, Model, ModelError, Objective,
};
use crate::scoring::ScoreMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("exhaustive search exceeded {limit} nodes")]
    TooLarge { limit: u64 },
    #[error("model is infeasible: {0}")]
    Infeasible(String),
    #[error("phase quotas {got:?} do not sum to the target {want:?}")]
    PhaseMismatch { got: [u32; 3], want: [u32; 3] },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapReached,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Coauthor terms added after this iteration's solve.
    pub added: usize,
    /// Objective of this iteration's solve under the terms active during it.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// One flag per model variable.
    pub assignment: Vec<bool>,
    /// Objective with every potential coauthor penalty charged.
    pub objective: Objective,
    /// Objective under the active coauthor terms only.
    pub reported: Objective,
    pub iterations: Vec<IterationRecord>,
    pub upper_bound: f64,
    pub status: SolveStatus,
    /// Wall time per iteration. Kept out of the serialized report so that
    /// reruns stay byte-identical.
    #[serde(skip)]
    pub timings: Vec<Duration>,
}

impl SolveReport {
    pub fn to_json(&self, m: &Model, with_timings: bool) -> serde_json::Value {
        let pairs: Vec<serde_json::Value> = m
            .pairs(&self.assignment)
            .into_iter()
            .map(|(p, r)| serde_json::json!([p, r]))
            .collect();
        let mut v = serde_json::json!({
            "status": self.status,
            "objective": self.objective,
            "objective_total": self.objective.total(),
            "reported": self.reported,
            "reported_total": self.reported.total(),
            "upper_bound": self.upper_bound,
            "iterations": self.iterations,
            "assignment": pairs,
        });
        if with_timings {
            v["timings_ms"] = serde_json::json!(self
                .timings
                .iter()
                .map(|d| d.as_secs_f64() * 1e3)
                .collect::<Vec<_>>());
        }
        v
    }
}

// ---------------------------------------------------------------------------
// Incremental state
// ---------------------------------------------------------------------------

/// Penalty weight per unit of missing seniority; keeps the heuristic steering
/// toward feasibility before optimizing.
const SHORTFALL_WEIGHT: f64 = 1e4;

#[derive(Clone)]
pub(crate) struct State<'a> {
    m: &'a Model,
    pub(crate) x: Vec<bool>,
    load: Vec<u32>,
    roles: Vec<[u32; 3]>,
    sen: Vec<u32>,
    region_counts: Vec<Vec<u32>>,
    on_paper: Vec<Vec<usize>>,
    co_term: HashMap<(usize, usize), usize>,
    co_count: Vec<u32>,
    cy_by_var: Vec<Vec<usize>>,
    pair_hits: Vec<u32>,
    pub(crate) obj: Objective,
    shortfall: u32,
}

impl<'a> State<'a> {
    pub(crate) fn new(m: &'a Model, scope: CoauthorScope) -> Self {
        let mut co_term = HashMap::new();
        for (k, t) in m.coauthor_master.iter().enumerate() {
            if scope == CoauthorScope::Master || m.coauthor_active[k] {
                co_term.insert((t.a, t.b), k);
            }
        }
        let mut cy_by_var = vec![Vec::new(); m.vars.len()];
        for (t, term) in m.cycles.iter().enumerate() {
            cy_by_var[term.var].push(t);
            if let Some(q) = term.partner {
                cy_by_var[q].push(t);
            }
        }
        let p = &m.params;
        let shortfall = p.min_seniority * m.papers.len() as u32;
        State {
            m,
            x: vec![false; m.vars.len()],
            load: vec![0; m.reviewers.len()],
            roles: vec![[0; 3]; m.papers.len()],
            sen: vec![0; m.papers.len()],
            region_counts: vec![vec![0; m.regions.len()]; m.papers.len()],
            on_paper: vec![Vec::new(); m.papers.len()],
            co_term,
            co_count: vec![0; m.coauthor_master.len()],
            cy_by_var,
            pair_hits: vec![0; m.cycle_pairs.len()],
            obj: Objective::default(),
            shortfall,
        }
    }

    pub(crate) fn from_assignment(m: &'a Model, scope: CoauthorScope, x: &[bool]) -> Self {
        let mut s = State::new(m, scope);
        for (v, &on) in x.iter().enumerate() {
            if on {
                s.add(v);
            }
        }
        s
    }

    pub(crate) fn total(&self) -> f64 {
        self.obj.total()
    }

    /// Objective with unmet minimum seniority heavily penalized.
    fn penalized(&self) -> f64 {
        self.obj.total() - SHORTFALL_WEIGHT * self.shortfall as f64
    }

    fn can_add(&self, v: usize) -> bool {
        if self.x[v] {
            return false;
        }
        let var = &self.m.vars[v];
        let r = &self.m.reviewers[var.reviewer];
        if self.roles[var.paper][r.role.index()] >= self.m.papers[var.paper].quota[r.role.index()] {
            return false;
        }
        r.hard_cap.is_none_or(|cap| self.load[var.reviewer] < cap)
    }

    fn sen_term(&self, sen: u32) -> (f64, u32) {
        let p = &self.m.params;
        (
            p.reward_sen * sen.min(p.target_seniority) as f64,
            p.min_seniority.saturating_sub(sen),
        )
    }

    pub(crate) fn add(&mut self, v: usize) {
        debug_assert!(!self.x[v]);
        let m = self.m;
        let p = &m.params;
        let var = m.vars[v];
        let (i, j) = (var.paper, var.reviewer);
        let r = &m.reviewers[j];

        self.obj.matching += var.score;
        let l = self.load[j];
        for level in &r.levels {
            if l >= level.capacity {
                self.obj.capacity += level.penalty;
            }
        }
        self.load[j] = l + 1;
        self.roles[i][r.role.index()] += 1;

        if r.role == Role::Pc && r.seniority > 0 {
            let (old_r, old_s) = self.sen_term(self.sen[i]);
            self.sen[i] += r.seniority as u32;
            let (new_r, new_s) = self.sen_term(self.sen[i]);
            self.obj.seniority += new_r - old_r;
            self.shortfall = self.shortfall - old_s + new_s;
        }

        if r.role.is_discussant() {
            let c = &mut self.region_counts[i][r.region];
            if *c == 0 {
                self.obj.region += p.reward_reg;
            }
            *c += 1;
            for &o in &self.on_paper[i] {
                if !m.reviewers[o].role.is_discussant() {
                    continue;
                }
                if let Some(&k) = self.co_term.get(&(j.min(o), j.max(o))) {
                    if self.co_count[k] == 0 {
                        self.obj.coauthor += m.coauthor_master[k].penalty;
                    }
                    self.co_count[k] += 1;
                }
            }
        }
        self.on_paper[i].push(j);

        match p.cycle_mode {
            CycleMode::PerAssignment => {
                for &t in &self.cy_by_var[v] {
                    if m.cycles[t].var == v {
                        self.obj.cycle += p.p_cy;
                    }
                }
            }
            CycleMode::PairSlack => {
                for &t in &self.cy_by_var[v] {
                    let term = &m.cycles[t];
                    let other = if term.var == v { term.partner } else { Some(term.var) };
                    if other.is_some_and(|o| o != v && self.x[o]) {
                        if self.pair_hits[term.pair] == 0 {
                            self.obj.cycle += p.p_cy;
                        }
                        self.pair_hits[term.pair] += 1;
                    }
                }
            }
        }
        self.x[v] = true;
    }

    pub(crate) fn remove(&mut self, v: usize) {
        debug_assert!(self.x[v]);
        let m = self.m;
        let p = &m.params;
        let var = m.vars[v];
        let (i, j) = (var.paper, var.reviewer);
        let r = &m.reviewers[j];
        self.x[v] = false;

        match p.cycle_mode {
            CycleMode::PerAssignment => {
                for &t in &self.cy_by_var[v] {
                    if m.cycles[t].var == v {
                        self.obj.cycle -= p.p_cy;
                    }
                }
            }
            CycleMode::PairSlack => {
                for &t in &self.cy_by_var[v] {
                    let term = &m.cycles[t];
                    let other = if term.var == v { term.partner } else { Some(term.var) };
                    if other.is_some_and(|o| o != v && self.x[o]) {
                        self.pair_hits[term.pair] -= 1;
                        if self.pair_hits[term.pair] == 0 {
                            self.obj.cycle -= p.p_cy;
                        }
                    }
                }
            }
        }

        let pos = self.on_paper[i].iter().position(|&o| o == j).expect("assigned reviewer listed");
        self.on_paper[i].swap_remove(pos);
        if r.role.is_discussant() {
            for &o in &self.on_paper[i] {
                if !m.reviewers[o].role.is_discussant() {
                    continue;
                }
                if let Some(&k) = self.co_term.get(&(j.min(o), j.max(o))) {
                    self.co_count[k] -= 1;
                    if self.co_count[k] == 0 {
                        self.obj.coauthor -= m.coauthor_master[k].penalty;
                    }
                }
            }
            let c = &mut self.region_counts[i][r.region];
            *c -= 1;
            if *c == 0 {
                self.obj.region -= p.reward_reg;
            }
        }

        if r.role == Role::Pc && r.seniority > 0 {
            let (old_r, old_s) = self.sen_term(self.sen[i]);
            self.sen[i] -= r.seniority as u32;
            let (new_r, new_s) = self.sen_term(self.sen[i]);
            self.obj.seniority += new_r - old_r;
            self.shortfall = self.shortfall - old_s + new_s;
        }

        self.roles[i][r.role.index()] -= 1;
        let l = self.load[j] - 1;
        self.load[j] = l;
        for level in &r.levels {
            if l >= level.capacity {
                self.obj.capacity -= level.penalty;
            }
        }
        self.obj.matching -= var.score;
    }
}

// ---------------------------------------------------------------------------
// Backends
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capabilities {
    pub exact: bool,
    pub heuristic: bool,
}

/// A solver for a single model under its active coauthor terms.
pub trait SolverBackend {
    fn capabilities(&self) -> Capabilities;
    /// Solves `m`; `warm` is an optional feasible starting assignment.
    fn solve(&self, m: &Model, warm: Option<&[bool]>) -> Result<SolveReport, SolveError>;
}

pub const DEFAULT_NODE_LIMIT: u64 = 1 << 22;

/// Depth-first branch and bound over per-paper reviewer subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactSolver {
    pub node_limit: u64,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver {
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicSolver {
    pub seed: u64,
    /// Perturbation restarts after the first local optimum.
    pub restarts: usize,
    /// Share of assigned, non-fixed pairs dropped by a perturbation.
    pub perturb: f64,
    #[serde(with = "opt_secs")]
    pub time_limit: Option<Duration>,
}

impl Default for HeuristicSolver {
    fn default() -> Self {
        HeuristicSolver {
            seed: 0,
            restarts: 40,
            perturb: 0.3,
            time_limit: None,
        }
    }
}

mod opt_secs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Option<Duration>, s: S) -> Result<S::Ok, S::Error> {
        d.map(|d| d.as_secs_f64()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let secs = Option::<f64>::deserialize(d)?;
        match secs {
            Some(s) if !(s.is_finite() && s >= 0.0) => Err(serde::de::Error::custom("time limit must be >= 0")),
            other => Ok(other.map(Duration::from_secs_f64)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Exact(ExactSolver),
    Heuristic(HeuristicSolver),
}

impl SolverBackend for Backend {
    fn capabilities(&self) -> Capabilities {
        match self {
            Backend::Exact(s) => s.capabilities(),
            Backend::Heuristic(s) => s.capabilities(),
        }
    }

    fn solve(&self, m: &Model, warm: Option<&[bool]>) -> Result<SolveReport, SolveError> {
        match self {
            Backend::Exact(s) => s.solve(m, warm),
            Backend::Heuristic(s) => s.solve(m, warm),
        }
    }
}

fn finish(m: &Model, x: Vec<bool>, status: SolveStatus, started: Instant) -> Result<SolveReport, SolveError> {
    let reported = State::from_assignment(m, CoauthorScope::Active, &x).obj;
    let objective = State::from_assignment(m, CoauthorScope::Master, &x).obj;
    Ok(SolveReport {
        assignment: x,
        objective,
        reported,
        iterations: vec![IterationRecord {
            iteration: 0,
            added: 0,
            objective: reported.total(),
        }],
        upper_bound: reported.total(),
        status,
        timings: vec![started.elapsed()],
    })
}

struct Choice {
    vars: Vec<usize>,
    value: f64,
}

/// Every feasible per-paper assignment with its paper-local objective value,
/// best first.
fn paper_choices(m: &Model, i: usize, limit: u64) -> Result<Vec<Choice>, SolveError> {
    let p = &m.params;
    let quota = m.papers[i].quota;
    let mut fixed = Vec::new();
    let mut free: [Vec<usize>; 3] = Default::default();
    let mut fixed_roles = [0u32; 3];
    for &v in &m.by_paper[i] {
        let role = m.reviewers[m.vars[v].reviewer].role.index();
        if m.vars[v].fixed {
            fixed.push(v);
            fixed_roles[role] += 1;
        } else {
            free[role].push(v);
        }
    }
    // subsets per role of size <= remaining quota, in lexicographic order
    let mut per_role: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut count: u64 = 1;
    for role in 0..3 {
        let room = quota[role].saturating_sub(fixed_roles[role]) as usize;
        let mut subsets = vec![Vec::new()];
        subsets_upto(&free[role], room, &mut Vec::new(), 0, &mut subsets, limit)?;
        count = count.saturating_mul(subsets.len() as u64);
        if count > limit {
            return Err(SolveError::TooLarge { limit });
        }
        per_role.push(subsets);
    }
    let per_assignment_cycle: Vec<f64> = match p.cycle_mode {
        CycleMode::PerAssignment => {
            let mut c = vec![0.0; m.vars.len()];
            for t in &m.cycles {
                c[t.var] += p.p_cy;
            }
            c
        }
        CycleMode::PairSlack => vec![0.0; m.vars.len()],
    };
    let mut out = Vec::new();
    for a in &per_role[0] {
        for b in &per_role[1] {
            for c in &per_role[2] {
                let mut vars: Vec<usize> = fixed.iter().chain(a).chain(b).chain(c).copied().collect();
                vars.sort_unstable();
                let mut sen = 0u32;
                let mut regions = BTreeSet::new();
                let mut value = 0.0;
                for &v in &vars {
                    let r = &m.reviewers[m.vars[v].reviewer];
                    value += m.vars[v].score + per_assignment_cycle[v];
                    if r.role == Role::Pc {
                        sen += r.seniority as u32;
                    }
                    if r.role.is_discussant() {
                        regions.insert(r.region);
                    }
                }
                if sen < p.min_seniority {
                    continue;
                }
                value += p.reward_sen * sen.min(p.target_seniority) as f64 + p.reward_reg * regions.len() as f64;
                out.push(Choice { vars, value });
            }
        }
    }
    out.sort_by(|x, y| y.value.total_cmp(&x.value));
    Ok(out)
}

fn subsets_upto(
    items: &[usize],
    room: usize,
    cur: &mut Vec<usize>,
    start: usize,
    out: &mut Vec<Vec<usize>>,
    limit: u64,
) -> Result<(), SolveError> {
    if cur.len() == room {
        return Ok(());
    }
    for k in start..items.len() {
        cur.push(items[k]);
        out.push(cur.clone());
        if out.len() as u64 > limit {
            return Err(SolveError::TooLarge { limit });
        }
        subsets_upto(items, room, cur, k + 1, out, limit)?;
        cur.pop();
    }
    Ok(())
}

struct Search<'a, 'm> {
    m: &'m Model,
    choices: &'a [Vec<Choice>],
    /// Optimistic value of papers d.. ignoring reviewer loads.
    suffix: Vec<f64>,
    state: State<'m>,
    best: f64,
    best_x: Option<Vec<bool>>,
    /// Known achievable value; nodes whose bound falls below it are pruned.
    floor: f64,
    nodes: u64,
    limit: u64,
}

const EPS: f64 = 1e-9;

impl Search<'_, '_> {
    fn pc_feasible(&self, c: &Choice) -> bool {
        c.vars.iter().all(|&v| {
            let j = self.m.vars[v].reviewer;
            self.m.reviewers[j].hard_cap.is_none_or(|cap| self.state.load[j] < cap)
        })
    }

    fn prune(&self, bound: f64) -> bool {
        bound < self.floor - EPS || bound <= self.best + 1e-12
    }

    /// Load-aware optimistic value of papers d..
    fn rest_bound(&self, d: usize) -> Option<f64> {
        let mut total = 0.0;
        for cs in &self.choices[d..] {
            total += cs.iter().find(|c| self.pc_feasible(c))?.value;
        }
        Some(total)
    }

    fn dfs(&mut self, d: usize) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(SolveError::TooLarge { limit: self.limit });
        }
        if d == self.choices.len() {
            let val = self.state.total();
            if val > self.best + 1e-12 {
                self.best = val;
                self.best_x = Some(self.state.x.clone());
            }
            return Ok(());
        }
        let choices = self.choices;
        for c in &choices[d] {
            if self.prune(self.state.total() + c.value + self.suffix[d + 1]) {
                break;
            }
            if !self.pc_feasible(c) {
                continue;
            }
            for &v in &c.vars {
                self.state.add(v);
            }
            let go = match self.rest_bound(d + 1) {
                Some(rest) => !self.prune(self.state.total() + rest),
                None => false,
            };
            if go {
                self.dfs(d + 1)?;
            }
            for &v in c.vars.iter().rev() {
                self.state.remove(v);
            }
        }
        Ok(())
    }
}

impl SolverBackend for ExactSolver {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exact: true,
            heuristic: false,
        }
    }

    fn solve(&self, m: &Model, warm: Option<&[bool]>) -> Result<SolveReport, SolveError> {
        let started = Instant::now();
        let mut choices = Vec::with_capacity(m.papers.len());
        for i in 0..m.papers.len() {
            let cs = paper_choices(m, i, self.node_limit)?;
            if cs.is_empty() {
                return Err(SolveError::Infeasible(format!(
                    "paper `{}` cannot reach the minimum seniority",
                    m.papers[i].id
                )));
            }
            choices.push(cs);
        }
        let mut suffix = vec![0.0; choices.len() + 1];
        for d in (0..choices.len()).rev() {
            suffix[d] = suffix[d + 1] + choices[d][0].value;
        }
        let floor = match warm {
            Some(x) if evaluate_scoped(m, x, CoauthorScope::Active).is_ok() => {
                State::from_assignment(m, CoauthorScope::Active, x).total()
            }
            _ => f64::NEG_INFINITY,
        };
        let mut search = Search {
            m,
            choices: &choices,
            suffix,
            state: State::new(m, CoauthorScope::Active),
            best: f64::NEG_INFINITY,
            best_x: None,
            floor,
            nodes: 0,
            limit: self.node_limit,
        };
        search.dfs(0)?;
        let x = search
            .best_x
            .ok_or_else(|| SolveError::Infeasible("no assignment satisfies the hard constraints".into()))?;
        finish(m, x, SolveStatus::Optimal, started)
    }
}

/// Optimistic objective: per paper, the best scores of each role up to quota
/// plus full seniority and region rewards; penalties are ignored.
pub fn optimistic_bound(m: &Model) -> f64 {
    let p = &m.params;
    let mut total = 0.0;
    for i in 0..m.papers.len() {
        let mut by_role: [Vec<f64>; 3] = Default::default();
        let mut regions = BTreeSet::new();
        let mut max_sen = 0u32;
        for &v in &m.by_paper[i] {
            let r = &m.reviewers[m.vars[v].reviewer];
            by_role[r.role.index()].push(m.vars[v].score);
            if r.role.is_discussant() {
                regions.insert(r.region);
            }
            if r.role == Role::Pc {
                max_sen += r.seniority as u32;
            }
        }
        let mut discussant_slots = 0usize;
        for role in Role::ALL {
            let list = &mut by_role[role.index()];
            list.sort_by(|a, b| b.total_cmp(a));
            let take = (m.papers[i].quota[role.index()] as usize).min(list.len());
            total += list[..take].iter().sum::<f64>();
            if role.is_discussant() {
                discussant_slots += take;
            }
        }
        total += p.reward_sen * max_sen.min(p.target_seniority) as f64;
        total += p.reward_reg * regions.len().min(discussant_slots) as f64;
    }
    total
}

struct Local<'m> {
    state: State<'m>,
}

impl<'m> Local<'m> {
    fn try_move(&mut self, remove: &[usize], add: &[usize]) -> bool {
        self.try_move_fill(remove, add, None)
    }

    /// Applies the move, optionally refilling one paper with its best
    /// addable candidate, and keeps it only on strict improvement.
    fn try_move_fill(&mut self, remove: &[usize], add: &[usize], refill: Option<usize>) -> bool {
        let before = self.state.penalized();
        let saved = self.state.obj;
        let saved_short = self.state.shortfall;
        for &v in remove {
            self.state.remove(v);
        }
        let mut added = Vec::with_capacity(add.len() + 1);
        let mut ok = true;
        for &v in add {
            if self.state.can_add(v) {
                self.state.add(v);
                added.push(v);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            if let Some(i) = refill {
                if let Some(v) = self.best_addition(i) {
                    self.state.add(v);
                    added.push(v);
                }
            }
        }
        if ok && self.state.penalized() > before + EPS {
            return true;
        }
        for &v in added.iter().rev() {
            self.state.remove(v);
        }
        for &v in remove.iter().rev() {
            self.state.add(v);
        }
        // restore exact totals so reverted moves leave no rounding drift
        self.state.obj = saved;
        self.state.shortfall = saved_short;
        false
    }

    /// The addable candidate of paper `i` with the largest positive gain.
    fn best_addition(&mut self, i: usize) -> Option<usize> {
        let m = self.state.m;
        let mut best: Option<(f64, usize)> = None;
        let base = self.state.penalized();
        for &v in &m.by_paper[i] {
            if !self.state.can_add(v) {
                continue;
            }
            let saved = self.state.obj;
            let saved_short = self.state.shortfall;
            self.state.add(v);
            let gain = self.state.penalized() - base;
            self.state.remove(v);
            self.state.obj = saved;
            self.state.shortfall = saved_short;
            if gain > EPS && best.is_none_or(|(g, _)| gain > g) {
                best = Some((gain, v));
            }
        }
        best.map(|(_, v)| v)
    }

    fn greedy(&mut self, order: &[usize]) {
        for &i in order {
            while let Some(v) = self.best_addition(i) {
                self.state.add(v);
            }
        }
    }

    /// First-improvement descent until a full pass finds nothing.
    fn descend(&mut self, deadline: Option<Instant>) -> bool {
        let m = self.state.m;
        loop {
            if deadline.is_some_and(|d| Instant::now() >= d) {
                return false;
            }
            let mut improved = false;
            for i in 0..m.papers.len() {
                for &v in &m.by_paper[i] {
                    if self.state.x[v] {
                        if m.vars[v].fixed {
                            continue;
                        }
                        if self.try_move(&[v], &[]) {
                            improved = true;
                            continue;
                        }
                        // replace within the paper
                        for &u in &m.by_paper[i] {
                            if u != v && !self.state.x[u] && self.try_move(&[v], &[u]) {
                                improved = true;
                                break;
                            }
                        }
                        if !self.state.x[v] {
                            continue;
                        }
                        // move the reviewer to another paper
                        let j = m.vars[v].reviewer;
                        for &u in &m.by_reviewer[j] {
                            if u != v && !self.state.x[u] && self.try_move_fill(&[v], &[u], Some(i)) {
                                improved = true;
                                break;
                            }
                        }
                        if !self.state.x[v] {
                            continue;
                        }
                        // swap reviewers with another paper
                        'swap: for &w in &m.by_reviewer[j] {
                            let i2 = m.vars[w].paper;
                            if i2 == i {
                                continue;
                            }
                            for &y in &m.by_paper[i2] {
                                if !self.state.x[y] || m.vars[y].fixed {
                                    continue;
                                }
                                let j2 = m.vars[y].reviewer;
                                if j2 == j || self.state.x[w] {
                                    continue;
                                }
                                let Some(z) = m.var_index(i, j2) else { continue };
                                if self.state.x[z] {
                                    continue;
                                }
                                if self.try_move(&[v, y], &[w, z]) {
                                    improved = true;
                                    break 'swap;
                                }
                            }
                        }
                    } else if self.try_move(&[], &[v]) {
                        improved = true;
                    }
                }
            }
            if !improved {
                return true;
            }
        }
    }
}

impl SolverBackend for HeuristicSolver {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            exact: false,
            heuristic: true,
        }
    }

    fn solve(&self, m: &Model, warm: Option<&[bool]>) -> Result<SolveReport, SolveError> {
        let started = Instant::now();
        let deadline = self.time_limit.map(|d| started + d);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);

        // papers by decreasing top candidate score
        let mut order: Vec<usize> = (0..m.papers.len()).collect();
        let top = |i: usize| m.by_paper[i].iter().map(|&v| m.vars[v].score).fold(f64::NEG_INFINITY, f64::max);
        order.sort_by(|&a, &b| top(b).total_cmp(&top(a)).then(a.cmp(&b)));

        let mut local = Local {
            state: State::new(m, CoauthorScope::Active),
        };
        for (v, var) in m.vars.iter().enumerate() {
            if var.fixed {
                local.state.add(v);
            }
        }
        if let Some(w) = warm {
            for (v, &on) in w.iter().enumerate() {
                if on && local.state.can_add(v) {
                    local.state.add(v);
                }
            }
        }
        local.greedy(&order);
        let mut finished = local.descend(deadline);
        let mut best_x = local.state.x.clone();
        let mut best_val = local.state.penalized();

        let bound = optimistic_bound(m);
        let gap_ok = |val: f64| bound - val <= m.params.mip_gap_abs;
        let mut status = SolveStatus::IterationLimit;
        if !finished {
            status = SolveStatus::TimeLimit;
        } else if gap_ok(best_val) {
            status = SolveStatus::GapReached;
        } else {
            for _ in 0..self.restarts {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    status = SolveStatus::TimeLimit;
                    break;
                }
                let mut trial = Local {
                    state: State::from_assignment(m, CoauthorScope::Active, &best_x),
                };
                let mut assigned: Vec<usize> = (0..m.vars.len())
                    .filter(|&v| best_x[v] && !m.vars[v].fixed)
                    .collect();
                assigned.shuffle(&mut rng);
                let drop = ((assigned.len() as f64) * self.perturb).ceil() as usize;
                for &v in &assigned[..drop.min(assigned.len())] {
                    trial.state.remove(v);
                }
                let mut kick: Vec<usize> = (0..m.vars.len()).filter(|&v| !trial.state.x[v]).collect();
                kick.shuffle(&mut rng);
                for v in kick {
                    if rng.random::<f64>() < self.perturb && trial.state.can_add(v) {
                        trial.state.add(v);
                    }
                }
                let mut shuffled = order.clone();
                shuffled.shuffle(&mut rng);
                trial.greedy(&shuffled);
                finished = trial.descend(deadline);
                let val = trial.state.penalized();
                if val > best_val + EPS {
                    best_val = val;
                    best_x = trial.state.x.clone();
                }
                if !finished {
                    status = SolveStatus::TimeLimit;
                    break;
                }
                if gap_ok(best_val) {
                    status = SolveStatus::GapReached;
                    break;
                }
            }
        }
        let check = State::from_assignment(m, CoauthorScope::Active, &best_x);
        if check.shortfall > 0 {
            return Err(SolveError::Infeasible(
                "minimum seniority cannot be met by the heuristic".into(),
            ));
        }
        finish(m, best_x, status, started)
    }
}

// ---------------------------------------------------------------------------
// Row generation and phases
// ---------------------------------------------------------------------------

pub const DEFAULT_MAX_ITERS: usize = 10;

/// Lazy coauthor-term generation: starts with no coauthor terms, and after
/// each solve activates the master terms realized by the solution.
pub fn solve_with_row_generation(
    m: &Model,
    backend: &dyn SolverBackend,
    max_iters: usize,
) -> Result<SolveReport, SolveError> {
    let mut work = m.clone();
    work.set_active_coauthor(&BTreeSet::new());
    let mut iterations = Vec::new();
    let mut timings = Vec::new();
    let mut warm: Option<Vec<bool>> = None;
    let mut i = 0;
    loop {
        let started = Instant::now();
        let r = backend.solve(&work, warm.as_deref())?;
        timings.push(started.elapsed());
        let active = work.active_coauthor();
        let new: BTreeSet<usize> = work
            .realized_coauthor_terms(&r.assignment)
            .into_iter()
            .filter(|k| !active.contains(k))
            .collect();
        let stop = new.is_empty() || i == max_iters;
        iterations.push(IterationRecord {
            iteration: i,
            added: if stop { 0 } else { new.len() },
            objective: r.reported.total(),
        });
        if stop {
            let status = if !new.is_empty() {
                SolveStatus::IterationLimit
            } else {
                r.status
            };
            let objective = evaluate_objective(m, &r.assignment)?;
            return Ok(SolveReport {
                objective,
                upper_bound: r.reported.total(),
                reported: r.reported,
                assignment: r.assignment,
                iterations,
                status,
                timings,
            });
        }
        let mut next = active;
        next.extend(new);
        work.set_active_coauthor(&next);
        warm = Some(r.assignment);
        i += 1;
    }
}

/// Inputs shared by every phase of a sequential solve.
pub struct PhaseInputs<'a> {
    pub corpus: &'a Corpus,
    pub scores: &'a ScoreMatrix,
    pub conflicts: &'a ConflictSet,
    pub bids: &'a FilteredBids,
    pub params: &'a MatchParams,
}

/// Solves phase by phase with cumulative quotas, fixing each phase's result
/// in the next. Capacities stay at their totals so that the combined
/// assignment is feasible for the single-phase model. `max_iters = None`
/// solves each phase with every coauthor term active.
pub fn solve_multiphase(
    inp: &PhaseInputs<'_>,
    phases: &[[u32; 3]],
    backend: &dyn SolverBackend,
    max_iters: Option<usize>,
) -> Result<Vec<SolveReport>, SolveError> {
    let mut sum = [0u32; 3];
    for ph in phases {
        for r in 0..3 {
            sum[r] += ph[r];
        }
    }
    if sum != inp.params.gamma() {
        return Err(SolveError::PhaseMismatch {
            got: sum,
            want: inp.params.gamma(),
        });
    }
    let mut reports = Vec::new();
    let mut fixed = BTreeSet::new();
    let mut cumulative = [0u32; 3];
    for ph in phases {
        for r in 0..3 {
            cumulative[r] += ph[r];
        }
        let mut params = inp.params.clone();
        params.set_gamma(cumulative);
        let opts = BuildOptions {
            fixed: fixed.clone(),
            capacity_mode: CapacityMode::Total,
            ..Default::default()
        };
        let m = build_model(inp.corpus, inp.scores, inp.conflicts, inp.bids, &params, &opts)?;
        let report = match max_iters {
            Some(k) => solve_with_row_generation(&m, backend, k)?,
            None => backend.solve(&m, None)?,
        };
        fixed = m.pairs(&report.assignment).into_iter().collect();
        reports.push(report);
    }
    Ok(reports)
}

/// Draws a seed-dependent permutation; exposed for deterministic tie
/// shuffling in callers.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BidLevel, CoauthorEdge, CoauthorGraph, SeniorityInputs};
    use crate::model::ModelReviewer;
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

    fn plain(gamma_pc: u32) -> MatchParams {
        MatchParams {
            gamma_pc,
            gamma_spc: 0,
            gamma_ac: 0,
            reward_sen: 0.0,
            reward_reg: 0.0,
            p_cy: 0.0,
            mip_gap_abs: 0.0,
            ..MatchParams::default()
        }
    }

    fn pcs(papers: usize, reviewers: usize, edit: impl Fn(usize, &mut crate::corpus::Reviewer)) -> CorpusBuilder {
        let mut b = CorpusBuilder::new();
        for i in 0..papers {
            b = b.paper(&format!("p{i}"), "k", &[], &["x"]);
        }
        for j in 0..reviewers {
            b = b.reviewer_with(&format!("r{j}"), Role::Pc, "k", &[], |r| edit(j, r));
        }
        b
    }

    fn model(c: &Corpus, s: &ScoreMatrix, p: &MatchParams) -> Model {
        build_model(c, s, &ConflictSet::new(), &FilteredBids::default(), p, &BuildOptions::default()).unwrap()
    }

    #[test]
    fn exact_picks_dominant() {
        let c = pcs(1, 2, |_, _| {}).build();
        let m = model(&c, &matrix(&[&[0.9, 0.5]]), &plain(1));
        let r = ExactSolver::default().solve(&m, None).unwrap();
        assert_abs_diff_eq!(r.objective.total(), 0.9, epsilon = 1e-12);
        assert_eq!(r.status, SolveStatus::Optimal);
    }

    #[test]
    fn exact_two_by_two_matching() {
        let c = pcs(2, 2, |_, r| r.capacity = 1).build();
        let m = model(&c, &matrix(&[&[0.9, 0.8], &[0.7, 0.2]]), &plain(1));
        let r = ExactSolver::default().solve(&m, None).unwrap();
        assert_abs_diff_eq!(r.objective.total(), 1.5, epsilon = 1e-12);
        let h = HeuristicSolver::default().solve(&m, None).unwrap();
        assert_abs_diff_eq!(h.objective.total(), 1.5, epsilon = 1e-12);
    }

    fn coauthor_pair() -> Corpus {
        let mut g = CoauthorGraph::new();
        g.add_edge("r0", "r1", CoauthorEdge { paper_count: 1, last_year: 1990 });
        pcs(1, 3, |_, _| {}).graph(g).build()
    }

    #[test]
    fn exact_avoids_coauthor_pair() {
        let c = coauthor_pair();
        // both coauthors give 0.9 + 0.9; swapping one for r2 loses 0.1 but saves 0.3
        let m = model(&c, &matrix(&[&[0.9, 0.9, 0.8]]), &plain(2));
        let r = ExactSolver::default().solve(&m, None).unwrap();
        assert_abs_diff_eq!(r.objective.total(), 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.objective.coauthor, 0.0);
    }

    #[test]
    fn row_generation_planted() {
        let c = coauthor_pair();
        let m = model(&c, &matrix(&[&[0.9, 0.9, 0.8]]), &plain(2));
        let r = solve_with_row_generation(&m, &ExactSolver::default(), 10).unwrap();
        assert_eq!(r.iterations.len(), 2);
        assert_abs_diff_eq!(r.iterations[0].objective, 1.8, epsilon = 1e-12);
        assert_abs_diff_eq!(r.iterations[1].objective, 1.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.objective.total(), 1.7, epsilon = 1e-12);
        assert!(r.objective.total() <= r.upper_bound + 1e-12);

        let r0 = solve_with_row_generation(&m, &ExactSolver::default(), 0).unwrap();
        assert_eq!(r0.iterations.len(), 1);
        assert_abs_diff_eq!(r0.objective.total(), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r0.upper_bound, 1.8, epsilon = 1e-12);
        assert_eq!(r0.status, SolveStatus::IterationLimit);
    }

    #[test]
    fn row_generation_without_pairs_stops_at_zero() {
        let c = pcs(2, 3, |_, _| {}).build();
        let m = model(&c, &matrix(&[&[0.9, 0.4, 0.3], &[0.2, 0.6, 0.5]]), &plain(2));
        let r = solve_with_row_generation(&m, &HeuristicSolver::default(), 10).unwrap();
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.iterations[0].added, 0);
    }

    #[test]
    fn heuristic_applies_swap() {
        // greedy gives p0 its best reviewer r0, leaving p1 with r1 at 0.2
        let c = pcs(2, 2, |_, r| r.capacity = 1).build();
        let m = model(&c, &matrix(&[&[0.9, 0.85], &[0.8, 0.2]]), &plain(1));
        let r = HeuristicSolver { restarts: 0, ..Default::default() }.solve(&m, None).unwrap();
        assert_abs_diff_eq!(r.objective.total(), 1.65, epsilon = 1e-12);
    }

    #[test]
    fn incremental_state_matches_evaluator() {
        let sen = |c| SeniorityInputs { prior_committee_count: c, published_paper_count: 0 };
        let mut g = CoauthorGraph::new();
        g.add_edge("r0", "r3", CoauthorEdge { paper_count: 1, last_year: 1990 });
        g.add_edge("r3", "r5", CoauthorEdge { paper_count: 1, last_year: 1990 });
        let mut b = CorpusBuilder::new().region("A").region("B");
        for i in 0..3 {
            b = b.paper(&format!("p{i}"), "k", &[], &[&format!("r{i}")]);
        }
        for j in 0..6 {
            let role = [Role::Pc, Role::Pc, Role::Pc, Role::Spc, Role::Ac, Role::Pc][j];
            b = b.reviewer_with(&format!("r{j}"), role, "k", &[], |r| {
                r.seniority_inputs = sen(j as u32);
                r.region = if j % 2 == 0 { "A".into() } else { "B".into() };
            });
        }
        b = b
            .bid("r0", "p1", BidLevel::Eager)
            .bid("r1", "p0", BidLevel::Willing)
            .bid("r2", "p0", BidLevel::Eager)
            .bid("r0", "p2", BidLevel::Willing);
        let c = b.build();
        let s = matrix(&[&[0.3, 0.5, 0.6, 0.7, 0.2, 0.9], &[0.8, 0.4, 0.3, 0.6, 0.5, 0.4], &[0.6, 0.7, 0.2, 0.3, 0.9, 0.5]]);
        for mode in [CycleMode::PerAssignment, CycleMode::PairSlack] {
            let mut p = MatchParams::default();
            p.cycle_mode = mode;
            let bids = FilteredBids::unfiltered(&c);
            let m = build_model(&c, &s, &ConflictSet::new(), &bids, &p, &BuildOptions::default()).unwrap();
            assert!(!m.cycles.is_empty());
            let r = ExactSolver::default().solve(&m, None).unwrap();
            let e = evaluate_objective(&m, &r.assignment).unwrap();
            assert!(e.max_term_diff(&r.objective) < 1e-9);
            let h = HeuristicSolver::default().solve(&m, None).unwrap();
            assert!(h.objective.total() <= r.objective.total() + 1e-9);
            // LP objective at minimal slacks equals the evaluator
            let vals = m.minimal_slacks(&r.assignment).unwrap();
            let lp = m.to_lp();
            assert!(lp.violations(&vals, 1e-9).is_empty());
            assert_abs_diff_eq!(lp.objective_value(&vals), e.total(), epsilon = 1e-9);
        }
    }

    #[test]
    fn min_seniority_infeasible() {
        let c = pcs(1, 2, |_, _| {}).build();
        let mut p = plain(2);
        p.min_seniority = 1;
        let m = model(&c, &matrix(&[&[0.9, 0.5]]), &p);
        assert!(matches!(ExactSolver::default().solve(&m, None), Err(SolveError::Infeasible(_))));
        assert!(matches!(HeuristicSolver::default().solve(&m, None), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn node_limit_is_loud() {
        let c = pcs(4, 8, |_, r| r.capacity = 3).build();
        let s = matrix(&[&[0.5; 8], &[0.5; 8], &[0.5; 8], &[0.5; 8]]);
        let m = model(&c, &s, &plain(2));
        let r = ExactSolver { node_limit: 10 }.solve(&m, None);
        assert!(matches!(r, Err(SolveError::TooLarge { .. })));
    }

    #[test]
    fn multiphase_one_phase_matches_plain() {
        let c = pcs(2, 4, |_, _| {}).build();
        let s = matrix(&[&[0.9, 0.8, 0.7, 0.6], &[0.5, 0.9, 0.3, 0.8]]);
        let p = plain(2);
        let inp = PhaseInputs {
            corpus: &c,
            scores: &s,
            conflicts: &ConflictSet::new(),
            bids: &FilteredBids::default(),
            params: &p,
        };
        let one = solve_multiphase(&inp, &[[2, 0, 0]], &ExactSolver::default(), None).unwrap();
        let plain_r = ExactSolver::default().solve(&model(&c, &s, &p), None).unwrap();
        assert_eq!(one[0].assignment, plain_r.assignment);
        let two = solve_multiphase(&inp, &[[1, 0, 0], [1, 0, 0]], &ExactSolver::default(), None).unwrap();
        assert!(two[1].objective.total() <= plain_r.objective.total() + 1e-9);
        assert!(matches!(
            solve_multiphase(&inp, &[[1, 0, 0]], &ExactSolver::default(), None),
            Err(SolveError::PhaseMismatch { .. })
        ));
    }

    #[test]
    fn heuristic_is_deterministic() {
        let c = pcs(3, 5, |j, r| r.capacity = 1 + (j as u32 % 2)).build();
        let s = matrix(&[&[0.9, 0.8, 0.7, 0.6, 0.2], &[0.5, 0.9, 0.3, 0.8, 0.4], &[0.4, 0.6, 0.9, 0.2, 0.7]]);
        let m = model(&c, &s, &plain(2));
        let a = HeuristicSolver { seed: 7, ..Default::default() }.solve(&m, None).unwrap();
        let b = HeuristicSolver { seed: 7, ..Default::default() }.solve(&m, None).unwrap();
        assert_eq!(a.to_json(&m, false), b.to_json(&m, false));
        let _: &[ModelReviewer] = &m.reviewers;
    }
}
