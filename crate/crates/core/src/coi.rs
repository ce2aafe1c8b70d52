//! Conflict-of-interest detection from declared and inferred relationships,
//! plus flagging of suspicious declarations for manual review.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CoauthorGraph, Corpus, PaperId, PersonId, Reviewer};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoiError {
    #[error("coi.current_year is not configured")]
    MissingCurrentYear,
}

/// Why a (paper, reviewer) pair conflicts. Variant order is rule precedence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictReason {
    DeclaredDomain,
    DeclaredPerson,
    Cosubmission,
    RecentCoauthor,
    HeavyCoauthor,
    Advisor,
    SiblingStudents,
}

impl ConflictReason {
    pub const ALL: [ConflictReason; 7] = [
        ConflictReason::DeclaredDomain,
        ConflictReason::DeclaredPerson,
        ConflictReason::Cosubmission,
        ConflictReason::RecentCoauthor,
        ConflictReason::HeavyCoauthor,
        ConflictReason::Advisor,
        ConflictReason::SiblingStudents,
    ];

    /// Declared conflicts and conflicts between coauthors of submissions.
    pub fn is_trivial(self) -> bool {
        matches!(
            self,
            ConflictReason::DeclaredDomain | ConflictReason::DeclaredPerson | ConflictReason::Cosubmission
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConflictReason::DeclaredDomain => "declared_domain",
            ConflictReason::DeclaredPerson => "declared_person",
            ConflictReason::Cosubmission => "cosubmission",
            ConflictReason::RecentCoauthor => "recent_coauthor",
            ConflictReason::HeavyCoauthor => "heavy_coauthor",
            ConflictReason::Advisor => "advisor",
            ConflictReason::SiblingStudents => "sibling_students",
        }
    }
}

impl fmt::Display for ConflictReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conflicting pairs, each with its highest-precedence reason.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConflictSet {
    entries: BTreeMap<(PaperId, PersonId), ConflictReason>,
}

impl ConflictSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a conflict, keeping the higher-precedence reason if present.
    pub fn insert(&mut self, paper: &str, reviewer: &str, reason: ConflictReason) {
        self.entries
            .entry((paper.to_string(), reviewer.to_string()))
            .and_modify(|r| *r = (*r).min(reason))
            .or_insert(reason);
    }

    pub fn contains(&self, paper: &str, reviewer: &str) -> bool {
        self.reason(paper, reviewer).is_some()
    }

    pub fn reason(&self, paper: &str, reviewer: &str) -> Option<ConflictReason> {
        self.entries.get(&(paper.to_string(), reviewer.to_string())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PaperId, &PersonId, ConflictReason)> {
        self.entries.iter().map(|((p, r), reason)| (p, r, *reason))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspicionCriterion {
    ManyDomains,
    ManyPersonCois,
    ManyAsymmetric,
}

impl SuspicionCriterion {
    pub fn as_str(self) -> &'static str {
        match self {
            SuspicionCriterion::ManyDomains => "many_domains",
            SuspicionCriterion::ManyPersonCois => "many_person_cois",
            SuspicionCriterion::ManyAsymmetric => "many_asymmetric",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SuspicionReport {
    pub criteria: BTreeMap<PersonId, BTreeSet<SuspicionCriterion>>,
}

impl SuspicionReport {
    pub fn flagged_users(&self) -> impl Iterator<Item = &PersonId> {
        self.criteria.keys()
    }

    pub fn is_flagged(&self, person: &str) -> bool {
        self.criteria.contains_key(person)
    }
}

pub const MANY_DOMAINS: usize = 8;
pub const MANY_PERSON_COIS: usize = 15;
pub const MANY_ASYMMETRIC: usize = 10;

/// Flags reviewers whose declarations look like attempts to dodge reviews.
pub fn flag_suspicious_declarations(c: &Corpus) -> SuspicionReport {
    let mut report = SuspicionReport::default();
    for r in c.reviewers() {
        let mut crit = BTreeSet::new();
        if r.declared_conflict_domains.len() >= MANY_DOMAINS {
            crit.insert(SuspicionCriterion::ManyDomains);
        }
        let non_coauthor = r
            .declared_conflict_people
            .iter()
            .filter(|p| c.coauthor_graph.edge(&r.id, p).is_none())
            .count();
        if non_coauthor >= MANY_PERSON_COIS {
            crit.insert(SuspicionCriterion::ManyPersonCois);
        }
        let asymmetric = r
            .declared_conflict_people
            .iter()
            .filter(|p| {
                c.reviewer(p)
                    .map(|other| !other.declared_conflict_people.contains(&r.id))
                    .unwrap_or(true)
            })
            .count();
        if asymmetric >= MANY_ASYMMETRIC {
            crit.insert(SuspicionCriterion::ManyAsymmetric);
        }
        if !crit.is_empty() {
            report.criteria.insert(r.id.clone(), crit);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclarationKind {
    Domain,
    Person,
}

impl FromStr for DeclarationKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "domain" => Ok(DeclarationKind::Domain),
            "person" => Ok(DeclarationKind::Person),
            other => Err(format!("unknown declaration kind `{other}`")),
        }
    }
}

/// A declared conflict vetoed during manual review.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Suppression {
    pub reviewer_id: PersonId,
    pub kind: DeclarationKind,
    pub value: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoiConfig {
    pub current_year: Option<i32>,
}

pub const RECENT_YEARS: i32 = 5;
pub const HEAVY_PAPERS: u32 = 6;
pub const ADVISOR_HEAD_START: i32 = 5;
pub const ADVISOR_EXTRA_PAPERS: u32 = 10;
pub const ADVISOR_EARLY_PAPERS: u32 = 3;

/// advisor(x, y): x started publishing at least five years before y, has at
/// least ten more papers, and coauthored at least three of y's first ten.
pub fn is_advisor(graph: &CoauthorGraph, x: &str, y: &str) -> bool {
    let (Some(mx), Some(my)) = (graph.person(x), graph.person(y)) else {
        return false;
    };
    mx.first_pub_year <= my.first_pub_year - ADVISOR_HEAD_START
        && mx.paper_count >= my.paper_count + ADVISOR_EXTRA_PAPERS
        && my.early_counts.get(x).copied().unwrap_or(0) >= ADVISOR_EARLY_PAPERS
}

/// Everyone who advised `y`.
pub fn advisors_of(graph: &CoauthorGraph, y: &str) -> BTreeSet<PersonId> {
    graph
        .person(y)
        .map(|m| {
            m.early_counts
                .keys()
                .filter(|x| is_advisor(graph, x, y))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
}

struct Index<'a> {
    corpus: &'a Corpus,
    current_year: i32,
    /// Each person's coauthors on submissions to this conference, self included.
    cosubmitters: BTreeMap<&'a str, BTreeSet<&'a str>>,
    advisors: BTreeMap<&'a str, BTreeSet<PersonId>>,
    suppressed: &'a BTreeSet<Suppression>,
}

impl<'a> Index<'a> {
    fn new(corpus: &'a Corpus, current_year: i32, suppressed: &'a BTreeSet<Suppression>) -> Self {
        let mut cosubmitters: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for p in corpus.papers() {
            for a in &p.author_ids {
                let set = cosubmitters.entry(a.as_str()).or_default();
                set.extend(p.author_ids.iter().map(String::as_str));
            }
        }
        let mut advisors = BTreeMap::new();
        let people: BTreeSet<&str> = corpus
            .papers()
            .iter()
            .flat_map(|p| p.author_ids.iter().map(String::as_str))
            .chain(corpus.reviewers().iter().map(|r| r.id.as_str()))
            .collect();
        for person in people {
            advisors.insert(person, advisors_of(&corpus.coauthor_graph, person));
        }
        Index {
            corpus,
            current_year,
            cosubmitters,
            advisors,
            suppressed,
        }
    }

    fn is_suppressed(&self, reviewer: &str, kind: DeclarationKind, value: &str) -> bool {
        self.suppressed.contains(&Suppression {
            reviewer_id: reviewer.to_string(),
            kind,
            value: value.to_string(),
        })
    }

    /// First rule that fires for author `a` against reviewer `r`.
    fn reason(&self, r: &Reviewer, a: &str) -> Option<ConflictReason> {
        let graph = &self.corpus.coauthor_graph;
        if let Some(meta) = graph.person(a) {
            let hit = meta.domains.iter().any(|d| {
                r.declared_conflict_domains.contains(d)
                    && !self.is_suppressed(&r.id, DeclarationKind::Domain, d)
            });
            if hit {
                return Some(ConflictReason::DeclaredDomain);
            }
        }
        if r.declared_conflict_people.contains(a) && !self.is_suppressed(&r.id, DeclarationKind::Person, a) {
            return Some(ConflictReason::DeclaredPerson);
        }
        if r.id == a
            || self
                .cosubmitters
                .get(r.id.as_str())
                .is_some_and(|s| s.contains(a))
        {
            return Some(ConflictReason::Cosubmission);
        }
        if let Some(edge) = graph.edge(&r.id, a) {
            if self.current_year - edge.last_year <= RECENT_YEARS {
                return Some(ConflictReason::RecentCoauthor);
            }
            if edge.paper_count > HEAVY_PAPERS {
                return Some(ConflictReason::HeavyCoauthor);
            }
        }
        let empty = BTreeSet::new();
        let adv_r = self.advisors.get(r.id.as_str()).unwrap_or(&empty);
        let adv_a = self.advisors.get(a).unwrap_or(&empty);
        if adv_r.contains(a) || adv_a.contains(&r.id) {
            return Some(ConflictReason::Advisor);
        }
        if adv_r.intersection(adv_a).next().is_some() {
            return Some(ConflictReason::SiblingStudents);
        }
        None
    }
}

/// All conflicting (paper, reviewer) pairs. Suppressed declarations are
/// ignored; inferred relationships still apply.
pub fn infer_conflicts(
    c: &Corpus,
    suppressed: &BTreeSet<Suppression>,
    config: &CoiConfig,
) -> Result<ConflictSet, CoiError> {
    let current_year = config.current_year.ok_or(CoiError::MissingCurrentYear)?;
    let index = Index::new(c, current_year, suppressed);
    let per_paper: Vec<Vec<(PaperId, PersonId, ConflictReason)>> = c
        .papers()
        .par_iter()
        .map(|p| {
            let mut out = Vec::new();
            for r in c.reviewers() {
                let best = p.author_ids.iter().filter_map(|a| index.reason(r, a)).min();
                if let Some(reason) = best {
                    out.push((p.id.clone(), r.id.clone(), reason));
                }
            }
            out
        })
        .collect();
    let mut set = ConflictSet::new();
    for (p, r, reason) in per_paper.into_iter().flatten() {
        set.insert(&p, &r, reason);
    }
    Ok(set)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConflictStats {
    pub total: usize,
    pub by_reason: BTreeMap<ConflictReason, usize>,
    /// Share of conflicting pairs whose reason is trivial; 0 when empty.
    pub trivial_fraction: f64,
    pub papers_with_conflicts: usize,
    pub papers_with_non_trivial: usize,
    /// Share of conflicted papers with at least one non-trivial conflict.
    pub non_trivial_paper_fraction: f64,
}

pub fn conflict_stats(cs: &ConflictSet) -> ConflictStats {
    let mut stats = ConflictStats {
        total: cs.len(),
        ..Default::default()
    };
    let mut papers = BTreeSet::new();
    let mut non_trivial_papers = BTreeSet::new();
    let mut trivial = 0usize;
    for (p, _, reason) in cs.iter() {
        *stats.by_reason.entry(reason).or_default() += 1;
        papers.insert(p.as_str());
        if reason.is_trivial() {
            trivial += 1;
        } else {
            non_trivial_papers.insert(p.as_str());
        }
    }
    stats.papers_with_conflicts = papers.len();
    stats.papers_with_non_trivial = non_trivial_papers.len();
    if stats.total > 0 {
        stats.trivial_fraction = trivial as f64 / stats.total as f64;
        stats.non_trivial_paper_fraction = non_trivial_papers.len() as f64 / papers.len() as f64;
    }
    stats
}
