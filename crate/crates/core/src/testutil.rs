//! Small in-memory corpus builder for tests, examples and benchmarks.
//!
//! Keywords referenced by papers or reviewers are registered automatically
//! under the parent `area` unless declared with [`CorpusBuilder::keyword`].
//! Reviewers default to region `R1`, capacity 3 and seniority 0.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Bid, BidLevel, CoauthorEdge, CoauthorGraph, Corpus, CorpusError, ExternalScore, KeywordTaxonomy, Paper,
    PaperId, PersonId, Reviewer, Role, SeniorityInputs, Track,
};
use crate::bids::FilteredBids;
use crate::coi::{ConflictReason, ConflictSet};
use crate::scoring::{ScoreEntry, ScoreMatrix};

#[derive(Debug, Clone, Default)]
pub struct CorpusBuilder {
    papers: Vec<Paper>,
    reviewers: Vec<Reviewer>,
    parents: BTreeMap<String, String>,
    bids: Vec<Bid>,
    graph: CoauthorGraph,
    regions: BTreeSet<String>,
    external: BTreeMap<(PaperId, PersonId), ExternalScore>,
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl CorpusBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn keyword(mut self, id: &str, parent: &str) -> Self {
        self.parents.insert(id.to_string(), parent.to_string());
        self
    }

    pub fn region(mut self, id: &str) -> Self {
        self.regions.insert(id.to_string());
        self
    }

    pub fn paper(self, id: &str, primary: &str, secondary: &[&str], authors: &[&str]) -> Self {
        self.paper_with(id, primary, secondary, authors, |_| {})
    }

    pub fn paper_with(
        mut self,
        id: &str,
        primary: &str,
        secondary: &[&str],
        authors: &[&str],
        edit: impl FnOnce(&mut Paper),
    ) -> Self {
        let mut p = Paper {
            id: id.to_string(),
            primary_keyword: primary.to_string(),
            secondary_keywords: set(secondary),
            author_ids: set(authors),
            track: Track::Main,
        };
        edit(&mut p);
        self.papers.push(p);
        self
    }

    pub fn reviewer(self, id: &str, role: Role, primary: &str, secondary: &[&str]) -> Self {
        self.reviewer_with(id, role, primary, secondary, |_| {})
    }

    pub fn reviewer_with(
        mut self,
        id: &str,
        role: Role,
        primary: &str,
        secondary: &[&str],
        edit: impl FnOnce(&mut Reviewer),
    ) -> Self {
        let mut r = Reviewer {
            id: id.to_string(),
            role,
            primary_keyword: primary.to_string(),
            secondary_keywords: set(secondary),
            region: "R1".to_string(),
            seniority_inputs: SeniorityInputs::default(),
            capacity: 3,
            declared_conflict_domains: BTreeSet::new(),
            declared_conflict_people: BTreeSet::new(),
        };
        edit(&mut r);
        self.reviewers.push(r);
        self
    }

    pub fn bid(mut self, reviewer: &str, paper: &str, level: BidLevel) -> Self {
        self.bids.push(Bid {
            reviewer_id: reviewer.to_string(),
            paper_id: paper.to_string(),
            level,
        });
        self
    }

    pub fn graph(mut self, graph: CoauthorGraph) -> Self {
        self.graph = graph;
        self
    }

    pub fn external(mut self, paper: &str, reviewer: &str, tpms: Option<f64>, acl: Option<f64>) -> Self {
        self.external
            .insert((paper.to_string(), reviewer.to_string()), ExternalScore { tpms, acl });
        self
    }

    pub fn try_build(mut self) -> Result<Corpus, CorpusError> {
        let used: Vec<String> = self
            .papers
            .iter()
            .flat_map(|p| p.keywords().cloned().collect::<Vec<_>>())
            .chain(self.reviewers.iter().flat_map(|r| r.keywords().cloned().collect::<Vec<_>>()))
            .collect();
        for kw in used {
            self.parents.entry(kw).or_insert_with(|| "area".to_string());
        }
        for r in &self.reviewers {
            self.regions.insert(r.region.clone());
        }
        if self.regions.is_empty() {
            self.regions.insert("R1".to_string());
        }
        Corpus::from_parts(
            self.papers,
            self.reviewers,
            KeywordTaxonomy::new(self.parents),
            self.bids,
            self.graph,
            self.regions,
            self.external,
        )
    }

    pub fn build(self) -> Corpus {
        self.try_build().expect("fixture corpus is valid")
    }
}

/// A score entry whose every component equals `s`.
pub fn flat_entry(s: f64) -> ScoreEntry {
    ScoreEntry {
        sam: s,
        tpms_norm: None,
        acl_norm: None,
        base: s,
        bid: BidLevel::NotEntered,
        aggscore: s,
    }
}

/// Dense score matrix from rows of aggscores (paper-major, corpus positions).
pub fn flat_matrix(rows: &[Vec<f64>]) -> ScoreMatrix {
    ScoreMatrix::from_entries(
        rows.len(),
        rows.iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().enumerate().map(move |(r, &s)| (p, r, flat_entry(s)))),
    )
}

/// Small random instance: up to `max_papers` papers and `max_reviewers`
/// reviewers with random roles, regions, seniorities, coauthor edges,
/// authorship, positive bids and scores. Reviewers author papers so that
/// bidding cycles occur; authors are conflicted with their own papers.
pub fn random_instance(seed: u64, max_papers: usize, max_reviewers: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_papers = rng.random_range(1..=max_papers.max(1));
    let n_reviewers = rng.random_range(2.min(max_reviewers)..=max_reviewers.max(1));
    let regions = ["A", "B", "C"];
    let mut b = CorpusBuilder::new();
    for g in regions {
        b = b.region(g);
    }
    for j in 0..n_reviewers {
        let role = match rng.random_range(0..10) {
            0..=5 => Role::Pc,
            6..=7 => Role::Spc,
            _ => Role::Ac,
        };
        let inputs = SeniorityInputs {
            prior_committee_count: rng.random_range(0..4),
            published_paper_count: rng.random_range(0..12),
        };
        let region = regions[rng.random_range(0..regions.len())].to_string();
        let capacity = rng.random_range(1..=4);
        b = b.reviewer_with(&format!("r{j}"), role, "k", &[], |r| {
            r.seniority_inputs = inputs;
            r.region = region;
            r.capacity = capacity;
        });
    }
    for i in 0..n_papers {
        let mut authors = vec![format!("a{i}")];
        if rng.random_bool(0.5) {
            authors.push(format!("r{}", rng.random_range(0..n_reviewers)));
        }
        let refs: Vec<&str> = authors.iter().map(String::as_str).collect();
        b = b.paper(&format!("p{i}"), "k", &[], &refs);
    }
    let mut g = CoauthorGraph::new();
    for a in 0..n_reviewers {
        for c in a + 1..n_reviewers {
            if rng.random_bool(0.15) {
                g.add_edge(&format!("r{a}"), &format!("r{c}"), CoauthorEdge { paper_count: 1, last_year: 1990 });
            }
        }
        if rng.random_bool(0.2) {
            g.add_edge(&format!("r{a}"), "hub", CoauthorEdge { paper_count: 1, last_year: 1990 });
        }
    }
    b = b.graph(g);
    for j in 0..n_reviewers {
        for i in 0..n_papers {
            if rng.random_bool(0.2) {
                b = b.bid(&format!("r{j}"), &format!("p{i}"), BidLevel::Willing);
            }
        }
    }
    let rows: Vec<Vec<f64>> = (0..n_papers)
        .map(|_| (0..n_reviewers).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let corpus = b.build();
    let mut conflicts = ConflictSet::new();
    for p in corpus.papers() {
        for a in &p.author_ids {
            if corpus.reviewer(a).is_some() {
                conflicts.insert(&p.id, a, ConflictReason::Cosubmission);
            }
        }
    }
    let bids = FilteredBids::unfiltered(&corpus);
    RandomInstance {
        scores: flat_matrix(&rows),
        corpus,
        conflicts,
        bids,
    }
}

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub corpus: Corpus,
    pub scores: ScoreMatrix,
    pub conflicts: ConflictSet,
    pub bids: FilteredBids,
}
