//! Conference input data: papers, reviewers, keyword taxonomy, bids, the
//! coauthorship graph and externally computed text-similarity scores.
//!
//! All inputs arrive as UTF-8 CSV files with a header row. Multi-valued cells
//! are `;`-joined. A [`Corpus`] is fully cross-validated on load and immutable
//! afterwards.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type PaperId = String;
pub type PersonId = String;
pub type KeywordId = String;
pub type RegionId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {message}")]
    Schema {
        file: String,
        line: u64,
        message: String,
    },
    #[error("{file}:{line}: unknown {kind} `{id}`")]
    DanglingReference {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("{file}:{line}: duplicate key `{key}`")]
    DuplicateKey { file: String, line: u64, key: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn schema(file: &str, line: u64, message: impl Into<String>) -> Self {
        CorpusError::Schema {
            file: file.to_string(),
            line,
            message: message.into(),
        }
    }

    fn dangling(file: &str, line: u64, kind: &'static str, id: &str) -> Self {
        CorpusError::DanglingReference {
            file: file.to_string(),
            line,
            kind,
            id: id.to_string(),
        }
    }

    /// True for errors caused by unresolved cross references rather than
    /// malformed files.
    pub fn is_reference(&self) -> bool {
        matches!(self, CorpusError::DanglingReference { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Main,
    Fasttrack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "SPC")]
    Spc,
    #[serde(rename = "AC")]
    Ac,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Pc, Role::Spc, Role::Ac];

    pub fn index(self) -> usize {
        match self {
            Role::Pc => 0,
            Role::Spc => 1,
            Role::Ac => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Pc => "PC",
            Role::Spc => "SPC",
            Role::Ac => "AC",
        }
    }

    /// PCs and SPCs take part in discussions; ACs are excluded from the
    /// coauthor, region and cycle terms.
    pub fn is_discussant(self) -> bool {
        matches!(self, Role::Pc | Role::Spc)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PC" | "pc" => Ok(Role::Pc),
            "SPC" | "spc" => Ok(Role::Spc),
            "AC" | "ac" => Ok(Role::Ac),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

/// Bid enthusiasm, ordered from least to most enthusiastic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidLevel {
    NotWilling,
    NotEntered,
    InAPinch,
    Willing,
    Eager,
}

impl BidLevel {
    /// Exponent applied to the base score.
    pub fn exponent(self) -> f64 {
        match self {
            BidLevel::NotWilling => 20.0,
            BidLevel::NotEntered => 1.0,
            BidLevel::InAPinch => 0.67,
            BidLevel::Willing => 0.4,
            BidLevel::Eager => 0.25,
        }
    }

    /// Eager and willing bids; in-a-pinch is not positive for collusion and
    /// cycle detection.
    pub fn is_positive(self) -> bool {
        matches!(self, BidLevel::Willing | BidLevel::Eager)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BidLevel::NotWilling => "not_willing",
            BidLevel::NotEntered => "not_entered",
            BidLevel::InAPinch => "in_a_pinch",
            BidLevel::Willing => "willing",
            BidLevel::Eager => "eager",
        }
    }
}

impl fmt::Display for BidLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BidLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "not_willing" => Ok(BidLevel::NotWilling),
            "not_entered" | "" => Ok(BidLevel::NotEntered),
            "in_a_pinch" => Ok(BidLevel::InAPinch),
            "willing" => Ok(BidLevel::Willing),
            "eager" => Ok(BidLevel::Eager),
            other => Err(format!("unknown bid level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    pub primary_keyword: KeywordId,
    pub secondary_keywords: BTreeSet<KeywordId>,
    pub author_ids: BTreeSet<PersonId>,
    pub track: Track,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeniorityInputs {
    pub prior_committee_count: u32,
    pub published_paper_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reviewer {
    pub id: PersonId,
    pub role: Role,
    pub primary_keyword: KeywordId,
    pub secondary_keywords: BTreeSet<KeywordId>,
    pub region: RegionId,
    pub seniority_inputs: SeniorityInputs,
    pub capacity: u32,
    pub declared_conflict_domains: BTreeSet<String>,
    pub declared_conflict_people: BTreeSet<PersonId>,
}

impl Reviewer {
    pub fn seniority(&self) -> u8 {
        seniority_level(&self.seniority_inputs)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &KeywordId> {
        std::iter::once(&self.primary_keyword).chain(self.secondary_keywords.iter())
    }
}

impl Paper {
    pub fn keywords(&self) -> impl Iterator<Item = &KeywordId> {
        std::iter::once(&self.primary_keyword).chain(self.secondary_keywords.iter())
    }
}

/// Two-level keyword hierarchy: every bottom-level keyword has exactly one
/// top-level parent category.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordTaxonomy {
    parent_of: BTreeMap<KeywordId, String>,
}

impl KeywordTaxonomy {
    pub fn new(parent_of: BTreeMap<KeywordId, String>) -> Self {
        KeywordTaxonomy { parent_of }
    }

    pub fn contains(&self, keyword: &str) -> bool {
        self.parent_of.contains_key(keyword)
    }

    pub fn parent(&self, keyword: &str) -> Option<&str> {
        self.parent_of.get(keyword).map(String::as_str)
    }

    pub fn keywords(&self) -> impl Iterator<Item = &KeywordId> {
        self.parent_of.keys()
    }

    pub fn len(&self) -> usize {
        self.parent_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent_of.is_empty()
    }

    pub fn parents(&self) -> BTreeSet<&str> {
        self.parent_of.values().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub reviewer_id: PersonId,
    pub paper_id: PaperId,
    pub level: BidLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoauthorEdge {
    pub paper_count: u32,
    pub last_year: i32,
}

/// Publication history used for advisor inference.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonMeta {
    pub first_pub_year: i32,
    pub paper_count: u32,
    /// Normalized affiliation domains.
    pub domains: BTreeSet<String>,
    /// For each coauthor: how many of this person's first ten papers they
    /// coauthored.
    pub early_counts: BTreeMap<PersonId, u32>,
}

/// Weighted coauthorship graph over people, plus per-person publication
/// metadata precomputed at ingest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoauthorGraph {
    edges: BTreeMap<(PersonId, PersonId), CoauthorEdge>,
    adjacency: BTreeMap<PersonId, BTreeSet<PersonId>>,
    people: BTreeMap<PersonId, PersonMeta>,
}

fn ordered_pair<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl CoauthorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces the undirected edge between `a` and `b`.
    pub fn add_edge(&mut self, a: &str, b: &str, edge: CoauthorEdge) {
        let (x, y) = ordered_pair(a, b);
        self.edges.insert((x.to_string(), y.to_string()), edge);
        self.adjacency
            .entry(a.to_string())
            .or_default()
            .insert(b.to_string());
        self.adjacency
            .entry(b.to_string())
            .or_default()
            .insert(a.to_string());
    }

    pub fn set_person(&mut self, id: &str, meta: PersonMeta) {
        self.people.insert(id.to_string(), meta);
    }

    pub fn edge(&self, a: &str, b: &str) -> Option<&CoauthorEdge> {
        let (x, y) = ordered_pair(a, b);
        self.edges.get(&(x.to_string(), y.to_string()))
    }

    pub fn neighbors(&self, person: &str) -> impl Iterator<Item = &PersonId> {
        self.adjacency.get(person).into_iter().flatten()
    }

    pub fn person(&self, id: &str) -> Option<&PersonMeta> {
        self.people.get(id)
    }

    pub fn people(&self) -> &BTreeMap<PersonId, PersonMeta> {
        &self.people
    }

    pub fn edges(&self) -> impl Iterator<Item = (&PersonId, &PersonId, &CoauthorEdge)> {
        self.edges.iter().map(|((a, b), e)| (a, b, e))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Raw, un-normalized text-similarity scores for one (paper, reviewer) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub tpms: Option<f64>,
    pub acl: Option<f64>,
}

/// The validated conference snapshot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    papers: Vec<Paper>,
    reviewers: Vec<Reviewer>,
    paper_index: HashMap<PaperId, usize>,
    reviewer_index: HashMap<PersonId, usize>,
    pub taxonomy: KeywordTaxonomy,
    bids: BTreeMap<(PersonId, PaperId), BidLevel>,
    pub coauthor_graph: CoauthorGraph,
    pub regions: BTreeSet<RegionId>,
    external_scores: BTreeMap<(PaperId, PersonId), ExternalScore>,
}

impl Corpus {
    /// Assembles and cross-validates a corpus from in-memory parts. Papers and
    /// reviewers are re-sorted by id.
    pub fn from_parts(
        mut papers: Vec<Paper>,
        mut reviewers: Vec<Reviewer>,
        taxonomy: KeywordTaxonomy,
        bids: Vec<Bid>,
        coauthor_graph: CoauthorGraph,
        regions: BTreeSet<RegionId>,
        external_scores: BTreeMap<(PaperId, PersonId), ExternalScore>,
    ) -> Result<Self, CorpusError> {
        papers.sort_by(|a, b| a.id.cmp(&b.id));
        reviewers.sort_by(|a, b| a.id.cmp(&b.id));
        let mut corpus = Corpus {
            paper_index: HashMap::new(),
            reviewer_index: HashMap::new(),
            papers,
            reviewers,
            taxonomy,
            bids: BTreeMap::new(),
            coauthor_graph,
            regions,
            external_scores,
        };
        for (i, p) in corpus.papers.iter().enumerate() {
            if corpus.paper_index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateKey {
                    file: "papers".into(),
                    line: 0,
                    key: p.id.clone(),
                });
            }
        }
        for (i, r) in corpus.reviewers.iter().enumerate() {
            if corpus.reviewer_index.insert(r.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateKey {
                    file: "reviewers".into(),
                    line: 0,
                    key: r.id.clone(),
                });
            }
        }
        for b in bids {
            if b.level == BidLevel::NotEntered {
                corpus.bids.remove(&(b.reviewer_id, b.paper_id));
            } else {
                corpus.bids.insert((b.reviewer_id, b.paper_id), b.level);
            }
        }
        corpus.validate()?;
        Ok(corpus)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        if self.regions.is_empty() && !self.reviewers.is_empty() {
            return Err(CorpusError::schema("regions", 0, "at least one region is required"));
        }
        for (parent_line, (kw, parent)) in self.taxonomy.parent_of.iter().enumerate() {
            if self.taxonomy.contains(parent) {
                return Err(CorpusError::schema(
                    "keywords",
                    parent_line as u64 + 2,
                    format!("parent `{parent}` of `{kw}` is itself a keyword; the hierarchy has two levels"),
                ));
            }
        }
        for p in &self.papers {
            for kw in p.keywords() {
                if !self.taxonomy.contains(kw) {
                    return Err(CorpusError::dangling("papers", 0, "keyword", kw));
                }
            }
            if p.secondary_keywords.contains(&p.primary_keyword) {
                return Err(CorpusError::schema(
                    "papers",
                    0,
                    format!("paper `{}` lists its primary keyword as secondary", p.id),
                ));
            }
            if p.author_ids.is_empty() {
                return Err(CorpusError::schema("papers", 0, format!("paper `{}` has no authors", p.id)));
            }
        }
        for r in &self.reviewers {
            for kw in r.keywords() {
                if !self.taxonomy.contains(kw) {
                    return Err(CorpusError::dangling("reviewers", 0, "keyword", kw));
                }
            }
            if r.secondary_keywords.contains(&r.primary_keyword) {
                return Err(CorpusError::schema(
                    "reviewers",
                    0,
                    format!("reviewer `{}` lists its primary keyword as secondary", r.id),
                ));
            }
            if !self.regions.contains(&r.region) {
                return Err(CorpusError::dangling("reviewers", 0, "region", &r.region));
            }
            if r.capacity == 0 {
                return Err(CorpusError::schema("reviewers", 0, format!("reviewer `{}` has zero capacity", r.id)));
            }
        }
        for (r, p) in self.bids.keys() {
            if !self.reviewer_index.contains_key(r) {
                return Err(CorpusError::dangling("bids", 0, "reviewer", r));
            }
            if !self.paper_index.contains_key(p) {
                return Err(CorpusError::dangling("bids", 0, "paper", p));
            }
        }
        for (p, r) in self.external_scores.keys() {
            if !self.paper_index.contains_key(p) {
                return Err(CorpusError::dangling("external_scores", 0, "paper", p));
            }
            if !self.reviewer_index.contains_key(r) {
                return Err(CorpusError::dangling("external_scores", 0, "reviewer", r));
            }
        }
        Ok(())
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn reviewers(&self) -> &[Reviewer] {
        &self.reviewers
    }

    pub fn paper(&self, id: &str) -> Option<&Paper> {
        self.paper_index.get(id).map(|&i| &self.papers[i])
    }

    pub fn reviewer(&self, id: &str) -> Option<&Reviewer> {
        self.reviewer_index.get(id).map(|&i| &self.reviewers[i])
    }

    pub fn paper_position(&self, id: &str) -> Option<usize> {
        self.paper_index.get(id).copied()
    }

    pub fn reviewer_position(&self, id: &str) -> Option<usize> {
        self.reviewer_index.get(id).copied()
    }

    /// Stored bids only; a missing entry means `not_entered`.
    pub fn bids(&self) -> impl Iterator<Item = Bid> + '_ {
        self.bids.iter().map(|((r, p), &level)| Bid {
            reviewer_id: r.clone(),
            paper_id: p.clone(),
            level,
        })
    }

    pub fn bid(&self, reviewer: &str, paper: &str) -> BidLevel {
        self.bids
            .get(&(reviewer.to_string(), paper.to_string()))
            .copied()
            .unwrap_or(BidLevel::NotEntered)
    }

    pub fn bid_count(&self) -> usize {
        self.bids.len()
    }

    pub fn external_score(&self, paper: &str, reviewer: &str) -> ExternalScore {
        self.external_scores
            .get(&(paper.to_string(), reviewer.to_string()))
            .copied()
            .unwrap_or_default()
    }

    pub fn external_scores(&self) -> &BTreeMap<(PaperId, PersonId), ExternalScore> {
        &self.external_scores
    }

    /// Papers authored by each person.
    pub fn authorship(&self) -> BTreeMap<PersonId, BTreeSet<PaperId>> {
        let mut map: BTreeMap<PersonId, BTreeSet<PaperId>> = BTreeMap::new();
        for p in &self.papers {
            for a in &p.author_ids {
                map.entry(a.clone()).or_default().insert(p.id.clone());
            }
        }
        map
    }

    /// Restricts the corpus to the given papers and reviewers, dropping bids
    /// and external scores that fall outside. Taxonomy, regions and the
    /// coauthorship graph are kept whole.
    pub fn subset(&self, papers: &BTreeSet<PaperId>, reviewers: &BTreeSet<PersonId>) -> Corpus {
        let ps: Vec<Paper> = self.papers.iter().filter(|p| papers.contains(&p.id)).cloned().collect();
        let rs: Vec<Reviewer> = self
            .reviewers
            .iter()
            .filter(|r| reviewers.contains(&r.id))
            .cloned()
            .collect();
        let bids: Vec<Bid> = self
            .bids()
            .filter(|b| papers.contains(&b.paper_id) && reviewers.contains(&b.reviewer_id))
            .collect();
        let ext = self
            .external_scores
            .iter()
            .filter(|((p, r), _)| papers.contains(p) && reviewers.contains(r))
            .map(|(k, v)| (k.clone(), *v))
            .collect();
        Corpus::from_parts(
            ps,
            rs,
            self.taxonomy.clone(),
            bids,
            self.coauthor_graph.clone(),
            self.regions.clone(),
            ext,
        )
        .expect("a subset of a valid corpus is valid")
    }
}

/// Seniority in {0,1,2,3}. Level 2 is checked before level 1, so a reviewer
/// with exactly four papers lands on level 2.
pub fn seniority_level(inputs: &SeniorityInputs) -> u8 {
    let committees = inputs.prior_committee_count;
    let papers = inputs.published_paper_count;
    if committees >= 3 || papers >= 10 {
        3
    } else if (4..=9).contains(&papers) {
        2
    } else if (2..=4).contains(&papers) || (1..=2).contains(&committees) {
        1
    } else {
        0
    }
}

const DOMAIN_PREFIXES: [&str; 6] = ["cse", "cs", "eecs", "ee", "www", "mail"];
const ACADEMIC_SUFFIXES: [&str; 2] = ["ac", "edu"];

/// Canonical form of an affiliation domain: lowercased, department and host
/// prefixes removed, and `org.ac.xx` / `org.edu.xx` domains collapsed to the
/// organization label plus the suffix pair.
pub fn normalize_domain(raw: &str) -> String {
    let lowered = raw.trim().trim_matches('.').to_ascii_lowercase();
    let mut labels: Vec<&str> = lowered.split('.').filter(|l| !l.is_empty()).collect();
    let n = labels.len();
    let suffix_pair = n >= 3 && ACADEMIC_SUFFIXES.contains(&labels[n - 2]) && labels[n - 1].len() == 2;
    if suffix_pair {
        labels.drain(..n - 3);
    } else {
        while labels.len() > 2 && DOMAIN_PREFIXES.contains(&labels[0]) {
            labels.remove(0);
        }
    }
    labels.join(".")
}

// ---------------------------------------------------------------------------
// CSV ingest
// ---------------------------------------------------------------------------

/// Locations of the input files. Optional files may be absent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub papers: PathBuf,
    pub reviewers: PathBuf,
    pub bids: PathBuf,
    pub keywords: PathBuf,
    pub regions: PathBuf,
    pub coauthor_edges: Option<PathBuf>,
    pub person_meta: Option<PathBuf>,
    pub external_scores: Option<PathBuf>,
}

impl CorpusPaths {
    /// Standard file names inside `dir`; optional files are included only if
    /// they exist.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        CorpusPaths {
            papers: dir.join("papers.csv"),
            reviewers: dir.join("reviewers.csv"),
            bids: dir.join("bids.csv"),
            keywords: dir.join("keywords.csv"),
            regions: dir.join("regions.csv"),
            coauthor_edges: opt("coauthor_edges.csv"),
            person_meta: opt("person_meta.csv"),
            external_scores: opt("external_scores.csv"),
        }
    }
}

struct CsvTable {
    file: String,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl CsvTable {
    fn read(path: &Path, header: &[&str]) -> Result<Self, CorpusError> {
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let handle = std::fs::File::open(path).map_err(|source| CorpusError::Io {
            file: path.display().to_string(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(handle);
        let found = reader
            .headers()
            .map_err(|e| CorpusError::schema(&file, 1, e.to_string()))?
            .clone();
        let found: Vec<&str> = found.iter().map(str::trim).collect();
        if found != header {
            return Err(CorpusError::schema(
                &file,
                1,
                format!("expected header `{}`, found `{}`", header.join(","), found.join(",")),
            ));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                CorpusError::schema(&file, line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, rec));
        }
        Ok(CsvTable { file, rows })
    }

    fn err(&self, line: u64, message: impl Into<String>) -> CorpusError {
        CorpusError::schema(&self.file, line, message)
    }

    fn parse<T: FromStr>(&self, line: u64, field: &str, raw: &str) -> Result<T, CorpusError>
    where
        T::Err: fmt::Display,
    {
        raw.trim()
            .parse::<T>()
            .map_err(|e| self.err(line, format!("bad {field} `{raw}`: {e}")))
    }

    fn nonempty<'a>(&self, line: u64, field: &str, raw: &'a str) -> Result<&'a str, CorpusError> {
        let v = raw.trim();
        if v.is_empty() {
            Err(self.err(line, format!("empty {field}")))
        } else {
            Ok(v)
        }
    }
}

fn split_list(raw: &str) -> BTreeSet<String> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn join_list<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items.into_iter().map(String::as_str).collect::<Vec<_>>().join(";")
}

pub const PAPERS_HEADER: [&str; 5] = ["id", "primary_keyword", "secondary_keywords", "authors", "track"];
pub const REVIEWERS_HEADER: [&str; 10] = [
    "id",
    "role",
    "primary_keyword",
    "secondary_keywords",
    "region",
    "prior_committee_count",
    "published_paper_count",
    "capacity",
    "conflict_domains",
    "conflict_people",
];
pub const BIDS_HEADER: [&str; 3] = ["reviewer_id", "paper_id", "level"];
pub const KEYWORDS_HEADER: [&str; 2] = ["id", "parent"];
pub const REGIONS_HEADER: [&str; 1] = ["id"];
pub const EDGES_HEADER: [&str; 4] = ["a", "b", "paper_count", "last_year"];
pub const PERSON_META_HEADER: [&str; 5] = ["id", "first_pub_year", "paper_count", "domains", "early_counts"];
pub const EXTERNAL_HEADER: [&str; 4] = ["paper_id", "reviewer_id", "tpms", "acl"];

/// Loads and cross-validates every input file. Duplicate bids collapse to
/// the last occurrence.
pub fn load_corpus(paths: &CorpusPaths) -> Result<Corpus, CorpusError> {
    let regions_t = CsvTable::read(&paths.regions, &REGIONS_HEADER)?;
    let mut regions = BTreeSet::new();
    for (line, rec) in &regions_t.rows {
        let id = regions_t.nonempty(*line, "region id", &rec[0])?;
        if !regions.insert(id.to_string()) {
            return Err(CorpusError::DuplicateKey {
                file: regions_t.file.clone(),
                line: *line,
                key: id.to_string(),
            });
        }
    }

    let kw_t = CsvTable::read(&paths.keywords, &KEYWORDS_HEADER)?;
    let mut parent_of = BTreeMap::new();
    for (line, rec) in &kw_t.rows {
        let id = kw_t.nonempty(*line, "keyword id", &rec[0])?;
        let parent = kw_t.nonempty(*line, "parent", &rec[1])?;
        if parent_of.insert(id.to_string(), parent.to_string()).is_some() {
            return Err(CorpusError::DuplicateKey {
                file: kw_t.file.clone(),
                line: *line,
                key: id.to_string(),
            });
        }
    }
    let taxonomy = KeywordTaxonomy::new(parent_of);

    let papers_t = CsvTable::read(&paths.papers, &PAPERS_HEADER)?;
    let mut papers = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, rec) in &papers_t.rows {
        let id = papers_t.nonempty(*line, "paper id", &rec[0])?.to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateKey {
                file: papers_t.file.clone(),
                line: *line,
                key: id,
            });
        }
        let primary = papers_t.nonempty(*line, "primary_keyword", &rec[1])?.to_string();
        let secondary = split_list(&rec[2]);
        let authors = split_list(&rec[3]);
        for kw in std::iter::once(&primary).chain(secondary.iter()) {
            if !taxonomy.contains(kw) {
                return Err(CorpusError::dangling(&papers_t.file, *line, "keyword", kw));
            }
        }
        if secondary.contains(&primary) {
            return Err(papers_t.err(*line, "secondary keywords repeat the primary keyword"));
        }
        if authors.is_empty() {
            return Err(papers_t.err(*line, "paper has no authors"));
        }
        let track = match rec[4].trim() {
            "main" | "" => Track::Main,
            "fasttrack" => Track::Fasttrack,
            other => return Err(papers_t.err(*line, format!("unknown track `{other}`"))),
        };
        papers.push(Paper {
            id,
            primary_keyword: primary,
            secondary_keywords: secondary,
            author_ids: authors,
            track,
        });
    }

    let rev_t = CsvTable::read(&paths.reviewers, &REVIEWERS_HEADER)?;
    let mut reviewers = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, rec) in &rev_t.rows {
        let id = rev_t.nonempty(*line, "reviewer id", &rec[0])?.to_string();
        if !seen.insert(id.clone()) {
            return Err(CorpusError::DuplicateKey {
                file: rev_t.file.clone(),
                line: *line,
                key: id,
            });
        }
        let role: Role = rev_t.parse(*line, "role", &rec[1])?;
        let primary = rev_t.nonempty(*line, "primary_keyword", &rec[2])?.to_string();
        let secondary = split_list(&rec[3]);
        for kw in std::iter::once(&primary).chain(secondary.iter()) {
            if !taxonomy.contains(kw) {
                return Err(CorpusError::dangling(&rev_t.file, *line, "keyword", kw));
            }
        }
        if secondary.contains(&primary) {
            return Err(rev_t.err(*line, "secondary keywords repeat the primary keyword"));
        }
        let region = rev_t.nonempty(*line, "region", &rec[4])?.to_string();
        if !regions.contains(&region) {
            return Err(CorpusError::dangling(&rev_t.file, *line, "region", &region));
        }
        let capacity: u32 = rev_t.parse(*line, "capacity", &rec[7])?;
        if capacity == 0 {
            return Err(rev_t.err(*line, "capacity must be at least 1"));
        }
        reviewers.push(Reviewer {
            id,
            role,
            primary_keyword: primary,
            secondary_keywords: secondary,
            region,
            seniority_inputs: SeniorityInputs {
                prior_committee_count: rev_t.parse(*line, "prior_committee_count", &rec[5])?,
                published_paper_count: rev_t.parse(*line, "published_paper_count", &rec[6])?,
            },
            capacity,
            declared_conflict_domains: split_list(&rec[8]).iter().map(|d| normalize_domain(d)).collect(),
            declared_conflict_people: split_list(&rec[9]),
        });
    }

    let paper_ids: BTreeSet<&str> = papers.iter().map(|p| p.id.as_str()).collect();
    let reviewer_ids: BTreeSet<&str> = reviewers.iter().map(|r| r.id.as_str()).collect();

    let bids_t = CsvTable::read(&paths.bids, &BIDS_HEADER)?;
    let mut bids = Vec::new();
    for (line, rec) in &bids_t.rows {
        let r = bids_t.nonempty(*line, "reviewer_id", &rec[0])?;
        let p = bids_t.nonempty(*line, "paper_id", &rec[1])?;
        if !reviewer_ids.contains(r) {
            return Err(CorpusError::dangling(&bids_t.file, *line, "reviewer", r));
        }
        if !paper_ids.contains(p) {
            return Err(CorpusError::dangling(&bids_t.file, *line, "paper", p));
        }
        let level: BidLevel = bids_t.parse(*line, "level", &rec[2])?;
        bids.push(Bid {
            reviewer_id: r.to_string(),
            paper_id: p.to_string(),
            level,
        });
    }

    let mut graph = CoauthorGraph::new();
    if let Some(path) = &paths.coauthor_edges {
        let t = CsvTable::read(path, &EDGES_HEADER)?;
        for (line, rec) in &t.rows {
            let a = t.nonempty(*line, "a", &rec[0])?;
            let b = t.nonempty(*line, "b", &rec[1])?;
            if a == b {
                return Err(t.err(*line, "self-loop in coauthor graph"));
            }
            let paper_count: u32 = t.parse(*line, "paper_count", &rec[2])?;
            if paper_count == 0 {
                return Err(t.err(*line, "paper_count must be at least 1"));
            }
            if graph.edge(a, b).is_some() {
                return Err(CorpusError::DuplicateKey {
                    file: t.file.clone(),
                    line: *line,
                    key: format!("{a}-{b}"),
                });
            }
            graph.add_edge(
                a,
                b,
                CoauthorEdge {
                    paper_count,
                    last_year: t.parse(*line, "last_year", &rec[3])?,
                },
            );
        }
    }
    if let Some(path) = &paths.person_meta {
        let t = CsvTable::read(path, &PERSON_META_HEADER)?;
        for (line, rec) in &t.rows {
            let id = t.nonempty(*line, "id", &rec[0])?;
            if graph.person(id).is_some() {
                return Err(CorpusError::DuplicateKey {
                    file: t.file.clone(),
                    line: *line,
                    key: id.to_string(),
                });
            }
            let mut early_counts = BTreeMap::new();
            for item in split_list(&rec[4]) {
                let (who, count) = item
                    .split_once(':')
                    .ok_or_else(|| t.err(*line, format!("early_counts entry `{item}` is not person:count")))?;
                let count: u32 = t.parse(*line, "early count", count)?;
                if count > 10 {
                    return Err(t.err(*line, "early counts cover at most the first 10 papers"));
                }
                early_counts.insert(who.trim().to_string(), count);
            }
            graph.set_person(
                id,
                PersonMeta {
                    first_pub_year: t.parse(*line, "first_pub_year", &rec[1])?,
                    paper_count: t.parse(*line, "paper_count", &rec[2])?,
                    domains: split_list(&rec[3]).iter().map(|d| normalize_domain(d)).collect(),
                    early_counts,
                },
            );
        }
    }

    let mut external = BTreeMap::new();
    if let Some(path) = &paths.external_scores {
        let t = CsvTable::read(path, &EXTERNAL_HEADER)?;
        for (line, rec) in &t.rows {
            let p = t.nonempty(*line, "paper_id", &rec[0])?;
            let r = t.nonempty(*line, "reviewer_id", &rec[1])?;
            if !paper_ids.contains(p) {
                return Err(CorpusError::dangling(&t.file, *line, "paper", p));
            }
            if !reviewer_ids.contains(r) {
                return Err(CorpusError::dangling(&t.file, *line, "reviewer", r));
            }
            let opt = |field: &str, raw: &str| -> Result<Option<f64>, CorpusError> {
                if raw.trim().is_empty() {
                    return Ok(None);
                }
                let v: f64 = t.parse(*line, field, raw)?;
                if !v.is_finite() {
                    return Err(t.err(*line, format!("{field} must be finite")));
                }
                Ok(Some(v))
            };
            let score = ExternalScore {
                tpms: opt("tpms", &rec[2])?,
                acl: opt("acl", &rec[3])?,
            };
            if external.insert((p.to_string(), r.to_string()), score).is_some() {
                return Err(CorpusError::DuplicateKey {
                    file: t.file.clone(),
                    line: *line,
                    key: format!("{p},{r}"),
                });
            }
        }
    }

    Corpus::from_parts(papers, reviewers, taxonomy, bids, graph, regions, external)
}

/// Writes the corpus back out in the ingest format; loading the result
/// yields an identical corpus.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
        file: dir.display().to_string(),
        source,
    })?;
    fn write(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CorpusError> {
        let path = dir.join(name);
        let io = |source: std::io::Error| CorpusError::Io {
            file: path.display().to_string(),
            source,
        };
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(e.into()))?;
        w.write_record(header).map_err(|e| io(e.into()))?;
        for row in rows {
            w.write_record(&row).map_err(|e| io(e.into()))?;
        }
        w.flush().map_err(io)
    }

    write(
        dir,
        "regions.csv",
        &REGIONS_HEADER,
        corpus.regions.iter().map(|r| vec![r.clone()]).collect(),
    )?;
    write(
        dir,
        "keywords.csv",
        &KEYWORDS_HEADER,
        corpus
            .taxonomy
            .parent_of
            .iter()
            .map(|(k, p)| vec![k.clone(), p.clone()])
            .collect(),
    )?;
    write(
        dir,
        "papers.csv",
        &PAPERS_HEADER,
        corpus
            .papers
            .iter()
            .map(|p| {
                vec![
                    p.id.clone(),
                    p.primary_keyword.clone(),
                    join_list(&p.secondary_keywords),
                    join_list(&p.author_ids),
                    match p.track {
                        Track::Main => "main".into(),
                        Track::Fasttrack => "fasttrack".into(),
                    },
                ]
            })
            .collect(),
    )?;
    write(
        dir,
        "reviewers.csv",
        &REVIEWERS_HEADER,
        corpus
            .reviewers
            .iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.role.as_str().to_string(),
                    r.primary_keyword.clone(),
                    join_list(&r.secondary_keywords),
                    r.region.clone(),
                    r.seniority_inputs.prior_committee_count.to_string(),
                    r.seniority_inputs.published_paper_count.to_string(),
                    r.capacity.to_string(),
                    join_list(&r.declared_conflict_domains),
                    join_list(&r.declared_conflict_people),
                ]
            })
            .collect(),
    )?;
    write(
        dir,
        "bids.csv",
        &BIDS_HEADER,
        corpus
            .bids()
            .map(|b| vec![b.reviewer_id, b.paper_id, b.level.as_str().to_string()])
            .collect(),
    )?;
    write(
        dir,
        "coauthor_edges.csv",
        &EDGES_HEADER,
        corpus
            .coauthor_graph
            .edges()
            .map(|(a, b, e)| vec![a.clone(), b.clone(), e.paper_count.to_string(), e.last_year.to_string()])
            .collect(),
    )?;
    write(
        dir,
        "person_meta.csv",
        &PERSON_META_HEADER,
        corpus
            .coauthor_graph
            .people()
            .iter()
            .map(|(id, m)| {
                vec![
                    id.clone(),
                    m.first_pub_year.to_string(),
                    m.paper_count.to_string(),
                    join_list(&m.domains),
                    m.early_counts
                        .iter()
                        .map(|(k, v)| format!("{k}:{v}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ]
            })
            .collect(),
    )?;
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    write(
        dir,
        "external_scores.csv",
        &EXTERNAL_HEADER,
        corpus
            .external_scores
            .iter()
            .map(|((p, r), s)| vec![p.clone(), r.clone(), fmt_opt(s.tpms), fmt_opt(s.acl)])
            .collect(),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn domain_examples() {
        assert_eq!(normalize_domain("cse.iitd.ac.in"), "iitd.ac.in");
        assert_eq!(normalize_domain("iitd.ac.in"), "iitd.ac.in");
        assert_eq!(normalize_domain("CSE.Stanford.EDU"), "stanford.edu");
        assert_eq!(normalize_domain("www.mail.example.com"), "example.com");
        assert_eq!(normalize_domain("ai.stanford.edu"), "ai.stanford.edu");
        assert_eq!(normalize_domain("cs.ox.ac.uk"), "ox.ac.uk");
    }

    #[test]
    fn seniority_examples() {
        let lvl = |c, p| {
            seniority_level(&SeniorityInputs {
                prior_committee_count: c,
                published_paper_count: p,
            })
        };
        assert_eq!(lvl(3, 0), 3);
        assert_eq!(lvl(0, 7), 2);
        assert_eq!(lvl(0, 0), 0);
        assert_eq!(lvl(0, 10), 3);
        // overlap at four papers resolves upward
        assert_eq!(lvl(0, 4), 2);
        assert_eq!(lvl(0, 2), 1);
        assert_eq!(lvl(2, 0), 1);
    }

    #[test]
    fn bid_level_order_and_parse() {
        assert!(BidLevel::NotWilling < BidLevel::NotEntered);
        assert!(BidLevel::InAPinch < BidLevel::Willing);
        assert!(BidLevel::Willing < BidLevel::Eager);
        for l in [
            BidLevel::NotWilling,
            BidLevel::NotEntered,
            BidLevel::InAPinch,
            BidLevel::Willing,
            BidLevel::Eager,
        ] {
            assert_eq!(l.as_str().parse::<BidLevel>().unwrap(), l);
        }
    }

    proptest! {
        #[test]
        fn normalize_domain_is_idempotent(labels in prop::collection::vec(
            prop::sample::select(vec!["cse", "cs", "EECS", "ee", "www", "mail", "ac", "edu", "in", "uk",
                                      "stanford", "iitd", "com", "org", "x", "ox"]), 1..6)) {
            let raw = labels.join(".");
            let once = normalize_domain(&raw);
            prop_assert_eq!(normalize_domain(&once), once);
        }

        #[test]
        fn seniority_is_monotone(c in 0u32..12, p in 0u32..15, dc in 0u32..3, dp in 0u32..3) {
            let base = seniority_level(&SeniorityInputs { prior_committee_count: c, published_paper_count: p });
            let more = seniority_level(&SeniorityInputs { prior_committee_count: c + dc, published_paper_count: p + dp });
            prop_assert!(more >= base);
        }
    }
}
