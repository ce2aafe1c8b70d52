//! Affinity scores: keyword expertise (SAM), normalized external text
//! similarity, and bid-adjusted aggregate scores in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bids::FilteredBids;
use crate::coi::ConflictSet;
use crate::corpus::{BidLevel, Corpus, KeywordId, Paper, Reviewer};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("normalizer for {component} needs at least two distinct raw values")]
    DegenerateSamples { component: String },
    #[error("annotations line {line}: {message}")]
    Annotation { line: u64, message: String },
    #[error("annotations: {0}")]
    Io(#[from] std::io::Error),
}

/// Weight of a declared secondary keyword on either side.
pub const SECONDARY_WEIGHT: f64 = 0.5;
/// Imputed expertise for keywords on a reviewer's own submissions.
pub const OWN_PAPER_IMPUTE: f64 = 0.2;
/// Imputed expertise, before scaling by rho, for keywords under a shared parent.
pub const SIBLING_IMPUTE: f64 = 0.4;
/// Aggregate scores below this are replaced during cleanup.
pub const CLEANUP_THRESHOLD: f64 = 0.15;

/// Keyword occurrence statistics over reviewers and papers.
#[derive(Debug, Clone, Default)]
pub struct Cooccurrence {
    single: HashMap<KeywordId, u32>,
    pair: HashMap<(KeywordId, KeywordId), u32>,
}

impl Cooccurrence {
    pub fn from_corpus(c: &Corpus) -> Self {
        let mut co = Cooccurrence::default();
        let lists = c
            .reviewers()
            .iter()
            .map(|r| r.keywords().cloned().collect::<BTreeSet<_>>())
            .chain(c.papers().iter().map(|p| p.keywords().cloned().collect()));
        for kws in lists {
            for a in &kws {
                *co.single.entry(a.clone()).or_default() += 1;
                for b in &kws {
                    if a != b {
                        *co.pair.entry((a.clone(), b.clone())).or_default() += 1;
                    }
                }
            }
        }
        co
    }

    pub fn count(&self, kw: &str) -> u32 {
        self.single.get(kw).copied().unwrap_or(0)
    }

    /// `n(psi, psi') / n(psi)`; 0 for an unseen `psi`.
    pub fn conditional(&self, psi: &str, psi2: &str) -> f64 {
        let n = self.count(psi);
        if n == 0 {
            return 0.0;
        }
        let joint = if psi == psi2 {
            n
        } else {
            self.pair
                .get(&(psi.to_string(), psi2.to_string()))
                .copied()
                .unwrap_or(0)
        };
        joint as f64 / n as f64
    }
}

pub fn cooccurrence(c: &Corpus, psi: &str, psi2: &str) -> f64 {
    Cooccurrence::from_corpus(c).conditional(psi, psi2)
}

/// A reviewer's expertise over the whole taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DenseExpertise {
    pub values: BTreeMap<KeywordId, f64>,
}

impl DenseExpertise {
    pub fn get(&self, kw: &str) -> f64 {
        self.values.get(kw).copied().unwrap_or(0.0)
    }
}

/// Declared keywords keep 1 (primary) or 0.5 (secondary); every other keyword
/// takes the max over co-occurrence, own-submission and shared-parent
/// imputations.
pub fn densify_with(c: &Corpus, co: &Cooccurrence, r: &Reviewer, own_keywords: &BTreeSet<&str>) -> DenseExpertise {
    let declared: Vec<(&str, f64)> = std::iter::once((r.primary_keyword.as_str(), 1.0))
        .chain(r.secondary_keywords.iter().map(|k| (k.as_str(), SECONDARY_WEIGHT)))
        .collect();
    let mut values = BTreeMap::new();
    for kw in c.taxonomy.keywords() {
        let v = if *kw == r.primary_keyword {
            1.0
        } else if r.secondary_keywords.contains(kw) {
            SECONDARY_WEIGHT
        } else {
            let parent = c.taxonomy.parent(kw);
            let mut best: f64 = if own_keywords.contains(kw.as_str()) {
                OWN_PAPER_IMPUTE
            } else {
                0.0
            };
            for &(psi, rho) in &declared {
                best = best.max(rho * co.conditional(psi, kw));
                if parent.is_some() && c.taxonomy.parent(psi) == parent {
                    best = best.max(rho * SIBLING_IMPUTE);
                }
            }
            best
        };
        if v > 0.0 {
            values.insert(kw.clone(), v);
        }
    }
    DenseExpertise { values }
}

pub fn densify(c: &Corpus, r: &Reviewer) -> DenseExpertise {
    let co = Cooccurrence::from_corpus(c);
    let own = own_keywords(c, &r.id);
    densify_with(c, &co, r, &own)
}

fn own_keywords<'a>(c: &'a Corpus, person: &str) -> BTreeSet<&'a str> {
    c.papers()
        .iter()
        .filter(|p| p.author_ids.contains(person))
        .flat_map(|p| p.keywords().map(String::as_str))
        .collect()
}

/// Normalizing constant for a paper with `m` secondary keywords.
pub fn sam_normalizer(m: usize) -> f64 {
    1.0 + (1..=m).map(|k| 0.5f64.powi(k as i32)).sum::<f64>()
}

/// Primary match plus geometrically discounted secondary matches, sorted in
/// decreasing order, over the normalizer.
pub fn sam(paper: &Paper, dense: &DenseExpertise) -> f64 {
    let mut products: Vec<(f64, &str)> = paper
        .secondary_keywords
        .iter()
        .map(|k| (dense.get(k), k.as_str()))
        .collect();
    products.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let secondary: f64 = products
        .iter()
        .enumerate()
        .map(|(m, (v, _))| 0.5f64.powi(m as i32 + 1) * v)
        .sum();
    (dense.get(&paper.primary_keyword) + secondary) / sam_normalizer(products.len())
}

/// `x -> clip(slope * x + intercept, 0, 1)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalizer {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::IDENTITY
    }
}

impl Normalizer {
    pub const IDENTITY: Normalizer = Normalizer {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn apply(&self, raw: f64) -> f64 {
        (self.slope * raw + self.intercept).clamp(0.0, 1.0)
    }
}

/// Ordinary least squares fit of annotation targets on raw scores.
pub fn fit_normalizer(samples: &[(f64, f64)]) -> Result<Normalizer, ScoringError> {
    fit_named(samples, "score")
}

fn fit_named(samples: &[(f64, f64)], component: &str) -> Result<Normalizer, ScoringError> {
    let degenerate = || ScoringError::DegenerateSamples {
        component: component.to_string(),
    };
    if samples.len() < 2 {
        return Err(degenerate());
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(degenerate());
    }
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(Normalizer {
        slope,
        intercept: my - slope * mx,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Normalizers {
    pub tpms: Normalizer,
    pub acl: Normalizer,
}

pub const ANNOTATION_LABELS: [f64; 4] = [1.0, 0.75, 0.5, 0.0];

/// Fits per-component normalizers from `component,raw,y` rows. Components
/// without rows keep the identity.
pub fn load_annotations(path: &Path) -> Result<Normalizers, ScoringError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| ScoringError::Annotation {
        line: 0,
        message: e.to_string(),
    })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| ScoringError::Annotation {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != ["component", "raw", "y"] {
        return Err(ScoringError::Annotation {
            line: 1,
            message: format!("expected header `component,raw,y`, found `{}`", header.join(",")),
        });
    }
    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| ScoringError::Annotation {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| ScoringError::Annotation { line, message };
        let component = rec[0].trim().to_string();
        if component != "tpms" && component != "acl" {
            return Err(bad(format!("unknown component `{component}`")));
        }
        let raw: f64 = rec[1].trim().parse().map_err(|_| bad(format!("bad raw `{}`", &rec[1])))?;
        let y: f64 = rec[2].trim().parse().map_err(|_| bad(format!("bad y `{}`", &rec[2])))?;
        if !ANNOTATION_LABELS.contains(&y) {
            return Err(bad(format!("label {y} is not one of 1, 0.75, 0.5, 0")));
        }
        groups.entry(component).or_default().push((raw, y));
    }
    let mut out = Normalizers::default();
    if let Some(s) = groups.get("tpms") {
        out.tpms = fit_named(s, "tpms")?;
    }
    if let Some(s) = groups.get("acl") {
        out.acl = fit_named(s, "acl")?;
    }
    Ok(out)
}

/// Weighted blend of whichever components are present; SAM is always present.
pub fn base_score(tpms: Option<f64>, acl: Option<f64>, sam: f64) -> f64 {
    match (tpms, acl) {
        (Some(t), Some(a)) => 0.25 * t + 0.25 * a + 0.5 * sam,
        (None, Some(a)) => 0.5 * a + 0.5 * sam,
        (Some(t), None) => 0.5 * t + 0.5 * sam,
        (None, None) => sam,
    }
}

pub fn aggscore(base: f64, bid: BidLevel) -> f64 {
    base.powf(bid.exponent())
}

/// Lifts tiny aggregate scores to `min(sam^e, 0.15)` so that every pair keeps
/// some signal from expertise alone.
pub fn cleanup(agg: f64, sam: f64, bid: BidLevel) -> f64 {
    if agg < CLEANUP_THRESHOLD {
        sam.powf(bid.exponent()).min(CLEANUP_THRESHOLD)
    } else {
        agg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreEntry {
    pub sam: f64,
    pub tpms_norm: Option<f64>,
    pub acl_norm: Option<f64>,
    pub base: f64,
    pub bid: BidLevel,
    /// Final value after cleanup.
    pub aggscore: f64,
}

/// Scores for every non-conflicting pair, indexed by corpus positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    /// Per paper position: (reviewer position, entry), sorted by reviewer.
    rows: Vec<Vec<(usize, ScoreEntry)>>,
}

impl ScoreMatrix {
    pub fn get(&self, paper: usize, reviewer: usize) -> Option<&ScoreEntry> {
        let row = self.rows.get(paper)?;
        row.binary_search_by_key(&reviewer, |e| e.0).ok().map(|i| &row[i].1)
    }

    pub fn row(&self, paper: usize) -> &[(usize, ScoreEntry)] {
        self.rows.get(paper).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn paper_count(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &ScoreEntry)> {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(p, row)| row.iter().map(move |(r, e)| (p, *r, e)))
    }

    /// Builds a matrix directly from per-position entries.
    pub fn from_entries(papers: usize, entries: impl IntoIterator<Item = (usize, usize, ScoreEntry)>) -> Self {
        let mut rows = vec![Vec::new(); papers];
        for (p, r, e) in entries {
            rows[p].push((r, e));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            row.dedup_by_key(|e| e.0);
        }
        ScoreMatrix { rows }
    }
}

pub fn score_pair(
    paper: &Paper,
    dense: &DenseExpertise,
    tpms_raw: Option<f64>,
    acl_raw: Option<f64>,
    bid: BidLevel,
    normalizers: &Normalizers,
) -> ScoreEntry {
    let s = sam(paper, dense);
    let tpms_norm = tpms_raw.map(|t| normalizers.tpms.apply(t));
    let acl_norm = acl_raw.map(|a| normalizers.acl.apply(a));
    let base = base_score(tpms_norm, acl_norm, s);
    let agg = cleanup(aggscore(base, bid), s, bid);
    ScoreEntry {
        sam: s,
        tpms_norm,
        acl_norm,
        base,
        bid,
        aggscore: agg,
    }
}

pub fn build_score_matrix(
    c: &Corpus,
    conflicts: &ConflictSet,
    bids: &FilteredBids,
    normalizers: &Normalizers,
) -> ScoreMatrix {
    let co = Cooccurrence::from_corpus(c);
    let dense: Vec<DenseExpertise> = c
        .reviewers()
        .par_iter()
        .map(|r| densify_with(c, &co, r, &own_keywords(c, &r.id)))
        .collect();
    let rows = c
        .papers()
        .par_iter()
        .map(|p| {
            c.reviewers()
                .iter()
                .enumerate()
                .filter(|(_, r)| !conflicts.contains(&p.id, &r.id))
                .map(|(j, r)| {
                    let ext = c.external_score(&p.id, &r.id);
                    (j, score_pair(p, &dense[j], ext.tpms, ext.acl, bids.level(&r.id, &p.id), normalizers))
                })
                .collect()
        })
        .collect();
    ScoreMatrix { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Role;
    use crate::testutil::CorpusBuilder;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-9;

    fn paper(primary: &str, secondary: &[&str]) -> Paper {
        Paper {
            id: "p".into(),
            primary_keyword: primary.into(),
            secondary_keywords: secondary.iter().map(|s| s.to_string()).collect(),
            author_ids: ["x".to_string()].into_iter().collect(),
            track: crate::corpus::Track::Main,
        }
    }

    fn dense(vals: &[(&str, f64)]) -> DenseExpertise {
        DenseExpertise {
            values: vals.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    #[test]
    fn cooccurrence_ratio() {
        // 20 entities list k1, 5 of them also list k2
        let mut b = CorpusBuilder::new();
        for i in 0..20 {
            let sec: &[&str] = if i < 5 { &["k2"] } else { &[] };
            b = b.reviewer(&format!("r{i:02}"), Role::Pc, "k1", sec);
        }
        b = b.reviewer("z", Role::Pc, "k3", &[]);
        let c = b.build();
        assert_abs_diff_eq!(cooccurrence(&c, "k1", "k2"), 0.25, epsilon = TOL);
        assert_abs_diff_eq!(cooccurrence(&c, "k1", "k1"), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(cooccurrence(&c, "k1", "k3"), 0.0, epsilon = TOL);
        assert_abs_diff_eq!(cooccurrence(&c, "nope", "k1"), 0.0, epsilon = TOL);
    }

    #[test]
    fn densify_sources() {
        let c = CorpusBuilder::new()
            .keyword("prim", "A")
            .keyword("sib", "A")
            .keyword("own", "B")
            .keyword("hot", "A")
            .keyword("far", "C")
            .reviewer("r", Role::Pc, "prim", &[])
            .paper("p", "own", &[], &["r"])
            // 9 of 10 listings of prim also list hot
            .paper("q0", "prim", &["hot"], &["x"])
            .paper("q1", "prim", &["hot"], &["x"])
            .paper("q2", "prim", &["hot"], &["x"])
            .paper("q3", "prim", &["hot"], &["x"])
            .paper("q4", "prim", &["hot"], &["x"])
            .paper("q5", "prim", &["hot"], &["x"])
            .paper("q6", "prim", &["hot"], &["x"])
            .paper("q7", "prim", &["hot"], &["x"])
            .paper("q8", "prim", &["hot"], &["x"])
            .paper("f", "far", &[], &["x"])
            .build();
        let r = c.reviewer("r").unwrap();
        let d = densify(&c, r);
        assert_abs_diff_eq!(d.get("prim"), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(d.get("own"), 0.2, epsilon = TOL);
        assert_abs_diff_eq!(d.get("sib"), 0.4, epsilon = TOL);
        assert_abs_diff_eq!(d.get("hot"), 0.9, epsilon = TOL);
        assert_abs_diff_eq!(d.get("far"), 0.0, epsilon = TOL);
    }

    #[test]
    fn secondary_sibling_scaled_by_rho() {
        let c = CorpusBuilder::new()
            .keyword("prim", "A")
            .keyword("sec", "B")
            .keyword("sib", "B")
            .reviewer("r", Role::Pc, "prim", &["sec"])
            .build();
        let d = densify(&c, c.reviewer("r").unwrap());
        assert_abs_diff_eq!(d.get("sec"), 0.5, epsilon = TOL);
        assert_abs_diff_eq!(d.get("sib"), 0.2, epsilon = TOL);
    }

    #[test]
    fn sam_examples() {
        assert_abs_diff_eq!(sam(&paper("a", &[]), &dense(&[("a", 1.0)])), 1.0, epsilon = TOL);
        assert_abs_diff_eq!(sam(&paper("a", &[]), &dense(&[("b", 1.0), ("a", 0.5)])), 0.5, epsilon = TOL);
        assert_abs_diff_eq!(
            sam(&paper("a", &["b"]), &dense(&[("a", 1.0), ("b", 0.5)])),
            (1.0 + 0.25) / 1.5,
            epsilon = TOL
        );
    }

    #[test]
    fn normalizer_examples() {
        let n = fit_normalizer(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(n.slope, 1.0, epsilon = TOL);
        assert_abs_diff_eq!(n.intercept, 0.0, epsilon = TOL);
        let n = fit_normalizer(&[(0.0, 0.0), (2.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(n.slope, 0.5, epsilon = TOL);
        assert_abs_diff_eq!(n.apply(3.0), 1.0, epsilon = TOL);
        let n = fit_normalizer(&[(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(n.slope, 0.0, epsilon = TOL);
        assert_abs_diff_eq!(n.intercept, 1.0, epsilon = TOL);
        assert!(fit_normalizer(&[(0.3, 0.0), (0.3, 1.0)]).is_err());
    }

    #[test]
    fn base_and_agg_examples() {
        assert_abs_diff_eq!(base_score(Some(0.8), Some(0.6), 0.7), 0.70, epsilon = TOL);
        assert_abs_diff_eq!(base_score(None, Some(0.6), 0.7), 0.65, epsilon = TOL);
        assert_abs_diff_eq!(base_score(None, None, 0.7), 0.7, epsilon = TOL);
        assert_abs_diff_eq!(aggscore(0.8, BidLevel::NotEntered), 0.8, epsilon = TOL);
        assert_abs_diff_eq!(aggscore(0.9, BidLevel::NotWilling), 0.121_576_654_590_569_3, epsilon = 1e-12);
        assert_abs_diff_eq!(aggscore(0.81, BidLevel::Willing), 0.81f64.powf(0.4), epsilon = TOL);
        assert!((aggscore(0.81, BidLevel::Willing) - 0.9191).abs() < 1e-4);
    }

    #[test]
    fn cleanup_examples() {
        assert_abs_diff_eq!(cleanup(0.10, 0.3, BidLevel::Eager), 0.15, epsilon = TOL);
        assert_abs_diff_eq!(cleanup(0.10, 0.04, BidLevel::NotEntered), 0.04, epsilon = TOL);
        assert_abs_diff_eq!(cleanup(0.5, 0.0, BidLevel::NotWilling), 0.5, epsilon = TOL);
    }

    #[test]
    fn matrix_skips_conflicts_and_defaults_to_sam() {
        let c = CorpusBuilder::new()
            .paper("p1", "a", &[], &["x"])
            .paper("p2", "b", &[], &["y"])
            .reviewer("r1", Role::Pc, "a", &[])
            .reviewer("r2", Role::Pc, "b", &[])
            .reviewer("r3", Role::Spc, "a", &["b"])
            .build();
        let mut cs = ConflictSet::new();
        cs.insert("p1", "r1", crate::coi::ConflictReason::DeclaredPerson);
        let m = build_score_matrix(&c, &cs, &FilteredBids::unfiltered(&c), &Normalizers::default());
        assert_eq!(m.len(), 5);
        assert!(m.get(0, 0).is_none());
        let e = m.get(1, 1).unwrap();
        assert_abs_diff_eq!(e.aggscore, e.sam, epsilon = TOL);
        assert_abs_diff_eq!(e.sam, 1.0, epsilon = TOL);
    }

    #[test]
    fn matrix_matches_hand_values() {
        // 2 papers x 3 reviewers, keywords a and b under separate parents
        let c = CorpusBuilder::new()
            .keyword("a", "A")
            .keyword("b", "B")
            .paper("p1", "a", &["b"], &["x"])
            .paper("p2", "b", &[], &["y"])
            .reviewer("r1", Role::Pc, "a", &[])
            .reviewer("r2", Role::Pc, "b", &["a"])
            .reviewer("r3", Role::Spc, "b", &[])
            .bid("r1", "p1", BidLevel::Eager)
            .bid("r3", "p1", BidLevel::NotWilling)
            .external("p1", "r1", Some(0.8), Some(0.6))
            .external("p2", "r2", None, Some(0.4))
            .build();
        let m = build_score_matrix(&c, &ConflictSet::new(), &FilteredBids::unfiltered(&c), &Normalizers::default());
        assert_eq!(m.len(), 6);
        // entities: p1{a,b} p2{b} r1{a} r2{b,a} r3{b}; n(a)=3, n(a,b)=2, n(b)=4
        let p_b_given_a = 2.0 / 3.0;
        let p_a_given_b = 2.0 / 4.0;
        let z = 1.5;
        // r1 on p1: dense a=1, b=P(b|a)
        let s11 = (1.0 + 0.5 * p_b_given_a) / z;
        let base11: f64 = 0.25 * 0.8 + 0.25 * 0.6 + 0.5 * s11;
        assert_abs_diff_eq!(m.get(0, 0).unwrap().aggscore, base11.powf(0.25), epsilon = TOL);
        // r2 on p1: a=0.5, b=1
        let s21 = (0.5 + 0.5) / z;
        assert_abs_diff_eq!(m.get(0, 1).unwrap().aggscore, s21, epsilon = TOL);
        // r3 on p1: a=P(a|b)=0.5, b=1, not willing -> cleanup
        let s31 = (p_a_given_b + 0.5) / z;
        let agg31 = s31.powi(20);
        assert!(agg31 < 0.15);
        assert_abs_diff_eq!(m.get(0, 2).unwrap().aggscore, agg31.min(0.15), epsilon = TOL);
        // r1 on p2: b=P(b|a)
        assert_abs_diff_eq!(m.get(1, 0).unwrap().aggscore, p_b_given_a, epsilon = TOL);
        // r2 on p2: sam 1, acl 0.4
        assert_abs_diff_eq!(m.get(1, 1).unwrap().aggscore, 0.5 * 0.4 + 0.5, epsilon = TOL);
        assert_abs_diff_eq!(m.get(1, 2).unwrap().aggscore, 1.0, epsilon = TOL);
    }

    fn level() -> impl Strategy<Value = BidLevel> {
        prop::sample::select(vec![
            BidLevel::NotWilling,
            BidLevel::NotEntered,
            BidLevel::InAPinch,
            BidLevel::Willing,
            BidLevel::Eager,
        ])
    }

    proptest! {
        #[test]
        fn sam_bounded_and_monotone(
            prim in 0.0f64..=1.0,
            secs in prop::collection::vec(0.0f64..=1.0, 0..6),
            bump in 0usize..7,
            delta in 0.0f64..0.5,
        ) {
            let names: Vec<String> = (0..secs.len()).map(|i| format!("s{i}")).collect();
            let refs: Vec<&str> = names.iter().map(String::as_str).collect();
            let p = paper("a", &refs);
            let mut d = dense(&[("a", prim)]);
            for (n, v) in names.iter().zip(&secs) {
                d.values.insert(n.clone(), *v);
            }
            let s = sam(&p, &d);
            prop_assert!((0.0..=1.0 + TOL).contains(&s));
            if secs.is_empty() {
                prop_assert!((s - prim).abs() < TOL);
            }
            let key = if bump == 0 || bump > names.len() { "a".to_string() } else { names[bump - 1].clone() };
            let v = d.get(&key);
            d.values.insert(key, (v + delta).min(1.0));
            prop_assert!(sam(&p, &d) + TOL >= s);
        }

        #[test]
        fn primary_outweighs_secondaries(m in 0usize..40) {
            let secondary_max: f64 = (1..=m).map(|k| 0.5f64.powi(k as i32)).sum();
            prop_assert!(1.0 > secondary_max);
        }

        #[test]
        fn aggscore_order_and_direction(b1 in 0.0f64..=1.0, b2 in 0.0f64..=1.0, l in level()) {
            let (hi, lo) = if b1 >= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(aggscore(hi, l) >= aggscore(lo, l));
            let a = aggscore(b1, l);
            prop_assert!((0.0..=1.0).contains(&a));
            if l.exponent() < 1.0 { prop_assert!(a + TOL >= b1); }
            if l == BidLevel::NotWilling { prop_assert!(a <= b1 + TOL); }
        }

        #[test]
        fn hiding_one_component_is_a_quarter_shift(t in 0.0f64..=1.0, a in 0.0f64..=1.0, s in 0.0f64..=1.0) {
            let full = base_score(Some(t), Some(a), s);
            // the hidden score's quarter weight moves onto the other text score
            prop_assert!((base_score(None, Some(a), s) - full - 0.25 * (a - t)).abs() < TOL);
            prop_assert!((base_score(Some(t), None, s) - full - 0.25 * (t - a)).abs() < TOL);
        }
    }
}
