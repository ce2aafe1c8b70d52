//! Simulation lab: synthetic conference growth, the two-phase selection-bias
//! simulation, Gibbs inference of reviewer noise, the false-negative
//! estimator and matching-quality metrics.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, PaperId, PersonId, Role};
use crate::model::Model;
use crate::scoring::{base_score, ScoreMatrix};
use crate::two_phase::PhasePolicy;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown seed keyword `{0}`")]
    UnknownKeyword(String),
    #[error("growth factor must exceed 1, got {0}")]
    GrowthFactor(f64),
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("no reviews to fit")]
    EmptyReviews,
    #[error("paper {0} has no reviews")]
    PaperWithoutReviews(usize),
    #[error("paper {paper} has {got} qualifying reviews, at least 4 required")]
    NotEnoughReviews { paper: usize, got: usize },
    #[error("need at least 2 complete score entries, got {0}")]
    TooFewSamples(usize),
    #[error("burn-in {burn_in} must be below iterations {iterations}")]
    BurnIn { burn_in: usize, iterations: usize },
}

// ---------------------------------------------------------------------------
// Synthetic conference generator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed_keyword: String,
    pub growth_factor: f64,
    pub seed: u64,
}

/// Papers carrying `kw` as primary or secondary keyword.
fn papers_with(c: &Corpus, kw: &str) -> Vec<usize> {
    c.papers()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.keywords().any(|k| k == kw))
        .map(|(i, _)| i)
        .collect()
}

/// Grows a conference from one keyword, adding at each step the keyword most
/// frequent among the current papers that is not yet covered (ties by id).
/// Each top-level area contributes reviewers in proportion to the share of
/// its papers already included, drawn from a fixed seeded permutation so
/// reviewer sets only grow. A snapshot is emitted whenever the paper count
/// reaches the next growth multiple, and once more at the end.
pub fn generate_conference(full: &Corpus, cfg: &GenConfig) -> Result<Vec<Corpus>, EvalError> {
    if !full.taxonomy.contains(&cfg.seed_keyword) {
        return Err(EvalError::UnknownKeyword(cfg.seed_keyword.clone()));
    }
    if !(cfg.growth_factor > 1.0) {
        return Err(EvalError::GrowthFactor(cfg.growth_factor));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let area_of = |kw: &str| full.taxonomy.parent(kw).unwrap_or(kw).to_string();

    let mut area_papers: BTreeMap<String, usize> = BTreeMap::new();
    for p in full.papers() {
        *area_papers.entry(area_of(&p.primary_keyword)).or_default() += 1;
    }
    let mut area_reviewers: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (j, r) in full.reviewers().iter().enumerate() {
        area_reviewers.entry(area_of(&r.primary_keyword)).or_default().push(j);
    }
    for list in area_reviewers.values_mut() {
        list.shuffle(&mut rng);
    }

    let mut covered: BTreeSet<String> = BTreeSet::from([cfg.seed_keyword.clone()]);
    let mut papers: BTreeSet<usize> = papers_with(full, &cfg.seed_keyword).into_iter().collect();
    let start = papers.len().max(1) as f64;
    let mut next_threshold = start * cfg.growth_factor;
    let mut snapshots = Vec::new();
    let mut last_emitted = None;

    let snapshot = |papers: &BTreeSet<usize>| -> Corpus {
        let mut included: BTreeMap<String, usize> = BTreeMap::new();
        for &i in papers {
            *included.entry(area_of(&full.papers()[i].primary_keyword)).or_default() += 1;
        }
        let mut reviewers = BTreeSet::new();
        for (area, n_in) in &included {
            let share = *n_in as f64 / area_papers[area] as f64;
            if let Some(list) = area_reviewers.get(area) {
                let take = (list.len() as f64 * share).round() as usize;
                reviewers.extend(list[..take.min(list.len())].iter().map(|&j| full.reviewers()[j].id.clone()));
            }
        }
        let ids: BTreeSet<PaperId> = papers.iter().map(|&i| full.papers()[i].id.clone()).collect();
        full.subset(&ids, &reviewers)
    };

    loop {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for &i in &papers {
            for k in full.papers()[i].keywords() {
                if !covered.contains(k) {
                    *counts.entry(k.as_str()).or_default() += 1;
                }
            }
        }
        // BTreeMap iteration gives id order; keep the first maximum
        let Some((kw, _)) = counts.iter().fold(None, |best: Option<(&str, usize)>, (&k, &n)| match best {
            Some((_, bn)) if bn >= n => best,
            _ => Some((k, n)),
        }) else {
            break;
        };
        let kw = kw.to_string();
        covered.insert(kw.clone());
        papers.extend(papers_with(full, &kw));
        if papers.len() as f64 >= next_threshold {
            while papers.len() as f64 >= next_threshold {
                next_threshold *= cfg.growth_factor;
            }
            snapshots.push(snapshot(&papers));
            last_emitted = Some(papers.len());
        }
    }
    if last_emitted != Some(papers.len()) {
        snapshots.push(snapshot(&papers));
    }
    Ok(snapshots)
}

// ---------------------------------------------------------------------------
// Review noise simulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub mu_s: f64,
    pub sigma_s: f64,
    /// Reviewer noise standard deviation.
    pub sigma: f64,
    /// Shape and rate of the Gamma prior on the noise precision.
    pub gamma_alpha: f64,
    pub gamma_beta: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            mu_s: 5.0,
            sigma_s: 1.0,
            sigma: 1.3,
            gamma_alpha: 1.0,
            gamma_beta: 1.0,
        }
    }
}

impl NoiseModel {
    /// `sigma = 0` is allowed and yields noiseless reviews.
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::Noise(m.to_string()));
        if !self.mu_s.is_finite() {
            return bad("mu_s must be finite");
        }
        if !(self.sigma_s > 0.0 && self.sigma_s.is_finite()) {
            return bad("sigma_s must be positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be non-negative");
        }
        if !(self.gamma_alpha > 0.0 && self.gamma_beta > 0.0) {
            return bad("gamma prior parameters must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimReview {
    pub paper: usize,
    pub phase: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimWorld {
    pub true_scores: Vec<f64>,
    pub reviews: Vec<SimReview>,
    pub rejected: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapResult {
    pub world: SimWorld,
    /// Mean phase-1 score on surviving papers minus mean phase-2 score;
    /// 0 when nothing survives.
    pub gap: f64,
    pub survivors: usize,
}

/// Draws true scores and noisy reviews; a paper is rejected when all of its
/// phase-1 reviews fall below `threshold`.
pub fn simulate_reviews(
    n_papers: usize,
    nm: &NoiseModel,
    per_phase: [usize; 2],
    threshold: f64,
    seed: u64,
) -> Result<GapResult, EvalError> {
    nm.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = Normal::new(nm.mu_s, nm.sigma_s).map_err(|e| EvalError::Noise(e.to_string()))?;
    let noise = Normal::new(0.0, nm.sigma).map_err(|e| EvalError::Noise(e.to_string()))?;
    let mut world = SimWorld {
        true_scores: Vec::with_capacity(n_papers),
        reviews: Vec::with_capacity(n_papers * (per_phase[0] + per_phase[1])),
        rejected: Vec::with_capacity(n_papers),
    };
    let (mut sum1, mut n1, mut sum2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    let mut survivors = 0;
    let mut first = Vec::with_capacity(per_phase[0]);
    for p in 0..n_papers {
        let s = prior.sample(&mut rng);
        world.true_scores.push(s);
        first.clear();
        for _ in 0..per_phase[0] {
            let o = s + noise.sample(&mut rng);
            first.push(o);
            world.reviews.push(SimReview { paper: p, phase: 1, score: o });
        }
        let rejected = !first.is_empty() && first.iter().all(|&o| o < threshold);
        world.rejected.push(rejected);
        if rejected {
            continue;
        }
        survivors += 1;
        for &o in &first {
            sum1 += o;
            n1 += 1;
        }
        for _ in 0..per_phase[1] {
            let o = s + noise.sample(&mut rng);
            world.reviews.push(SimReview { paper: p, phase: 2, score: o });
            sum2 += o;
            n2 += 1;
        }
    }
    let gap = if n1 == 0 || n2 == 0 {
        0.0
    } else {
        sum1 / n1 as f64 - sum2 / n2 as f64
    };
    Ok(GapResult { world, gap, survivors })
}

/// Mean gap over seeds `0..seeds` offset by `base_seed`, run in parallel.
pub fn mean_gap(
    n_papers: usize,
    nm: &NoiseModel,
    policy: &PhasePolicy,
    seeds: usize,
    base_seed: u64,
) -> Result<(f64, Vec<f64>), EvalError> {
    let gaps: Result<Vec<f64>, EvalError> = (0..seeds as u64)
        .into_par_iter()
        .map(|k| {
            simulate_reviews(n_papers, nm, [2, 2], policy.reject_score_threshold, base_seed.wrapping_add(k)).map(|r| r.gap)
        })
        .collect();
    let gaps = gaps?;
    let mean = if gaps.is_empty() {
        0.0
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    Ok((mean, gaps))
}

// ---------------------------------------------------------------------------
// Gibbs inference
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsResult {
    /// Posterior mean of the noise standard deviation.
    pub sigma: f64,
    /// Posterior mean of each paper's true score.
    pub paper_means: Vec<f64>,
    pub samples: usize,
}

/// Gibbs sampler for o ~ Normal(s_p, sigma^2), s_p ~ Normal(mu_s, sigma_s^2)
/// and precision 1/sigma^2 ~ Gamma(alpha, rate beta).
pub fn gibbs_estimate(
    reviews: &[Vec<f64>],
    nm: &NoiseModel,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<GibbsResult, EvalError> {
    nm.validate()?;
    if reviews.is_empty() {
        return Err(EvalError::EmptyReviews);
    }
    if let Some(p) = reviews.iter().position(Vec::is_empty) {
        return Err(EvalError::PaperWithoutReviews(p));
    }
    if burn_in >= iterations {
        return Err(EvalError::BurnIn { burn_in, iterations });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_total: usize = reviews.iter().map(Vec::len).sum();
    let sums: Vec<f64> = reviews.iter().map(|r| r.iter().sum()).collect();
    let prior_prec = 1.0 / (nm.sigma_s * nm.sigma_s);
    let mut s: Vec<f64> = reviews.iter().zip(&sums).map(|(r, &t)| t / r.len() as f64).collect();
    let mut tau = 1.0;
    let mut sigma_acc = 0.0;
    let mut s_acc = vec![0.0; reviews.len()];
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    for it in 0..iterations {
        for (p, r) in reviews.iter().enumerate() {
            let prec = prior_prec + r.len() as f64 * tau;
            let mean = (nm.mu_s * prior_prec + tau * sums[p]) / prec;
            s[p] = mean + std_normal.sample(&mut rng) / prec.sqrt();
        }
        let sse: f64 = reviews
            .iter()
            .zip(&s)
            .map(|(r, &sp)| r.iter().map(|o| (o - sp) * (o - sp)).sum::<f64>())
            .sum();
        let shape = nm.gamma_alpha + n_total as f64 / 2.0;
        let rate = nm.gamma_beta + sse / 2.0;
        tau = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| EvalError::Noise(e.to_string()))?
            .sample(&mut rng);
        if it >= burn_in {
            sigma_acc += 1.0 / tau.sqrt();
            for (acc, &sp) in s_acc.iter_mut().zip(&s) {
                *acc += sp;
            }
        }
    }
    let kept = iterations - burn_in;
    Ok(GibbsResult {
        sigma: sigma_acc / kept as f64,
        paper_means: s_acc.into_iter().map(|a| a / kept as f64).collect(),
        samples: kept,
    })
}

/// Draws `reviews_per_paper` noisy reviews for each of `n_papers` papers.
pub fn generate_reviews(n_papers: usize, reviews_per_paper: usize, nm: &NoiseModel, seed: u64) -> Result<Vec<Vec<f64>>, EvalError> {
    nm.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = Normal::new(nm.mu_s, nm.sigma_s).map_err(|e| EvalError::Noise(e.to_string()))?;
    let noise = Normal::new(0.0, nm.sigma).map_err(|e| EvalError::Noise(e.to_string()))?;
    Ok((0..n_papers)
        .map(|_| {
            let s = prior.sample(&mut rng);
            (0..reviews_per_paper).map(|_| s + noise.sample(&mut rng)).collect()
        })
        .collect())
}

// ---------------------------------------------------------------------------
// False-negative estimator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnPaper {
    /// (score, confidence) of each review.
    pub reviews: Vec<(f64, u8)>,
    /// Whether the paper was eventually accepted.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FnReport {
    /// (rejecting pairs, all pairs) per paper.
    pub pair_counts: Vec<(u64, u64)>,
    pub per_paper: Vec<f64>,
    /// Share of the expected phase-1 rejections that fall on accepted papers.
    pub rate: f64,
}

/// Exact per-paper probability that two random high-confidence reviews meet
/// the phase-1 rejection rule, and the accepted share of that mass.
pub fn false_negative_rate(papers: &[FnPaper], policy: &PhasePolicy) -> Result<FnReport, EvalError> {
    let mut pair_counts = Vec::with_capacity(papers.len());
    let mut per_paper = Vec::with_capacity(papers.len());
    let (mut acc, mut all) = (0.0, 0.0);
    for (k, p) in papers.iter().enumerate() {
        let q: Vec<f64> = p
            .reviews
            .iter()
            .filter(|(_, c)| *c >= policy.reject_confidence_min)
            .map(|(s, _)| *s)
            .collect();
        if q.len() < 4 {
            return Err(EvalError::NotEnoughReviews { paper: k, got: q.len() });
        }
        let mut hits = 0u64;
        let mut total = 0u64;
        for a in 0..q.len() {
            for b in a + 1..q.len() {
                total += 1;
                if q[a] < policy.reject_score_threshold && q[b] < policy.reject_score_threshold {
                    hits += 1;
                }
            }
        }
        let prob = hits as f64 / total as f64;
        pair_counts.push((hits, total));
        per_paper.push(prob);
        all += prob;
        if p.accepted {
            acc += prob;
        }
    }
    Ok(FnReport {
        pair_counts,
        per_paper,
        rate: if all > 0.0 { acc / all } else { 0.0 },
    })
}

// ---------------------------------------------------------------------------
// Matching metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchMetrics {
    /// Papers with no assigned seniority-3 PC.
    pub papers_without_senior: usize,
    /// Assigned-together coauthor pairs per paper at distance 1 and 2.
    pub coauthor_pairs: [usize; 2],
    /// Papers with two PC/SPC reviewers from the same region.
    pub papers_same_region: usize,
    /// Bidding cycles whose two halves are both assigned.
    pub realized_cycles: usize,
    pub mean_aggscore: f64,
    /// Mean over papers of the mean rank of assigned reviewers among the
    /// paper's scored reviewers of the same role (1 = best).
    pub mean_reviewer_rank: f64,
    pub per_paper_rank: BTreeMap<PaperId, f64>,
}

pub fn match_metrics(m: &Model, x: &[bool], scores: &ScoreMatrix) -> MatchMetrics {
    let mut on_paper: Vec<Vec<usize>> = vec![Vec::new(); m.papers.len()];
    let mut assigned_pos: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut score_sum = 0.0;
    let mut n = 0usize;
    for (v, var) in m.vars.iter().enumerate() {
        if x[v] {
            on_paper[var.paper].push(var.reviewer);
            assigned_pos.insert((m.papers[var.paper].position, var.reviewer));
            score_sum += var.score;
            n += 1;
        }
    }
    let distance: BTreeMap<(usize, usize), u8> = m.coauthor_master.iter().map(|t| ((t.a, t.b), t.distance)).collect();
    let mut metrics = MatchMetrics {
        papers_without_senior: 0,
        coauthor_pairs: [0, 0],
        papers_same_region: 0,
        realized_cycles: 0,
        mean_aggscore: if n > 0 { score_sum / n as f64 } else { 0.0 },
        mean_reviewer_rank: 0.0,
        per_paper_rank: BTreeMap::new(),
    };
    for (i, rs) in on_paper.iter().enumerate() {
        if !rs.iter().any(|&r| m.reviewers[r].role == Role::Pc && m.reviewers[r].seniority == 3) {
            metrics.papers_without_senior += 1;
        }
        let disc: Vec<usize> = rs.iter().copied().filter(|&r| m.reviewers[r].role.is_discussant()).collect();
        let mut regions = BTreeSet::new();
        let mut dup = false;
        for (k, &a) in disc.iter().enumerate() {
            dup |= !regions.insert(m.reviewers[a].region);
            for &b in &disc[k + 1..] {
                if let Some(&d) = distance.get(&(a.min(b), a.max(b))) {
                    metrics.coauthor_pairs[d as usize - 1] += 1;
                }
            }
        }
        if dup {
            metrics.papers_same_region += 1;
        }

        if rs.is_empty() {
            continue;
        }
        let pos = m.papers[i].position;
        let row = scores.row(pos);
        let mut ranks = 0.0;
        for &r in rs {
            let own = scores.get(pos, r).map_or(0.0, |e| e.aggscore);
            let better = row
                .iter()
                .filter(|(o, e)| m.reviewers[*o].role == m.reviewers[r].role && e.aggscore > own)
                .count();
            ranks += (better + 1) as f64;
        }
        metrics.per_paper_rank.insert(m.papers[i].id.clone(), ranks / rs.len() as f64);
    }
    let realized = m
        .cycles
        .iter()
        .filter(|t| assigned_pos.contains(&(t.tuple.i, t.tuple.j)) && assigned_pos.contains(&(t.tuple.i2, t.tuple.j2)))
        .map(|t| t.tuple)
        .collect::<BTreeSet<_>>();
    metrics.realized_cycles = realized.len() / 2;
    if !metrics.per_paper_rank.is_empty() {
        metrics.mean_reviewer_rank =
            metrics.per_paper_rank.values().sum::<f64>() / metrics.per_paper_rank.len() as f64;
    }
    metrics
}

// ---------------------------------------------------------------------------
// Missing-data stability
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub samples: usize,
    pub tpms_hidden_mean: f64,
    pub tpms_hidden_std: f64,
    pub acl_hidden_mean: f64,
    pub acl_hidden_std: f64,
    /// Mean over papers with two or more entries of the std of full base scores.
    pub within_paper_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Shift of the base score when TPMS or ACL is hidden, over entries with all
/// three components. Entries are (paper, tpms, acl, sam). Stds are
/// population stds.
pub fn missing_data_stability(entries: &[(usize, f64, f64, f64)]) -> Result<StabilityReport, EvalError> {
    if entries.len() < 2 {
        return Err(EvalError::TooFewSamples(entries.len()));
    }
    let mut dt = Vec::with_capacity(entries.len());
    let mut da = Vec::with_capacity(entries.len());
    let mut by_paper: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for &(p, t, a, s) in entries {
        let full = base_score(Some(t), Some(a), s);
        dt.push(base_score(None, Some(a), s) - full);
        da.push(base_score(Some(t), None, s) - full);
        by_paper.entry(p).or_default().push(full);
    }
    let (tm, ts) = mean_std(&dt);
    let (am, as_) = mean_std(&da);
    let stds: Vec<f64> = by_paper.values().filter(|v| v.len() >= 2).map(|v| mean_std(v).1).collect();
    Ok(StabilityReport {
        samples: entries.len(),
        tpms_hidden_mean: tm,
        tpms_hidden_std: ts,
        acl_hidden_mean: am,
        acl_hidden_std: as_,
        within_paper_std: if stds.is_empty() {
            0.0
        } else {
            stds.iter().sum::<f64>() / stds.len() as f64
        },
    })
}

/// Complete (paper, tpms, acl, sam) entries of a score matrix.
pub fn complete_entries(scores: &ScoreMatrix) -> Vec<(usize, f64, f64, f64)> {
    scores
        .iter()
        .filter_map(|(p, _, e)| Some((p, e.tpms_norm?, e.acl_norm?, e.sam)))
        .collect()
}

/// Reviewer ids, for reports that must reference only corpus ids.
pub fn reviewer_ids(c: &Corpus) -> BTreeSet<PersonId> {
    c.reviewers().iter().map(|r| r.id.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn noiseless_gap_is_zero() {
        let nm = NoiseModel { sigma: 0.0, ..Default::default() };
        let r = simulate_reviews(500, &nm, [2, 2], 4.5, 3).unwrap();
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn no_selection_no_gap() {
        let (g, _) = mean_gap(
            5000,
            &NoiseModel::default(),
            &PhasePolicy {
                reject_score_threshold: 1.0,
                ..Default::default()
            },
            0,
            0,
        )
        .unwrap();
        assert_eq!(g, 0.0);
        let mut sum = 0.0;
        for seed in 0..10 {
            sum += simulate_reviews(5000, &NoiseModel::default(), [2, 2], f64::NEG_INFINITY, seed).unwrap().gap;
        }
        assert!((sum / 10.0).abs() < 0.03);
    }

    #[test]
    fn false_negative_pairs() {
        let p = |s: [f64; 4], accepted| FnPaper {
            reviews: s.iter().map(|&x| (x, 4)).collect(),
            accepted,
        };
        let r = false_negative_rate(&[p([2.0, 3.0, 3.0, 4.0], false), p([2.0, 3.0, 8.0, 9.0], true)], &PhasePolicy::default()).unwrap();
        assert_eq!(r.per_paper[0], 1.0);
        assert_eq!(r.pair_counts[1], (1, 6));
        assert_eq!(r.per_paper[1], 1.0 / 6.0);
        assert_abs_diff_eq!(r.rate, (1.0 / 6.0) / (1.0 + 1.0 / 6.0), epsilon = 1e-15);
        let short = FnPaper {
            reviews: vec![(2.0, 4), (3.0, 4), (3.0, 2), (4.0, 4)],
            accepted: false,
        };
        assert_eq!(
            false_negative_rate(&[short], &PhasePolicy::default()),
            Err(EvalError::NotEnoughReviews { paper: 0, got: 3 })
        );
    }

    #[test]
    fn gibbs_concentrates() {
        let nm = NoiseModel {
            sigma_s: 0.01,
            ..Default::default()
        };
        let r = gibbs_estimate(&[vec![5.0; 20]], &nm, 400, 100, 1).unwrap();
        assert_abs_diff_eq!(r.paper_means[0], 5.0, epsilon = 1e-2);
        assert!(gibbs_estimate(&[], &nm, 10, 1, 1).is_err());
        assert!(gibbs_estimate(&[vec![]], &nm, 10, 1, 1).is_err());
    }

    #[test]
    fn stability_identities() {
        assert_eq!(missing_data_stability(&[(0, 0.5, 0.5, 0.5)]), Err(EvalError::TooFewSamples(1)));
        let same: Vec<_> = (0..5).map(|k| (k, 0.1 * k as f64, 0.1 * k as f64, 0.1 * k as f64)).collect();
        let r = missing_data_stability(&same).unwrap();
        assert_eq!(r.tpms_hidden_std, 0.0);
        assert_eq!(r.acl_hidden_std, 0.0);
        // constant A - T: every delta equals a quarter of it
        let shifted: Vec<_> = (0..5).map(|k| (0, 0.1 * k as f64, 0.1 * k as f64 + 0.2, 0.9)).collect();
        let r = missing_data_stability(&shifted).unwrap();
        assert_abs_diff_eq!(r.tpms_hidden_std, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.tpms_hidden_mean, 0.05, epsilon = 1e-12);
    }
}
