//! Bid sanitation: sparse bidders, thin enthusiasm tiers, negative-bid floods
//! and collusion-consistent bidding patterns.
//!
//! Steps run per reviewer in a fixed order; the collusion pass sees the
//! output of the earlier steps for everyone and drops simultaneously.
//! Area chairs are never filtered.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{BidLevel, Corpus, PaperId, PersonId, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditAction {
    DiscardAllSparse,
    EagerDowngraded,
    WillingDowngraded,
    NotWillingDropped,
    DiscardAllCollusion,
}

impl AuditAction {
    pub fn as_str(self) -> &'static str {
        match self {
            AuditAction::DiscardAllSparse => "discard_all_sparse",
            AuditAction::EagerDowngraded => "eager_downgraded",
            AuditAction::WillingDowngraded => "willing_downgraded",
            AuditAction::NotWillingDropped => "not_willing_dropped",
            AuditAction::DiscardAllCollusion => "discard_all_collusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditEntry {
    pub reviewer_id: PersonId,
    pub action: AuditAction,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilteredBids {
    bids: BTreeMap<(PersonId, PaperId), BidLevel>,
    pub audit: Vec<AuditEntry>,
}

impl FilteredBids {
    /// Every stored bid of the corpus, unfiltered.
    pub fn unfiltered(c: &Corpus) -> Self {
        FilteredBids {
            bids: c
                .bids()
                .map(|b| ((b.reviewer_id, b.paper_id), b.level))
                .collect(),
            audit: Vec::new(),
        }
    }

    pub fn level(&self, reviewer: &str, paper: &str) -> BidLevel {
        self.bids
            .get(&(reviewer.to_string(), paper.to_string()))
            .copied()
            .unwrap_or(BidLevel::NotEntered)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PersonId, &PaperId, BidLevel)> {
        self.bids.iter().map(|((r, p), l)| (r, p, *l))
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn actions_for(&self, reviewer: &str) -> Vec<AuditAction> {
        self.audit
            .iter()
            .filter(|e| e.reviewer_id == reviewer)
            .map(|e| e.action)
            .collect()
    }
}

/// `#eager + #willing + 0.5 * #in_a_pinch`
pub fn positive_weight<'a>(levels: impl IntoIterator<Item = &'a BidLevel>) -> f64 {
    levels
        .into_iter()
        .map(|l| match l {
            BidLevel::Eager | BidLevel::Willing => 1.0,
            BidLevel::InAPinch => 0.5,
            _ => 0.0,
        })
        .sum()
}

pub const PC_MIN_WEIGHT: f64 = 9.0;
pub const SPC_MIN_WEIGHT: f64 = 10.0;
pub const MIN_TIER: usize = 4;
pub const NOT_WILLING_RATIO: usize = 6;
pub const SINGLE_AUTHOR_SHARE: f64 = 0.4;
pub const MUTUAL_SHARE: f64 = 0.6;

fn count(bids: &BTreeMap<PaperId, BidLevel>, level: BidLevel) -> usize {
    bids.values().filter(|&&l| l == level).count()
}

fn relabel(bids: &mut BTreeMap<PaperId, BidLevel>, from: BidLevel, to: BidLevel) {
    for l in bids.values_mut() {
        if *l == from {
            *l = to;
        }
    }
}

/// Runs the sanitation pipeline. `authorship` maps each person to the papers
/// they authored.
pub fn filter_bids(c: &Corpus, authorship: &BTreeMap<PersonId, BTreeSet<PaperId>>) -> FilteredBids {
    let mut per_reviewer: BTreeMap<PersonId, BTreeMap<PaperId, BidLevel>> = BTreeMap::new();
    for b in c.bids() {
        per_reviewer.entry(b.reviewer_id).or_default().insert(b.paper_id, b.level);
    }
    let mut audit = Vec::new();
    let mut filtered_roles = BTreeSet::new();

    for (rid, bids) in per_reviewer.iter_mut() {
        let role = c.reviewer(rid).map(|r| r.role).unwrap_or(Role::Ac);
        let min_weight = match role {
            Role::Pc => PC_MIN_WEIGHT,
            Role::Spc => SPC_MIN_WEIGHT,
            Role::Ac => continue,
        };
        filtered_roles.insert(rid.clone());

        let weight = positive_weight(bids.values());
        if weight < min_weight {
            audit.push(AuditEntry {
                reviewer_id: rid.clone(),
                action: AuditAction::DiscardAllSparse,
                detail: format!("positive weight {weight} below {min_weight}; {} bids dropped", bids.len()),
            });
            bids.clear();
            continue;
        }

        let eager = count(bids, BidLevel::Eager);
        if eager > 0 && eager < MIN_TIER {
            relabel(bids, BidLevel::Eager, BidLevel::Willing);
            audit.push(AuditEntry {
                reviewer_id: rid.clone(),
                action: AuditAction::EagerDowngraded,
                detail: format!("{eager} eager bids relabeled willing"),
            });
        }
        let willing = count(bids, BidLevel::Willing);
        if willing > 0 && willing < MIN_TIER {
            relabel(bids, BidLevel::Willing, BidLevel::InAPinch);
            audit.push(AuditEntry {
                reviewer_id: rid.clone(),
                action: AuditAction::WillingDowngraded,
                detail: format!("{willing} willing bids relabeled in_a_pinch"),
            });
        }

        let not_willing = count(bids, BidLevel::NotWilling);
        let positive = count(bids, BidLevel::Willing) + count(bids, BidLevel::Eager);
        if not_willing > NOT_WILLING_RATIO * positive {
            bids.retain(|_, l| *l != BidLevel::NotWilling);
            audit.push(AuditEntry {
                reviewer_id: rid.clone(),
                action: AuditAction::NotWillingDropped,
                detail: format!("{not_willing} not_willing bids against {positive} positive"),
            });
        }
    }

    // Collusion is judged on the post-downgrade positive bids of everyone.
    let positives: BTreeMap<&str, BTreeSet<&str>> = per_reviewer
        .iter()
        .map(|(r, bids)| {
            (
                r.as_str(),
                bids.iter()
                    .filter(|(_, l)| l.is_positive())
                    .map(|(p, _)| p.as_str())
                    .collect(),
            )
        })
        .collect();
    let empty = BTreeSet::new();
    let pos = |r: &str| positives.get(r).unwrap_or(&empty);
    let papers_of = |r: &str| authorship.get(r).map(|s| s.iter().map(String::as_str).collect::<BTreeSet<_>>());

    let mut colluders: BTreeMap<PersonId, String> = BTreeMap::new();
    for rid in &filtered_roles {
        let mine = pos(rid);
        if mine.is_empty() {
            continue;
        }
        let n = mine.len() as f64;
        // criterion 1: one author dominates the positive bids
        let mut per_author: BTreeMap<&str, usize> = BTreeMap::new();
        for p in mine {
            if let Some(paper) = c.paper(p) {
                for a in &paper.author_ids {
                    *per_author.entry(a.as_str()).or_default() += 1;
                }
            }
        }
        if let Some((a, k)) = per_author
            .iter()
            .find(|(_, &k)| k as f64 >= SINGLE_AUTHOR_SHARE * n)
        {
            colluders.insert(rid.clone(), format!("author {a} holds {k} of {} positive bids", mine.len()));
            continue;
        }
        // criterion 2: mutual bidding with another author
        let my_papers = papers_of(rid).unwrap_or_default();
        let partners: BTreeSet<&str> = per_author
            .keys()
            .copied()
            .chain(
                positives
                    .iter()
                    .filter(|(_, ps)| ps.iter().any(|p| my_papers.contains(p)))
                    .map(|(r, _)| *r),
            )
            .filter(|r| *r != rid.as_str())
            .collect();
        for star in partners {
            let theirs = pos(star);
            let star_papers = papers_of(star).unwrap_or_default();
            let toward = mine.iter().filter(|p| star_papers.contains(*p)).count();
            let back = theirs.iter().filter(|p| my_papers.contains(*p)).count();
            let total = mine.len() + theirs.len();
            if (toward + back) as f64 >= MUTUAL_SHARE * total as f64 {
                colluders.insert(
                    rid.clone(),
                    format!("mutual bidding with {star}: {toward}+{back} of {total} positive bids"),
                );
                break;
            }
        }
    }
    for (rid, detail) in colluders {
        let bids = per_reviewer.get_mut(&rid).expect("colluder has bids");
        audit.push(AuditEntry {
            reviewer_id: rid,
            action: AuditAction::DiscardAllCollusion,
            detail: format!("{detail}; {} bids dropped", bids.len()),
        });
        bids.clear();
    }

    let bids = per_reviewer
        .into_iter()
        .flat_map(|(r, bids)| bids.into_iter().map(move |(p, l)| ((r.clone(), p), l)))
        .collect();
    FilteredBids { bids, audit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::CorpusBuilder;
    use proptest::prelude::*;

    fn with_bids(role: Role, bids: &[(usize, BidLevel)], papers: usize) -> Corpus {
        let mut b = CorpusBuilder::new().reviewer("r", role, "k", &[]);
        for i in 0..papers {
            b = b.paper(&format!("p{i:02}"), "k", &[], &[&format!("a{i:02}")]);
        }
        for (i, l) in bids {
            b = b.bid("r", &format!("p{i:02}"), *l);
        }
        b.build()
    }

    fn run(c: &Corpus) -> FilteredBids {
        filter_bids(c, &c.authorship())
    }

    #[test]
    fn weight_examples() {
        use BidLevel::*;
        assert_eq!(positive_weight(&[Eager; 6].iter().chain(&[InAPinch; 4]).copied().collect::<Vec<_>>()), 8.0);
        assert_eq!(positive_weight(&[]), 0.0);
        assert_eq!(positive_weight(&[Willing; 9]), 9.0);
    }

    #[test]
    fn sparse_pc_loses_everything() {
        let bids: Vec<_> = (0..6)
            .map(|i| (i, BidLevel::Eager))
            .chain((6..10).map(|i| (i, BidLevel::InAPinch)))
            .collect();
        let f = run(&with_bids(Role::Pc, &bids, 10));
        assert!(f.is_empty());
        assert_eq!(f.actions_for("r"), vec![AuditAction::DiscardAllSparse]);
    }

    #[test]
    fn spc_threshold_is_higher() {
        let bids: Vec<_> = (0..9).map(|i| (i, BidLevel::Willing)).collect();
        assert_eq!(run(&with_bids(Role::Pc, &bids, 9)).len(), 9);
        assert!(run(&with_bids(Role::Spc, &bids, 9)).is_empty());
        assert_eq!(run(&with_bids(Role::Ac, &bids, 9)).len(), 9);
    }

    #[test]
    fn thin_eager_merges_into_willing() {
        let bids: Vec<_> = (0..3)
            .map(|i| (i, BidLevel::Eager))
            .chain((3..9).map(|i| (i, BidLevel::Willing)))
            .collect();
        let f = run(&with_bids(Role::Pc, &bids, 9));
        assert_eq!(f.iter().filter(|(_, _, l)| *l == BidLevel::Willing).count(), 9);
        assert_eq!(f.actions_for("r"), vec![AuditAction::EagerDowngraded]);
    }

    #[test]
    fn thin_willing_becomes_in_a_pinch() {
        let bids: Vec<_> = (0..3)
            .map(|i| (i, BidLevel::Willing))
            .chain((3..20).map(|i| (i, BidLevel::InAPinch)))
            .collect();
        let f = run(&with_bids(Role::Pc, &bids, 20));
        assert!(f.iter().all(|(_, _, l)| l == BidLevel::InAPinch));
        assert_eq!(f.actions_for("r"), vec![AuditAction::WillingDowngraded]);
    }

    #[test]
    fn not_willing_flood_dropped() {
        // 9 willing; 55 > 54 not_willing
        let bids: Vec<_> = (0..9)
            .map(|i| (i, BidLevel::Willing))
            .chain((9..64).map(|i| (i, BidLevel::NotWilling)))
            .collect();
        let f = run(&with_bids(Role::Pc, &bids, 64));
        assert_eq!(f.len(), 9);
        let bids: Vec<_> = (0..9)
            .map(|i| (i, BidLevel::Willing))
            .chain((9..63).map(|i| (i, BidLevel::NotWilling)))
            .collect();
        assert_eq!(run(&with_bids(Role::Pc, &bids, 63)).len(), 63);
    }

    #[test]
    fn single_author_share_boundary() {
        let build = |on_a: usize| {
            let mut b = CorpusBuilder::new().reviewer("r", Role::Pc, "k", &[]);
            for i in 0..10 {
                let author = if i < on_a { "a".to_string() } else { format!("x{i}") };
                b = b.paper(&format!("p{i}"), "k", &[], &[&author]).bid("r", &format!("p{i}"), BidLevel::Willing);
            }
            b.build()
        };
        let f = run(&build(4));
        assert!(f.is_empty());
        assert_eq!(f.actions_for("r"), vec![AuditAction::DiscardAllCollusion]);
        assert_eq!(run(&build(3)).len(), 10);
    }

    #[test]
    fn mutual_bidding_is_symmetric() {
        // r and s each author 6 papers and bid on 6 of the other's plus 4 unrelated.
        let mut b = CorpusBuilder::new()
            .reviewer("r", Role::Pc, "k", &[])
            .reviewer("s", Role::Pc, "k", &[]);
        for i in 0..6 {
            // two coauthors per paper keep criterion 1 quiet
            b = b
                .paper(&format!("rp{i}"), "k", &[], &["r", &format!("rc{i}")])
                .paper(&format!("sp{i}"), "k", &[], &["s", &format!("sc{i}")])
                .bid("r", &format!("sp{i}"), BidLevel::Willing)
                .bid("s", &format!("rp{i}"), BidLevel::Willing);
        }
        for i in 0..4 {
            b = b
                .paper(&format!("o{i}"), "k", &[], &[&format!("z{i}")])
                .bid("r", &format!("o{i}"), BidLevel::Willing)
                .bid("s", &format!("o{i}"), BidLevel::Willing);
        }
        let c = b.build();
        let f = run(&c);
        // (6 + 6) / 20 = 60%, but author s alone holds 6/10 of r's bids
        assert!(f.is_empty());
        let acts: BTreeSet<_> = f.audit.iter().map(|e| e.reviewer_id.as_str()).collect();
        assert_eq!(acts, ["r", "s"].into_iter().collect());
    }

    #[test]
    fn mutual_criterion_alone() {
        // Partner papers are coauthored by distinct people so no single author
        // reaches 40% of either reviewer's 10 positive bids, except the partner.
        let mut b = CorpusBuilder::new()
            .reviewer("r", Role::Pc, "k", &[])
            .reviewer("s", Role::Pc, "k", &[]);
        // r bids on 3 of s's papers, s bids on 3 of r's: 6/20 = 30%
        for i in 0..3 {
            b = b
                .paper(&format!("rp{i}"), "k", &[], &["r"])
                .paper(&format!("sp{i}"), "k", &[], &["s"])
                .bid("r", &format!("sp{i}"), BidLevel::Willing)
                .bid("s", &format!("rp{i}"), BidLevel::Willing);
        }
        for i in 0..7 {
            b = b
                .paper(&format!("o{i}"), "k", &[], &[&format!("z{i}")])
                .bid("r", &format!("o{i}"), BidLevel::Willing)
                .bid("s", &format!("o{i}"), BidLevel::Willing);
        }
        let f = run(&b.build());
        assert_eq!(f.len(), 20);
    }

    proptest! {
        #[test]
        fn never_raises_and_is_order_independent(
            levels in prop::collection::vec(0u8..5, 0..30),
            role in prop::sample::select(vec![Role::Pc, Role::Spc, Role::Ac]),
            shuffle_seed in any::<u64>(),
        ) {
            let lv = |x: u8| match x {
                0 => BidLevel::NotWilling,
                1 => BidLevel::NotEntered,
                2 => BidLevel::InAPinch,
                3 => BidLevel::Willing,
                _ => BidLevel::Eager,
            };
            let bids: Vec<(usize, BidLevel)> = levels.iter().enumerate().map(|(i, &x)| (i, lv(x))).collect();
            let c = with_bids(role, &bids, levels.len().max(1));
            let f = run(&c);
            for (r, p, l) in f.iter() {
                prop_assert!(l <= c.bid(r, p));
            }
            let mut rev = bids.clone();
            let k = (shuffle_seed as usize) % (rev.len().max(1));
            rev.rotate_left(k);
            let c2 = with_bids(role, &rev, levels.len().max(1));
            prop_assert_eq!(run(&c2), f);
        }
    }
}
