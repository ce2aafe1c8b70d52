//! Cross-module invariants over random instances.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use revmatch::corpus::Track;
use revmatch::eval::{generate_conference, GenConfig};
use revmatch::model::{build_model, cycle_set, evaluate_objective, BuildOptions, MatchParams, Model};
use revmatch::solve::{solve_with_row_generation, HeuristicSolver, PhaseInputs, DEFAULT_MAX_ITERS};
use revmatch::testutil::{random_instance, RandomInstance};
use revmatch::two_phase::{
    group_reviews, phase1_decide, run_two_phase, PhasePolicy, Review, ReviewsByPaper, TwoPhaseConfig,
};

fn model_of(inst: &RandomInstance) -> Model {
    build_model(
        &inst.corpus,
        &inst.scores,
        &inst.conflicts,
        &inst.bids,
        &MatchParams::default(),
        &BuildOptions::default(),
    )
    .unwrap()
}

fn random_reviews(pairs: &[(String, String)], seed: u64) -> ReviewsByPaper {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reviews: Vec<Review> = pairs
        .iter()
        .map(|(p, r)| Review {
            paper_id: p.clone(),
            reviewer_id: r.clone(),
            score: rng.random_range(1..=10) as f64,
            confidence: rng.random_range(1..=4),
            phase: 1,
            pre_rebuttal: true,
        })
        .collect();
    group_reviews(&reviews)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_excludes_conflicts_and_low_scores(seed in any::<u64>()) {
        let inst = random_instance(seed, 8, 10);
        let m = model_of(&inst);
        for v in &m.vars {
            let (p, r) = (&m.papers[v.paper].id, &m.reviewers[v.reviewer].id);
            prop_assert!(!inst.conflicts.contains(p, r), "{p}-{r} conflicted");
            prop_assert!(v.score >= m.params.score_threshold);
        }
    }

    #[test]
    fn heuristic_is_feasible_and_deterministic(seed in any::<u64>()) {
        let inst = random_instance(seed, 8, 10);
        let m = model_of(&inst);
        let a = solve_with_row_generation(&m, &HeuristicSolver::default(), DEFAULT_MAX_ITERS).unwrap();
        let b = solve_with_row_generation(&m, &HeuristicSolver::default(), DEFAULT_MAX_ITERS).unwrap();
        // evaluate_objective rejects any hard-constraint violation
        let obj = evaluate_objective(&m, &a.assignment).unwrap();
        prop_assert!((obj.total() - a.objective.total()).abs() <= 1e-9);
        prop_assert!(obj.total() <= a.upper_bound + 1e-9);
        prop_assert_eq!(a.to_json(&m, false).to_string(), b.to_json(&m, false).to_string());
    }

    #[test]
    fn cycles_are_closed_under_swap(seed in any::<u64>()) {
        let inst = random_instance(seed, 8, 10);
        let cycles = cycle_set(&inst.corpus, &inst.bids);
        let set: BTreeSet<_> = cycles.iter().map(|t| (t.j, t.j2, t.i, t.i2)).collect();
        for &(j, j2, i, i2) in &set {
            prop_assert!(set.contains(&(j2, j, i2, i)));
        }
    }

    #[test]
    fn rejection_is_monotone_in_policy(
        reviews in prop::collection::vec((0usize..6, 1u8..=10, 1u8..=4), 0..24),
        lo in 2.0f64..6.0, raise in 0.0f64..3.0, conf in 2u8..=4, drop in 0u8..=2,
    ) {
        let papers: Vec<(String, Track)> = (0..6)
            .map(|i| (format!("p{i}"), if i == 5 { Track::Fasttrack } else { Track::Main }))
            .collect();
        let rs: Vec<Review> = reviews
            .iter()
            .enumerate()
            .map(|(k, &(p, s, c))| Review {
                paper_id: format!("p{p}"),
                reviewer_id: format!("r{k}"),
                score: s as f64,
                confidence: c,
                phase: 1,
                pre_rebuttal: true,
            })
            .collect();
        let by_paper = group_reviews(&rs);
        let strict = PhasePolicy { reject_score_threshold: lo, reject_confidence_min: conf, ..PhasePolicy::default() };
        let loose = PhasePolicy {
            reject_score_threshold: lo + raise,
            reject_confidence_min: conf.saturating_sub(drop).max(1),
            ..PhasePolicy::default()
        };
        let a = phase1_decide(&papers, &by_paper, &strict);
        let b = phase1_decide(&papers, &by_paper, &loose);
        prop_assert!(a.rejected_phase1.is_subset(&b.rejected_phase1));
        for out in [&a, &b] {
            prop_assert!(!out.rejected_phase1.contains("p5"));
            prop_assert_eq!(out.rejected_phase1.len() + out.promoted.len(), papers.len());
            prop_assert!(out.rejected_phase1.iter().all(|p| !out.promoted.contains_key(p)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phase2_extends_phase1_on_survivors(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 10);
        let params = MatchParams::default();
        let inp = PhaseInputs {
            corpus: &inst.corpus,
            scores: &inst.scores,
            conflicts: &inst.conflicts,
            bids: &inst.bids,
            params: &params,
        };
        let res = run_two_phase(
            &inp,
            &TwoPhaseConfig::default(),
            &PhasePolicy::default(),
            &HeuristicSolver::default(),
            &mut |pairs| random_reviews(pairs, seed),
        )
        .unwrap();
        let p1: BTreeSet<_> = res.phase1.pairs().into_iter().collect();
        let p2: BTreeSet<_> = res.phase2.run.pairs().into_iter().collect();
        for (p, r) in &p1 {
            if !res.outcome.rejected_phase1.contains(p) {
                prop_assert!(p2.contains(&(p.clone(), r.clone())), "{p}-{r} lost in phase 2");
            }
        }
        for mp in &res.phase2.run.model.papers {
            prop_assert!(!res.outcome.rejected_phase1.contains(&mp.id));
        }
    }

    #[test]
    fn generator_snapshots_are_nested(seed in any::<u64>(), growth in 1.2f64..3.0) {
        let inst = random_instance(seed, 12, 8);
        let kw = inst.corpus.papers()[0].primary_keyword.clone();
        let snaps = generate_conference(&inst.corpus, &GenConfig { seed_keyword: kw, growth_factor: growth, seed }).unwrap();
        prop_assert!(!snaps.is_empty());
        let ids = |c: &revmatch::corpus::Corpus| -> (BTreeSet<String>, BTreeSet<String>) {
            (
                c.papers().iter().map(|p| p.id.clone()).collect(),
                c.reviewers().iter().map(|r| r.id.clone()).collect(),
            )
        };
        for w in snaps.windows(2) {
            let (pa, ra) = ids(&w[0]);
            let (pb, rb) = ids(&w[1]);
            prop_assert!(pa.is_subset(&pb) && ra.is_subset(&rb));
        }
    }
}
