//! The `revmatch` command line.
//!
//! Precedence for every setting: flag, then config file, then default.
//! Every command is deterministic given its inputs and seed.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bids::{filter_bids, FilteredBids};
use crate::coi::{conflict_stats, flag_suspicious_declarations, infer_conflicts, ConflictSet, Suppression, SuspicionReport};
use crate::config::{BackendKind, RunConfig};
use crate::corpus::{load_corpus, write_corpus, Corpus, CorpusPaths, PaperId, PersonId};
use crate::eval::{
    complete_entries, false_negative_rate, gibbs_estimate, generate_conference, generate_reviews, match_metrics, mean_gap,
    missing_data_stability, EvalError, FnPaper,
};
use crate::model::{build_model, evaluate_objective, BuildOptions, Model};
use crate::scoring::{build_score_matrix, load_annotations, Normalizers, ScoreMatrix};
use crate::solve::{solve_with_row_generation, PhaseInputs, SolveReport};
use crate::two_phase::{group_reviews, load_reviews, phase1_decide, run_phase1, run_phase2, write_decisions, PhaseOutcome};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "revmatch", version, about = "Conflict-aware reviewer assignment for large conferences")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the heuristic solver and the simulations.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct InputArgs {
    /// Directory with the corpus CSV files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub current_year: Option<i32>,
    /// Declared conflicts to ignore (reviewer_id,kind,value).
    #[arg(long)]
    pub suppressions: Option<PathBuf>,
    /// Human relevance labels for fitting score normalizers.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    Heuristic,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Absolute optimality gap for the heuristic stop rule.
    #[arg(long)]
    pub gap: Option<f64>,
    /// Heuristic time limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Also write model.lp.
    #[arg(long)]
    pub export_lp: bool,
    /// Run one phase of two-phase reviewing instead of a single assignment.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub phase: Option<u8>,
    /// Phase-1 assignment.csv, required with `--phase 2`.
    #[arg(long)]
    pub prior: Option<PathBuf>,
    /// Phase-1 reviews.csv, required with `--phase 2`.
    #[arg(long)]
    pub reviews: Option<PathBuf>,
    /// Add wall-clock timings to solve_report.json.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Gap,
    Gibbs,
    FalseNegative,
    Generate,
    Metrics,
}

impl Experiment {
    fn as_str(self) -> &'static str {
        match self {
            Experiment::Gap => "gap",
            Experiment::Gibbs => "gibbs",
            Experiment::FalseNegative => "false-negative",
            Experiment::Generate => "generate",
            Experiment::Metrics => "metrics",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub papers: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Phase-1 rejection score threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Seed keyword for `generate`.
    #[arg(long)]
    pub keyword: Option<String>,
    #[arg(long)]
    pub growth: Option<f64>,
    /// paper_id,score,confidence,accepted rows for `false-negative`.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// assignment.csv to score for `metrics`.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and cross-check the corpus.
    Validate(InputArgs),
    /// Write conflicts.csv and suspicion_report.csv.
    Conflicts(InputArgs),
    /// Write filtered_bids.csv and bid_audit.csv.
    Bids(InputArgs),
    /// Write scores.csv.
    Score(InputArgs),
    /// Solve the assignment and write assignment.csv and solve_report.json.
    Match(MatchArgs),
    /// Apply the phase-1 rejection rule and write decisions.csv.
    Decide {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        reviews: Option<PathBuf>,
    },
    /// Run a simulation experiment and write sim_report.json.
    Simulate(SimulateArgs),
    /// Summarize an existing assignment into report.json.
    Report {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        assignment: Option<PathBuf>,
    },
}

/// Parses arguments, runs, prints errors and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { crate::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
        cfg.sim.seed = seed;
    }
    if let Some(d) = &cli.out_dir {
        cfg.paths.out_dir = Some(d.clone());
    }
    let out_dir = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command, cfg, &out_dir))
}

fn apply_inputs(cfg: &mut RunConfig, input: &InputArgs) {
    if let Some(p) = &input.corpus {
        cfg.paths.corpus = Some(p.clone());
    }
    if let Some(y) = input.current_year {
        cfg.coi.current_year = Some(y);
    }
    if let Some(p) = &input.suppressions {
        cfg.paths.suppressions = Some(p.clone());
    }
    if let Some(p) = &input.annotations {
        cfg.paths.annotations = Some(p.clone());
    }
}

fn dispatch(cmd: Command, mut cfg: RunConfig, out: &Path) -> Result<(), Error> {
    match cmd {
        Command::Validate(input) => {
            apply_inputs(&mut cfg, &input);
            cfg.validate()?;
            let c = load(&cfg)?;
            println!(
                "ok: {} papers, {} reviewers, {} bids, {} keywords, {} regions",
                c.papers().len(),
                c.reviewers().len(),
                c.bid_count(),
                c.taxonomy.len(),
                c.regions.len()
            );
            Ok(())
        }
        Command::Conflicts(input) => {
            apply_inputs(&mut cfg, &input);
            cfg.validate()?;
            let c = load(&cfg)?;
            let (suspicion, conflicts) = conflicts_of(&c, &cfg)?;
            fs::create_dir_all(out)?;
            write_conflicts(&out.join("conflicts.csv"), &conflicts)?;
            write_suspicion(&out.join("suspicion_report.csv"), &suspicion)?;
            let stats = conflict_stats(&conflicts);
            println!(
                "{} conflicts, {} flagged users, trivial fraction {}",
                stats.total,
                suspicion.criteria.len(),
                stats.trivial_fraction
            );
            Ok(())
        }
        Command::Bids(input) => {
            apply_inputs(&mut cfg, &input);
            cfg.validate()?;
            let c = load(&cfg)?;
            let bids = filter_bids(&c, &c.authorship());
            fs::create_dir_all(out)?;
            write_bids(out, &bids)?;
            println!("{} bids kept, {} audit actions", bids.len(), bids.audit.len());
            Ok(())
        }
        Command::Score(input) => {
            apply_inputs(&mut cfg, &input);
            cfg.validate()?;
            let c = load(&cfg)?;
            let p = prepare(&c, &cfg)?;
            fs::create_dir_all(out)?;
            write_scores(&out.join("scores.csv"), &c, &p.scores)?;
            println!("{} scored pairs", p.scores.len());
            Ok(())
        }
        Command::Match(args) => cmd_match(args, cfg, out),
        Command::Decide { input, reviews } => {
            apply_inputs(&mut cfg, &input);
            if let Some(r) = reviews {
                cfg.paths.reviews = Some(r);
            }
            cfg.validate()?;
            let c = load(&cfg)?;
            let outcome = decide(&c, &cfg)?.0;
            fs::create_dir_all(out)?;
            write_decisions(&out.join("decisions.csv"), &outcome)?;
            println!(
                "{} rejected in phase 1, {} promoted",
                outcome.rejected_phase1.len(),
                outcome.promoted.len()
            );
            Ok(())
        }
        Command::Simulate(args) => cmd_simulate(args, cfg, out),
        Command::Report { input, assignment } => {
            apply_inputs(&mut cfg, &input);
            if let Some(a) = assignment {
                cfg.paths.assignment = Some(a);
            }
            cfg.validate()?;
            cmd_report(&cfg, out)
        }
    }
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

fn load(cfg: &RunConfig) -> Result<Corpus, Error> {
    let dir = cfg
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| Error::Usage("no corpus directory (use --corpus or paths.corpus)".into()))?;
    Ok(load_corpus(&CorpusPaths::in_dir(dir))?)
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Error> {
    p.as_deref()
        .ok_or_else(|| Error::Usage(format!("missing input: {what}")))
}

/// Conflicts, sanitized bids and scores for one corpus.
pub struct Prepared {
    pub suspicion: SuspicionReport,
    pub conflicts: ConflictSet,
    pub bids: FilteredBids,
    pub scores: ScoreMatrix,
}

fn conflicts_of(c: &Corpus, cfg: &RunConfig) -> Result<(SuspicionReport, ConflictSet), Error> {
    let suspicion = flag_suspicious_declarations(c);
    let suppressed = match &cfg.paths.suppressions {
        Some(p) => load_suppressions(p, c)?,
        None => BTreeSet::new(),
    };
    let conflicts = infer_conflicts(c, &suppressed, &cfg.coi)?;
    Ok((suspicion, conflicts))
}

/// Conflict inference, bid sanitation and scoring; suppressions and
/// annotations are read from `cfg.paths` when set.
pub fn prepare(c: &Corpus, cfg: &RunConfig) -> Result<Prepared, Error> {
    let (suspicion, conflicts) = conflicts_of(c, cfg)?;
    let bids = filter_bids(c, &c.authorship());
    let normalizers = match &cfg.paths.annotations {
        Some(p) => load_annotations(p)?,
        None => Normalizers::default(),
    };
    let scores = build_score_matrix(c, &conflicts, &bids, &normalizers);
    Ok(Prepared {
        suspicion,
        conflicts,
        bids,
        scores,
    })
}

fn write_intermediates(out: &Path, c: &Corpus, p: &Prepared) -> Result<(), Error> {
    fs::create_dir_all(out)?;
    write_conflicts(&out.join("conflicts.csv"), &p.conflicts)?;
    write_suspicion(&out.join("suspicion_report.csv"), &p.suspicion)?;
    write_bids(out, &p.bids)?;
    write_scores(&out.join("scores.csv"), c, &p.scores)
}

fn decide(c: &Corpus, cfg: &RunConfig) -> Result<(PhaseOutcome, crate::two_phase::ReviewsByPaper), Error> {
    let path = required(&cfg.paths.reviews, "reviews (use --reviews or paths.reviews)")?;
    let reviews = group_reviews(&load_reviews(path, c)?);
    let papers: Vec<(PaperId, _)> = c.papers().iter().map(|p| (p.id.clone(), p.track)).collect();
    Ok((phase1_decide(&papers, &reviews, &cfg.policy), reviews))
}

fn cmd_match(args: MatchArgs, mut cfg: RunConfig, out: &Path) -> Result<(), Error> {
    apply_inputs(&mut cfg, &args.input);
    if let Some(b) = args.backend {
        cfg.solver.backend = match b {
            BackendArg::Exact => BackendKind::Exact,
            BackendArg::Heuristic => BackendKind::Heuristic,
        };
    }
    if let Some(n) = args.max_iters {
        cfg.solver.max_iters = n;
        cfg.two_phase.max_iters = n;
    }
    if let Some(g) = args.gap {
        cfg.matching.mip_gap_abs = g;
    }
    if let Some(t) = args.time_limit {
        cfg.solver.time_limit = Some(t);
    }
    if let Some(p) = args.prior {
        cfg.paths.assignment = Some(p);
    }
    if let Some(r) = args.reviews {
        cfg.paths.reviews = Some(r);
    }
    cfg.validate()?;
    let c = load(&cfg)?;
    let prep = prepare(&c, &cfg)?;
    let backend = cfg.solver.backend();
    let inp = PhaseInputs {
        corpus: &c,
        scores: &prep.scores,
        conflicts: &prep.conflicts,
        bids: &prep.bids,
        params: &cfg.matching,
    };
    let mut extra = serde_json::Map::new();
    let (model, report, rows): (Model, SolveReport, Vec<AssignmentRow>) = match args.phase {
        None => {
            let model = build_model(&c, &prep.scores, &prep.conflicts, &prep.bids, &cfg.matching, &BuildOptions::default())?;
            let report = solve_with_row_generation(&model, &backend, cfg.solver.max_iters)?;
            let rows = rows_of(&c, &model.pairs(&report.assignment), 1);
            (model, report, rows)
        }
        Some(1) => {
            let run = run_phase1(&inp, &cfg.two_phase, &backend)?;
            let rows = rows_of(&c, &run.pairs(), 1);
            (run.model, run.report, rows)
        }
        Some(_) => {
            let prior_path = required(&cfg.paths.assignment, "prior assignment (use --prior)")?;
            let prior = load_assignment(prior_path, &c)?;
            let prior_pairs: Vec<(PaperId, PersonId)> = prior.iter().map(|r| (r.paper_id.clone(), r.reviewer_id.clone())).collect();
            let (outcome, reviews) = decide(&c, &cfg)?;
            let p2 = run_phase2(&inp, &cfg.two_phase, &prior_pairs, &outcome, &reviews, &cfg.policy, &backend)?;
            fs::create_dir_all(out)?;
            write_decisions(&out.join("decisions.csv"), &outcome)?;
            let old: BTreeSet<(PaperId, PersonId)> = prior_pairs.iter().cloned().collect();
            let new: Vec<(PaperId, PersonId)> = p2.run.pairs().into_iter().filter(|p| !old.contains(p)).collect();
            let mut rows = prior;
            rows.extend(rows_of(&c, &new, 2));
            extra.insert("requirements".into(), serde_json::to_value(&p2.requirements)?);
            extra.insert("under_assigned".into(), serde_json::to_value(&p2.under_assigned)?);
            (p2.run.model, p2.run.report, rows)
        }
    };
    write_intermediates(out, &c, &prep)?;
    write_assignment(&out.join("assignment.csv"), &rows)?;
    let mut rep = report.to_json(&model, args.timings);
    rep["model"] = serde_json::to_value(model.stats())?;
    rep["phase"] = json!(args.phase);
    for (k, v) in extra {
        rep[k.as_str()] = v;
    }
    write_json(&out.join("solve_report.json"), &rep)?;
    if args.export_lp {
        model.write_lp(&out.join("model.lp"))?;
    }
    println!(
        "{:?}: {} pairs, objective {}",
        report.status,
        rows.len(),
        report.objective.total()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, mut cfg: RunConfig, out: &Path) -> Result<(), Error> {
    apply_inputs(&mut cfg, &args.input);
    if let Some(n) = args.seeds {
        cfg.sim.seeds = n;
    }
    if let Some(n) = args.papers {
        cfg.sim.papers = n;
        cfg.sim.gibbs_papers = n;
    }
    if let Some(s) = args.sigma {
        cfg.sim.sigma = s;
    }
    if let Some(t) = args.threshold {
        cfg.policy.reject_score_threshold = t;
    }
    if let Some(k) = &args.keyword {
        cfg.sim.seed_keyword = Some(k.clone());
    }
    if let Some(g) = args.growth {
        cfg.sim.growth_factor = g;
    }
    if let Some(p) = &args.outcomes {
        cfg.paths.outcomes = Some(p.clone());
    }
    if let Some(p) = &args.assignment {
        cfg.paths.assignment = Some(p.clone());
    }
    cfg.validate()?;
    let nm = cfg.sim.noise();
    let mut report = json!({ "experiment": args.experiment.as_str(), "seed": cfg.sim.seed });
    match args.experiment {
        Experiment::Gap => {
            let (gap, per_seed) = mean_gap(cfg.sim.papers, &nm, &cfg.policy, cfg.sim.seeds, cfg.sim.seed)?;
            report["papers"] = json!(cfg.sim.papers);
            report["seeds"] = json!(cfg.sim.seeds);
            report["sigma"] = json!(nm.sigma);
            report["threshold"] = json!(cfg.policy.reject_score_threshold);
            report["gap"] = json!(gap);
            report["per_seed"] = json!(per_seed);
        }
        Experiment::Gibbs => {
            let data = generate_reviews(cfg.sim.gibbs_papers, cfg.sim.reviews_per_paper, &nm, cfg.sim.seed)?;
            let fit = gibbs_estimate(&data, &nm, cfg.sim.iterations, cfg.sim.burn_in, cfg.sim.seed.wrapping_add(1))?;
            report["papers"] = json!(cfg.sim.gibbs_papers);
            report["reviews_per_paper"] = json!(cfg.sim.reviews_per_paper);
            report["sigma_true"] = json!(nm.sigma);
            report["sigma_estimate"] = json!(fit.sigma);
            report["samples"] = json!(fit.samples);
        }
        Experiment::FalseNegative => {
            let path = required(&cfg.paths.outcomes, "outcomes (use --outcomes or paths.outcomes)")?;
            let (ids, papers) = load_outcomes(path)?;
            let fnr = false_negative_rate(&papers, &cfg.policy)?;
            let per_paper: BTreeMap<&str, f64> = ids.iter().map(String::as_str).zip(fnr.per_paper.iter().copied()).collect();
            report["rate"] = json!(fnr.rate);
            report["per_paper"] = json!(per_paper);
        }
        Experiment::Generate => {
            let c = load(&cfg)?;
            let gen = cfg
                .sim
                .generator()
                .ok_or_else(|| Error::Usage("generate needs a seed keyword (use --keyword or sim.seed_keyword)".into()))?;
            let snaps = generate_conference(&c, &gen)?;
            let root = out.join("snapshots");
            let mut sizes = Vec::new();
            for (k, s) in snaps.iter().enumerate() {
                write_corpus(s, &root.join(format!("snapshot_{k:03}")))?;
                sizes.push(json!({ "papers": s.papers().len(), "reviewers": s.reviewers().len() }));
            }
            report["seed_keyword"] = json!(gen.seed_keyword);
            report["growth_factor"] = json!(gen.growth_factor);
            report["snapshots"] = json!(sizes);
        }
        Experiment::Metrics => {
            let c = load(&cfg)?;
            let prep = prepare(&c, &cfg)?;
            report["stability"] = match missing_data_stability(&complete_entries(&prep.scores)) {
                Ok(st) => serde_json::to_value(st)?,
                Err(EvalError::TooFewSamples(_)) => serde_json::Value::Null,
                Err(e) => return Err(e.into()),
            };
            if let Some(p) = &cfg.paths.assignment {
                let (model, x, _) = assignment_model(&c, &prep, &cfg, p)?;
                report["metrics"] = serde_json::to_value(match_metrics(&model, &x, &prep.scores))?;
            }
        }
    }
    fs::create_dir_all(out)?;
    write_json(&out.join("sim_report.json"), &report)?;
    println!("{}", serde_json::to_string(&report)?.chars().take(400).collect::<String>());
    Ok(())
}

fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<(), Error> {
    let c = load(cfg)?;
    let prep = prepare(&c, cfg)?;
    let mut report = json!({
        "papers": c.papers().len(),
        "reviewers": c.reviewers().len(),
        "conflicts": conflict_stats(&prep.conflicts),
        "flagged_users": prep.suspicion.criteria.len(),
        "bids_kept": prep.bids.len(),
        "bid_audit_actions": prep.bids.audit.len(),
        "scored_pairs": prep.scores.len(),
    });
    if let Some(p) = &cfg.paths.assignment {
        let (model, x, unmatched) = assignment_model(&c, &prep, cfg, p)?;
        report["unmatched_pairs"] = json!(unmatched);
        report["metrics"] = serde_json::to_value(match_metrics(&model, &x, &prep.scores))?;
        match evaluate_objective(&model, &x) {
            Ok(obj) => {
                report["objective"] = serde_json::to_value(obj)?;
                report["objective_total"] = json!(obj.total());
            }
            Err(e) => report["objective_error"] = json!(e.to_string()),
        }
    }
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &report)?;
    println!("wrote {}", out.join("report.json").display());
    Ok(())
}

/// Single-phase model over all papers with `x` set from an assignment file.
/// Pairs without a model variable (for example conflicted ones) are counted.
fn assignment_model(c: &Corpus, prep: &Prepared, cfg: &RunConfig, path: &Path) -> Result<(Model, Vec<bool>, usize), Error> {
    let rows = load_assignment(path, c)?;
    let model = build_model(c, &prep.scores, &prep.conflicts, &prep.bids, &cfg.matching, &BuildOptions::default())?;
    let mut x = vec![false; model.num_vars()];
    let paper_at: BTreeMap<&str, usize> = model.papers.iter().enumerate().map(|(i, p)| (p.id.as_str(), i)).collect();
    let reviewer_at: BTreeMap<&str, usize> = model.reviewers.iter().enumerate().map(|(j, r)| (r.id.as_str(), j)).collect();
    let mut unmatched = 0;
    for r in &rows {
        let v = paper_at
            .get(r.paper_id.as_str())
            .zip(reviewer_at.get(r.reviewer_id.as_str()))
            .and_then(|(&i, &j)| model.var_index(i, j));
        match v {
            Some(v) => x[v] = true,
            None => unmatched += 1,
        }
    }
    Ok((model, x, unmatched))
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

pub const ASSIGNMENT_HEADER: [&str; 4] = ["paper_id", "reviewer_id", "role", "phase"];
pub const SUPPRESSIONS_HEADER: [&str; 3] = ["reviewer_id", "kind", "value"];
pub const OUTCOMES_HEADER: [&str; 4] = ["paper_id", "score", "confidence", "accepted"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssignmentRow {
    pub paper_id: PaperId,
    pub reviewer_id: PersonId,
    pub role: String,
    pub phase: u8,
}

fn rows_of(c: &Corpus, pairs: &[(PaperId, PersonId)], phase: u8) -> Vec<AssignmentRow> {
    pairs
        .iter()
        .map(|(p, r)| AssignmentRow {
            paper_id: p.clone(),
            reviewer_id: r.clone(),
            role: c.reviewer(r).map_or("", |r| r.role.as_str()).to_string(),
            phase,
        })
        .collect()
}

fn open_csv(path: &Path, header: &[&str]) -> Result<(String, csv::Reader<fs::File>), Error> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Schema {
            file,
            line: 1,
            message: format!("expected header {}", header.join(",")),
        });
    }
    Ok((file, rdr))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

pub fn load_assignment(path: &Path, c: &Corpus) -> Result<Vec<AssignmentRow>, Error> {
    let (file, mut rdr) = open_csv(path, &ASSIGNMENT_HEADER)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let reference = |kind: &'static str, id: &str| Error::Reference {
            file: file.clone(),
            line,
            kind,
            id: id.to_string(),
        };
        if c.paper(&rec[0]).is_none() {
            return Err(reference("paper", &rec[0]));
        }
        let reviewer = c.reviewer(&rec[1]).ok_or_else(|| reference("reviewer", &rec[1]))?;
        let phase: u8 = rec[3].parse().map_err(|_| Error::Schema {
            file: file.clone(),
            line,
            message: format!("bad phase `{}`", &rec[3]),
        })?;
        rows.push(AssignmentRow {
            paper_id: rec[0].to_string(),
            reviewer_id: rec[1].to_string(),
            role: reviewer.role.as_str().to_string(),
            phase,
        });
    }
    Ok(rows)
}

fn load_suppressions(path: &Path, c: &Corpus) -> Result<BTreeSet<Suppression>, Error> {
    let (file, mut rdr) = open_csv(path, &SUPPRESSIONS_HEADER)?;
    let mut out = BTreeSet::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        if c.reviewer(&rec[0]).is_none() {
            return Err(Error::Reference {
                file,
                line,
                kind: "reviewer",
                id: rec[0].to_string(),
            });
        }
        let kind = rec[1].parse().map_err(|message| Error::Schema {
            file: file.clone(),
            line,
            message,
        })?;
        out.insert(Suppression {
            reviewer_id: rec[0].to_string(),
            kind,
            value: rec[2].to_string(),
        });
    }
    Ok(out)
}

fn load_outcomes(path: &Path) -> Result<(Vec<PaperId>, Vec<FnPaper>), Error> {
    let (file, mut rdr) = open_csv(path, &OUTCOMES_HEADER)?;
    let mut by_paper: BTreeMap<PaperId, FnPaper> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = line_of(&rec);
        let schema = |message: String| Error::Schema {
            file: file.clone(),
            line,
            message,
        };
        let score: f64 = rec[1].parse().map_err(|_| schema(format!("bad score `{}`", &rec[1])))?;
        let confidence: u8 = rec[2].parse().map_err(|_| schema(format!("bad confidence `{}`", &rec[2])))?;
        let accepted = match rec[3].to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => true,
            "false" | "0" | "no" => false,
            other => return Err(schema(format!("bad accepted flag `{other}`"))),
        };
        let entry = by_paper.entry(rec[0].to_string()).or_insert(FnPaper {
            reviews: Vec::new(),
            accepted,
        });
        if entry.accepted != accepted {
            return Err(schema(format!("paper `{}` has conflicting accepted flags", &rec[0])));
        }
        entry.reviews.push((score, confidence));
    }
    Ok(by_paper.into_iter().unzip())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_conflicts(path: &Path, cs: &ConflictSet) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["paper_id", "reviewer_id", "reason"])?;
    for (p, r, reason) in cs.iter() {
        w.write_record([p.as_str(), r.as_str(), reason.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_suspicion(path: &Path, s: &SuspicionReport) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["person_id", "criteria"])?;
    for (id, crit) in &s.criteria {
        let joined: Vec<&str> = crit.iter().map(|c| c.as_str()).collect();
        w.write_record([id.as_str(), &joined.join(";")])?;
    }
    w.flush()?;
    Ok(())
}

fn write_bids(out: &Path, bids: &FilteredBids) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(out.join("filtered_bids.csv"))?;
    w.write_record(["reviewer_id", "paper_id", "level"])?;
    for (r, p, level) in bids.iter() {
        w.write_record([r.as_str(), p.as_str(), level.as_str()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("bid_audit.csv"))?;
    w.write_record(["reviewer_id", "action", "detail"])?;
    for a in &bids.audit {
        w.write_record([a.reviewer_id.as_str(), a.action.as_str(), a.detail.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_scores(path: &Path, c: &Corpus, scores: &ScoreMatrix) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["paper_id", "reviewer_id", "sam", "tpms_norm", "acl_norm", "base", "bid", "aggscore"])?;
    for (p, r, e) in scores.iter() {
        w.write_record([
            c.papers()[p].id.as_str(),
            c.reviewers()[r].id.as_str(),
            &e.sam.to_string(),
            &fmt_opt(e.tpms_norm),
            &fmt_opt(e.acl_norm),
            &e.base.to_string(),
            e.bid.as_str(),
            &e.aggscore.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_assignment(path: &Path, rows: &[AssignmentRow]) -> Result<(), Error> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| (a.phase, &a.paper_id, &a.reviewer_id).cmp(&(b.phase, &b.paper_id, &b.reviewer_id)));
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ASSIGNMENT_HEADER)?;
    for r in &sorted {
        w.write_record([r.paper_id.as_str(), r.reviewer_id.as_str(), r.role.as_str(), &r.phase.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
