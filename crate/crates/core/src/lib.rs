//! Reviewer-paper matching for large conferences.
//!
//! The pipeline runs in stages, each in its own module:
//! [`corpus`] loads and validates a conference snapshot, [`coi`] infers
//! conflicts of interest, [`bids`] sanitizes bids, [`scoring`] builds the
//! aggregate match score, [`model`] and [`solve`] optimize the assignment,
//! [`two_phase`] orchestrates the two review phases and [`eval`] hosts the
//! simulation lab. [`cli`] wires everything behind the `revmatch` binary.

pub mod bids;
pub mod cli;
pub mod coi;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod lp;
pub mod model;
pub mod scoring;
pub mod solve;
pub mod two_phase;

#[doc(hidden)]
pub mod testutil;

use thiserror::Error;

/// Any pipeline failure, with a stable process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Coi(#[from] coi::CoiError),
    #[error(transparent)]
    Scoring(#[from] scoring::ScoringError),
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Solve(#[from] solve::SolveError),
    #[error(transparent)]
    Phase(#[from] two_phase::PhaseError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{file}:{line}: {message}")]
    Schema { file: String, line: u64, message: String },
    #[error("{file}:{line}: unknown {kind} `{id}`")]
    Reference {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const EXIT_SCHEMA: i32 = 1;
pub const EXIT_REFERENCE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_OTHER: i32 = 4;

fn model_exit(e: &model::ModelError) -> i32 {
    match e {
        model::ModelError::InvalidParams(_) => EXIT_CONFIG,
        model::ModelError::UnknownId { .. } => EXIT_REFERENCE,
        _ => EXIT_OTHER,
    }
}

impl Error {
    /// 1 malformed input, 2 dangling reference, 3 configuration, 4 anything else.
    pub fn exit_code(&self) -> i32 {
        use two_phase::PhaseError;
        match self {
            Error::Corpus(e) if e.is_reference() => EXIT_REFERENCE,
            Error::Corpus(_) | Error::Scoring(_) | Error::Schema { .. } => EXIT_SCHEMA,
            Error::Reference { .. } => EXIT_REFERENCE,
            Error::Coi(_) | Error::Config(_) | Error::Usage(_) => EXIT_CONFIG,
            Error::Model(e) => model_exit(e),
            Error::Solve(solve::SolveError::Model(e)) => model_exit(e),
            Error::Phase(PhaseError::Reviews { .. } | PhaseError::Csv(_)) => EXIT_SCHEMA,
            Error::Phase(PhaseError::UnknownId { .. }) => EXIT_REFERENCE,
            Error::Phase(PhaseError::Policy(_)) => EXIT_CONFIG,
            Error::Phase(PhaseError::Solve(solve::SolveError::Model(e))) => model_exit(e),
            Error::Eval(eval::EvalError::Noise(_) | eval::EvalError::GrowthFactor(_) | eval::EvalError::BurnIn { .. }) => {
                EXIT_CONFIG
            }
            Error::Eval(eval::EvalError::UnknownKeyword(_)) => EXIT_REFERENCE,
            _ => EXIT_OTHER,
        }
    }
}
