//! Run configuration: one TOML file with a table per pipeline stage.
//!
//! Every key is optional and falls back to its default. Unknown keys are
//! rejected. Command-line flags override file values.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coi::CoiConfig;
use crate::eval::{GenConfig, NoiseModel};
use crate::model::MatchParams;
use crate::solve::{Backend, ExactSolver, HeuristicSolver, DEFAULT_MAX_ITERS, DEFAULT_NODE_LIMIT};
use crate::two_phase::{PhasePolicy, TwoPhaseConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    #[default]
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: BackendKind,
    pub max_iters: usize,
    pub seed: u64,
    /// Seconds; heuristic backend only.
    pub time_limit: Option<f64>,
    pub restarts: usize,
    pub perturb: f64,
    pub node_limit: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let h = HeuristicSolver::default();
        SolverConfig {
            backend: BackendKind::default(),
            max_iters: DEFAULT_MAX_ITERS,
            seed: h.seed,
            time_limit: None,
            restarts: h.restarts,
            perturb: h.perturb,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

impl SolverConfig {
    pub fn backend(&self) -> Backend {
        match self.backend {
            BackendKind::Exact => Backend::Exact(ExactSolver {
                node_limit: self.node_limit,
            }),
            BackendKind::Heuristic => Backend::Heuristic(HeuristicSolver {
                seed: self.seed,
                restarts: self.restarts,
                perturb: self.perturb,
                time_limit: self.time_limit.map(Duration::from_secs_f64),
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t) = self.time_limit {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ConfigError::Invalid("solver.time_limit must be >= 0".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.perturb) {
            return Err(ConfigError::Invalid("solver.perturb must lie in [0, 1]".into()));
        }
        if self.max_iters == 0 {
            return Err(ConfigError::Invalid("solver.max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub mu_s: f64,
    pub sigma_s: f64,
    pub sigma: f64,
    pub gamma_alpha: f64,
    pub gamma_beta: f64,
    /// Papers per gap simulation.
    pub papers: usize,
    pub seeds: usize,
    pub seed: u64,
    pub gibbs_papers: usize,
    pub reviews_per_paper: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed_keyword: Option<String>,
    pub growth_factor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let nm = NoiseModel::default();
        SimConfig {
            mu_s: nm.mu_s,
            sigma_s: nm.sigma_s,
            sigma: nm.sigma,
            gamma_alpha: nm.gamma_alpha,
            gamma_beta: nm.gamma_beta,
            papers: 6723,
            seeds: 20,
            seed: 0,
            gibbs_papers: 6000,
            reviews_per_paper: 3,
            iterations: 2000,
            burn_in: 500,
            seed_keyword: None,
            growth_factor: 2.0,
        }
    }
}

impl SimConfig {
    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            mu_s: self.mu_s,
            sigma_s: self.sigma_s,
            sigma: self.sigma,
            gamma_alpha: self.gamma_alpha,
            gamma_beta: self.gamma_beta,
        }
    }

    pub fn generator(&self) -> Option<GenConfig> {
        self.seed_keyword.as_ref().map(|kw| GenConfig {
            seed_keyword: kw.clone(),
            growth_factor: self.growth_factor,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding the corpus CSV files.
    pub corpus: Option<PathBuf>,
    /// `component,raw,y` rows for fitting score normalizers.
    pub annotations: Option<PathBuf>,
    /// `reviewer_id,kind,value` declared conflicts to ignore.
    pub suppressions: Option<PathBuf>,
    pub reviews: Option<PathBuf>,
    /// assignment.csv of an earlier run.
    pub assignment: Option<PathBuf>,
    /// `paper_id,score,confidence,accepted` rows for the false-negative estimator.
    pub outcomes: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "match")]
    pub matching: MatchParams,
    pub policy: PhasePolicy,
    pub sim: SimConfig,
    pub solver: SolverConfig,
    pub coi: CoiConfig,
    pub two_phase: TwoPhaseConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: origin.clone(),
            source,
        })?;
        Self::from_toml(&text, &origin)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.matching.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.policy.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sim.noise().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.sim.burn_in >= self.sim.iterations {
            return Err(ConfigError::Invalid("sim.burn_in must be below sim.iterations".into()));
        }
        if self.sim.growth_factor <= 1.0 {
            return Err(ConfigError::Invalid("sim.growth_factor must exceed 1".into()));
        }
        self.solver.validate()
    }
}
