//! Run configuration, repeated seeded trials, and report emission.
//!
//! Every trial seed is derived from `(base seed, method index, trial)`, so a
//! run is reproducible from its echoed config regardless of how many worker
//! threads executed it.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoreConfig;
use crate::simgraph::ThresholdConfig;

mod problem;
mod report;
mod trials;

pub use problem::{load_problem, Problem};
pub use report::{
    emit_report, load_report, read_assignment_csv, select_baseline, verify_report, write_assignment_csv, Grid,
    MethodSummary, Report, Stats,
};
pub use trials::{run_method, run_trials, TrialFailure, TrialOutcome, TrialResult};

/// One clustering method with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MethodSpec {
    Kmeans { k: usize },
    Louvain,
    Spectral { n_clusters: usize, egn: usize },
}

impl MethodSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MethodSpec::Kmeans { .. } => "kmeans",
            MethodSpec::Louvain => "louvain",
            MethodSpec::Spectral { .. } => "spectral",
        }
    }

    /// Hyperparameters as `key=value` pairs joined by `;`.
    pub fn params(&self) -> String {
        match self {
            MethodSpec::Kmeans { k } => format!("k={k}"),
            MethodSpec::Louvain => String::new(),
            MethodSpec::Spectral { n_clusters, egn } => format!("n={n_clusters};egn={egn}"),
        }
    }

    /// File-name friendly identifier, e.g. `spectral-n4-egn6`.
    pub fn label(&self) -> String {
        match self {
            MethodSpec::Kmeans { k } => format!("kmeans-k{k}"),
            MethodSpec::Louvain => "louvain".into(),
            MethodSpec::Spectral { n_clusters, egn } => format!("spectral-n{n_clusters}-egn{egn}"),
        }
    }

    /// Parses `louvain`, `kmeans[:k=K]` or `spectral[:n=N,egn=E]`, taking
    /// missing hyperparameters from the fallbacks.
    pub fn parse_with(s: &str, k: Option<usize>, n: Option<usize>, egn: Option<usize>) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut k = k;
        let mut n = n;
        let mut egn = egn;
        for pair in rest.split([',', ';']).filter(|p| !p.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in {pair:?}")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key} must be a positive integer")))?;
            match key.trim() {
                "k" => k = Some(value),
                "n" => n = Some(value),
                "egn" => egn = Some(value),
                other => return Err(Error::Config(format!("unknown method parameter {other:?}"))),
            }
        }
        let need = |v: Option<usize>, what: &str| v.ok_or_else(|| Error::Config(format!("method {name} needs {what}")));
        match name.trim() {
            "kmeans" | "k-means" => Ok(MethodSpec::Kmeans { k: need(k, "k")? }),
            "louvain" => Ok(MethodSpec::Louvain),
            "spectral" => Ok(MethodSpec::Spectral {
                n_clusters: need(n, "n")?,
                egn: need(egn, "egn")?,
            }),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with(s, None, None, None)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Where the run reads its graph from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSpec {
    Corpus {
        path: PathBuf,
        taxonomy: Option<PathBuf>,
    },
    Matrix {
        path: PathBuf,
        labels: PathBuf,
        taxonomy: Option<PathBuf>,
    },
}

/// K-means settings shared by the raw-row and spectral methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansSettings {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for KMeansSettings {
    fn default() -> Self {
        Self {
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<InputSpec>,
    /// `None` leaves the similarity matrix untouched.
    pub threshold: Option<ThresholdConfig>,
    pub clamp_negative: bool,
    pub methods: Vec<MethodSpec>,
    pub trials: usize,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Method kind or label whose best trial seeds the majority vote.
    /// Defaults to Louvain when configured, else the first method.
    pub baseline: Option<String>,
    pub kmeans: KMeansSettings,
    pub scoring: ScoreConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            threshold: Some(ThresholdConfig::default()),
            clamp_negative: true,
            methods: vec![MethodSpec::Louvain],
            trials: 1,
            seed: 0,
            workers: None,
            baseline: None,
            kmeans: KMeansSettings::default(),
            scoring: ScoreConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if u32::try_from(self.trials).is_err() || u32::try_from(self.methods.len()).is_err() {
            return Err(Error::Config("too many trials or methods".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(t) = &self.threshold {
            t.validate()?;
        }
        if self.kmeans.max_iter < 1 || self.kmeans.restarts < 1 || self.kmeans.tol.is_nan() || self.kmeans.tol <= 0.0 {
            return Err(Error::Config(
                "k-means max_iter, restarts and tol must be positive".into(),
            ));
        }
        if let Some(b) = &self.baseline {
            if !self.methods.iter().any(|m| m.kind() == b || m.label() == *b) {
                return Err(Error::Config(format!("baseline {b:?} matches no configured method")));
            }
        }
        Ok(())
    }

    /// Resolved baseline selector.
    pub fn baseline_selector(&self) -> String {
        match &self.baseline {
            Some(b) => b.clone(),
            None if self.methods.contains(&MethodSpec::Louvain) => "louvain".into(),
            None => self.methods[0].label(),
        }
    }
}

/// Loads the input, runs all trials and writes the report into `out_dir`.
///
/// With `dump_spectrum`, the Laplacian spectrum and the embedding of the
/// first spectral method (or `egn = 1`) are written there as well.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path, dump_spectrum: Option<&Path>) -> Result<(Report, TrialOutcome)> {
    cfg.validate()?;
    let problem = load_problem(cfg)?;
    run_on_problem(&problem, cfg, out_dir, dump_spectrum)
}

/// [`run_pipeline`] on an already loaded problem.
pub fn run_on_problem(
    problem: &Problem,
    cfg: &RunConfig,
    out_dir: &Path,
    dump_spectrum: Option<&Path>,
) -> Result<(Report, TrialOutcome)> {
    let outcome = run_trials(problem, cfg)?;
    if let Some(dir) = dump_spectrum {
        let egn = cfg
            .methods
            .iter()
            .find_map(|m| match m {
                MethodSpec::Spectral { egn, .. } => Some(*egn),
                _ => None,
            })
            .unwrap_or(1);
        crate::spectral::write_spectrum(problem.eigen()?, egn, dir)?;
    }
    let zero_multiplicity = problem.cached_eigen().map(|e| e.zero_multiplicity());
    let report = emit_report(
        cfg,
        problem.taxonomy(),
        problem.labels(),
        &outcome,
        zero_multiplicity,
        out_dir,
    )?;
    Ok((report, outcome))
}
