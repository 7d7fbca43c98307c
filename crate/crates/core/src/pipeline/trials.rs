use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::kmeans::{spherical_kmeans, ClusterAssignment, KMeansConfig};
use crate::louvain::louvain_run;
use crate::rng;
use crate::scoring::{align_clusters, score, ScorePair};
use crate::spectral::{spectral_cluster_with, SpectralConfig};

use super::{MethodSpec, Problem, RunConfig};

/// One method run, aligned to the reference and scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method_index: usize,
    pub method: MethodSpec,
    pub trial: usize,
    pub seed: u64,
    pub assignment: ClusterAssignment,
    pub scores: ScorePair,
    /// Wall-clock time of the clustering call.
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub method_index: usize,
    pub method: MethodSpec,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Successful trials in `(method, trial)` order plus any failures.
#[derive(Debug, Clone, Default)]
pub struct TrialOutcome {
    pub results: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

impl TrialOutcome {
    pub fn any_failed(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs one method on the problem with the given seed, relabels the output
/// onto `reference` when given, and scores it.
pub fn run_method(
    problem: &Problem,
    method: &MethodSpec,
    method_index: usize,
    trial: usize,
    seed: u64,
    reference: Option<&ClusterAssignment>,
    cfg: &RunConfig,
) -> Result<TrialResult> {
    let wrap = |e: Error| Error::Method {
        method: method.label(),
        source: Box::new(e),
    };
    let kmeans_cfg = |k: usize| KMeansConfig {
        k,
        max_iter: cfg.kmeans.max_iter,
        tol: cfg.kmeans.tol,
        seed,
        restarts: cfg.kmeans.restarts,
    };
    let start = Instant::now();
    let raw = match method {
        MethodSpec::Kmeans { k } => {
            let rows: Vec<&[f64]> = problem.matrix().rows().collect();
            spherical_kmeans(&rows, &kmeans_cfg(*k))
        }
        MethodSpec::Louvain => louvain_run(problem.matrix(), seed).map(|run| {
            let k = run.partition.num_communities();
            ClusterAssignment {
                labels: run.partition.into_inner(),
                k,
                objective: run.modularity,
            }
        }),
        MethodSpec::Spectral { n_clusters, egn } => problem.eigen().and_then(|eig| {
            let sc = SpectralConfig {
                n_clusters: *n_clusters,
                egn: *egn,
                kmeans: kmeans_cfg(*n_clusters),
            };
            spectral_cluster_with(eig, &sc).map(|r| r.assignment)
        }),
    }
    .map_err(wrap)?;
    let duration_ms = start.elapsed().as_secs_f64() * 1e3;
    let assignment = match reference {
        Some(r) => align_clusters(r, &raw).map_err(wrap)?.apply(&raw),
        None => raw,
    };
    let scores = score(problem.labels(), problem.taxonomy().len(), &assignment, &cfg.scoring).map_err(wrap)?;
    Ok(TrialResult {
        method_index,
        method: method.clone(),
        trial,
        seed,
        assignment,
        scores,
        duration_ms,
    })
}

/// Seed of trial `t` of method `m`.
pub(crate) fn trial_seed(base: u64, method_index: usize, trial: usize) -> u64 {
    rng::stable_mix(base, method_index as u32, trial as u32)
}

/// Runs every configured method `cfg.trials` times.
///
/// Trial 0 of the first method runs first and becomes the alignment
/// reference; the rest run concurrently on up to `cfg.workers` threads.
/// Failed trials are recorded and the run continues.
pub fn run_trials(problem: &Problem, cfg: &RunConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    exec::with_workers(cfg.workers, || {
        let run = |(m, t): (usize, usize), reference: Option<&ClusterAssignment>| {
            let seed = trial_seed(cfg.seed, m, t);
            run_method(problem, &cfg.methods[m], m, t, seed, reference, cfg).map_err(|e| TrialFailure {
                method_index: m,
                method: cfg.methods[m].clone(),
                trial: t,
                seed,
                error: e.to_string(),
            })
        };
        let first = run(jobs[0], None);
        let reference = first.as_ref().ok().map(|r| r.assignment.clone());
        let rest = exec::map_range(jobs.len() - 1, |i| run(jobs[i + 1], reference.as_ref()));
        let mut outcome = TrialOutcome::default();
        for r in std::iter::once(first).chain(rest) {
            match r {
                Ok(res) => outcome.results.push(res),
                Err(f) => {
                    log::error!("{} trial {}: {}", f.method.label(), f.trial, f.error);
                    outcome.failures.push(f);
                }
            }
        }
        Ok(outcome)
    })
}
