use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{csv_error, Taxonomy};
use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::kmeans::ClusterAssignment;
use crate::scoring::{
    contingency, entropy_sum, finalize_assignment, majority_vote_supertactics, row_entropies, score, ScorePair,
    SuperTacticMap,
};

use super::{MethodSpec, RunConfig, TrialFailure, TrialOutcome, TrialResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
}

impl Stats {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            min: v[0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method_index: usize,
    pub method: MethodSpec,
    pub label: String,
    pub trials: usize,
    pub entropy_sum: Stats,
    pub balanced_score: Stats,
    /// Trial with the lowest entropy sum (then balanced score, then index).
    pub best_trial: usize,
}

/// Label-by-cluster proportion grid of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub method: String,
    pub trial: usize,
    pub proportions: Vec<Vec<f64>>,
    pub entropies: Vec<f64>,
    /// Cluster with the largest proportion per label (lowest id on ties).
    pub argmax: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub method: String,
    pub method_index: usize,
    pub trial: usize,
    pub scores: ScorePair,
}

/// Everything needed to reproduce and re-check a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: String,
    pub config: RunConfig,
    pub taxonomy: Taxonomy,
    /// Taxonomy label of every node.
    pub labels: Vec<u32>,
    pub trials: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
    pub summaries: Vec<MethodSummary>,
    pub baseline: Baseline,
    pub super_tactics: SuperTacticMap,
    /// Label names per final cluster.
    pub groups: BTreeMap<usize, Vec<String>>,
    pub finalized: ClusterAssignment,
    pub finalized_scores: ScorePair,
    pub grids: Vec<Grid>,
    /// Zero-eigenvalue multiplicity of the Laplacian, when spectral ran.
    pub spectral_zero_multiplicity: Option<usize>,
}

fn rank_key(r: &TrialResult) -> (f64, f64, usize, usize) {
    (r.scores.entropy_sum, r.scores.balanced_score, r.method_index, r.trial)
}

fn better(a: &TrialResult, b: &TrialResult) -> bool {
    let (ka, kb) = (rank_key(a), rank_key(b));
    ka.0.total_cmp(&kb.0)
        .then(ka.1.total_cmp(&kb.1))
        .then(ka.2.cmp(&kb.2))
        .then(ka.3.cmp(&kb.3))
        .is_lt()
}

/// Best trial among methods whose kind or label equals `selector`: lowest
/// entropy sum, then lowest balanced score, then lowest method index and
/// trial. Independent of the order of `results`.
pub fn select_baseline<'a>(results: &'a [TrialResult], selector: &str) -> Option<&'a TrialResult> {
    results
        .iter()
        .filter(|r| r.method.kind() == selector || r.method.label() == selector)
        .reduce(|best, r| if better(r, best) { r } else { best })
}

fn grid_for(r: &TrialResult, labels: &[u32], taxonomy: &Taxonomy, cfg: &RunConfig) -> Result<Grid> {
    let table = contingency(labels, taxonomy.len(), &r.assignment)?;
    let argmax = table
        .counts
        .iter()
        .map(|row| {
            let max = row.iter().copied().max().unwrap_or(0);
            row.iter().position(|&x| x == max).unwrap_or(0)
        })
        .collect();
    Ok(Grid {
        method: r.method.label(),
        trial: r.trial,
        entropies: row_entropies(&table, cfg.scoring.log_base),
        proportions: table.proportions,
        argmax,
    })
}

impl Report {
    /// Assembles a report from trial results without touching the disk.
    pub fn build(
        cfg: &RunConfig,
        taxonomy: &Taxonomy,
        labels: &[u32],
        outcome: &TrialOutcome,
        spectral_zero_multiplicity: Option<usize>,
    ) -> Result<Self> {
        if outcome.results.is_empty() {
            return Err(Error::EmptyResults);
        }
        let selector = cfg.baseline_selector();
        let base = select_baseline(&outcome.results, &selector)
            .ok_or_else(|| Error::Config(format!("no successful trial for baseline {selector:?}")))?;
        let table = contingency(labels, taxonomy.len(), &base.assignment)?;
        let super_tactics = majority_vote_supertactics(&table);
        let finalized = finalize_assignment(labels, &super_tactics)?;
        let finalized_scores = score(labels, taxonomy.len(), &finalized, &cfg.scoring)?;
        debug_assert_eq!(finalized_scores.entropy_sum, 0.0);

        let mut summaries = Vec::new();
        let mut grids = Vec::new();
        for (m, method) in cfg.methods.iter().enumerate() {
            let trials: Vec<&TrialResult> = outcome.results.iter().filter(|r| r.method_index == m).collect();
            let Some(best) = trials.iter().copied().reduce(|b, r| if better(r, b) { r } else { b }) else {
                continue;
            };
            let es: Vec<f64> = trials.iter().map(|r| r.scores.entropy_sum).collect();
            let bs: Vec<f64> = trials.iter().map(|r| r.scores.balanced_score).collect();
            summaries.push(MethodSummary {
                method_index: m,
                method: method.clone(),
                label: method.label(),
                trials: trials.len(),
                entropy_sum: Stats::of(&es),
                balanced_score: Stats::of(&bs),
                best_trial: best.trial,
            });
            grids.push(grid_for(best, labels, taxonomy, cfg)?);
        }

        Ok(Self {
            version: crate::VERSION.to_string(),
            config: cfg.clone(),
            taxonomy: taxonomy.clone(),
            labels: labels.to_vec(),
            trials: outcome.results.clone(),
            failures: outcome.failures.clone(),
            summaries,
            baseline: Baseline {
                method: base.method.label(),
                method_index: base.method_index,
                trial: base.trial,
                scores: base.scores,
            },
            groups: super_tactics.named_groups(taxonomy),
            super_tactics,
            finalized,
            finalized_scores,
            grids,
            spectral_zero_multiplicity,
        })
    }

    /// Writes `scores.csv`, `grid_<method>.csv`, one
    /// `assignment_<method>_<trial>.csv` per trial, and `report.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.write_scores(&dir.join("scores.csv"))?;
        for r in &self.trials {
            let path = dir.join(format!("assignment_{}_{}.csv", r.method.label(), r.trial));
            write_assignment_csv(&r.assignment, &path)?;
        }
        for g in &self.grids {
            self.write_grid(g, &dir.join(format!("grid_{}.csv", g.method)))?;
        }
        let path = dir.join("report.json");
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        out.flush().map_err(|e| Error::io(&path, e))
    }

    fn write_scores(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e, 0))?;
        w.write_record(["method", "params", "seed", "entropy_sum", "balanced_score"])
            .map_err(|e| csv_error(path, e, 0))?;
        for r in &self.trials {
            w.write_record([
                r.method.kind().to_string(),
                r.method.params(),
                r.seed.to_string(),
                f64_17(r.scores.entropy_sum),
                f64_17(r.scores.balanced_score),
            ])
            .map_err(|e| csv_error(path, e, 0))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_grid(&self, g: &Grid, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e, 0))?;
        let c = g.proportions.first().map_or(0, Vec::len);
        let mut header = vec!["label".to_string(), "name".to_string()];
        header.extend((0..c).map(|i| format!("p{i}")));
        header.extend(["entropy".to_string(), "max_cluster".to_string()]);
        w.write_record(&header).map_err(|e| csv_error(path, e, 0))?;
        for (j, row) in g.proportions.iter().enumerate() {
            let label = j as u32 + 1;
            let mut rec = vec![label.to_string(), self.taxonomy.name(label).unwrap_or("").to_string()];
            rec.extend(row.iter().map(|&p| f64_17(p)));
            rec.push(f64_17(g.entropies[j]));
            rec.push(g.argmax[j].to_string());
            w.write_record(&rec).map_err(|e| csv_error(path, e, 0))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds the report and writes its files into `dir`. Nothing is written
/// when there are no results.
pub fn emit_report(
    cfg: &RunConfig,
    taxonomy: &Taxonomy,
    labels: &[u32],
    outcome: &TrialOutcome,
    spectral_zero_multiplicity: Option<usize>,
    dir: &Path,
) -> Result<Report> {
    let report = Report::build(cfg, taxonomy, labels, outcome, spectral_zero_multiplicity)?;
    report.write(dir)?;
    Ok(report)
}

pub fn load_report(path: &Path) -> Result<Report> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Recomputes every stored score from the stored assignments and checks for
/// exact equality, along with the baseline choice and majority vote.
pub fn verify_report(report: &Report) -> Result<()> {
    let t = report.taxonomy.len();
    let cfg = &report.config;
    for r in &report.trials {
        let again = score(&report.labels, t, &r.assignment, &cfg.scoring)?;
        if again != r.scores {
            return Err(Error::ReportMismatch(format!(
                "{} trial {}: stored {:?}, recomputed {:?}",
                r.method.label(),
                r.trial,
                r.scores,
                again
            )));
        }
    }
    let outcome = TrialOutcome {
        results: report.trials.clone(),
        failures: report.failures.clone(),
    };
    let rebuilt = Report::build(
        cfg,
        &report.taxonomy,
        &report.labels,
        &outcome,
        report.spectral_zero_multiplicity,
    )?;
    if rebuilt.baseline != report.baseline || rebuilt.super_tactics != report.super_tactics {
        return Err(Error::ReportMismatch("baseline or super-cluster map differs".into()));
    }
    if rebuilt.finalized.labels != report.finalized.labels || rebuilt.finalized_scores != report.finalized_scores {
        return Err(Error::ReportMismatch("finalized assignment differs".into()));
    }
    let table = contingency(&report.labels, t, &report.finalized)?;
    if entropy_sum(&table, cfg.scoring.log_base) != 0.0 {
        return Err(Error::ReportMismatch("finalized entropy sum is not 0".into()));
    }
    Ok(())
}

/// `node_index,cluster` rows.
pub fn write_assignment_csv(a: &ClusterAssignment, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "node_index,cluster").map_err(io)?;
    for (i, c) in a.labels.iter().enumerate() {
        writeln!(out, "{i},{c}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a `node_index,cluster` file; rows may come in any order but must
/// cover `0..n` exactly once.
pub fn read_assignment_csv(path: &Path) -> Result<ClusterAssignment> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e, 0))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e, i + 1))?;
        let parse = |k: usize| {
            rec.get(k)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| Error::Parse {
                    row: i + 1,
                    message: "expected node_index,cluster integers".into(),
                })
        };
        rows.push((parse(0)?, parse(1)?));
    }
    let n = rows.len();
    let mut labels = vec![usize::MAX; n];
    for (row, &(i, c)) in rows.iter().enumerate() {
        if i >= n || labels[i] != usize::MAX {
            return Err(Error::Parse {
                row: row + 1,
                message: format!("node index {i} out of range or repeated"),
            });
        }
        labels[i] = c;
    }
    Ok(ClusterAssignment::from_labels(labels))
}
