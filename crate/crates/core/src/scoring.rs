//! Scores for comparing clusterings against the taxonomy.
//!
//! The entropy sum adds, over taxonomy labels, the Shannon entropy of each
//! label's spread across clusters (0 when every label sits in one cluster).
//! The balanced score is the standard deviation of the cluster sizes. Both
//! are reported side by side; nothing here combines them into one number.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Taxonomy;
use crate::error::{Error, Result};
use crate::kmeans::ClusterAssignment;

/// Clusters above this count are aligned greedily instead of exhaustively.
pub const EXHAUSTIVE_ALIGN_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    E,
    Two,
    Ten,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::E => x.ln(),
            LogBase::Two => x.log2(),
            LogBase::Ten => x.log10(),
        }
    }
}

impl FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(LogBase::E),
            "2" => Ok(LogBase::Two),
            "10" => Ok(LogBase::Ten),
            _ => Err(Error::Config(format!("log base must be e, 2 or 10, got {s:?}"))),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::E => "e",
            LogBase::Two => "2",
            LogBase::Ten => "10",
        })
    }
}

/// Divisor of the balanced-score standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StdConvention {
    /// Divide by the number of clusters.
    #[default]
    Population,
    /// Divide by the number of clusters minus one.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub log_base: LogBase,
    pub std: StdConvention,
}

/// Label x cluster counts. Row `j - 1` belongs to taxonomy label `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<usize>>,
    /// `counts` normalized per row.
    pub proportions: Vec<Vec<f64>>,
}

impl ContingencyTable {
    /// Builds a table from raw counts; every row needs a positive sum.
    pub fn from_counts(counts: Vec<Vec<usize>>) -> Result<Self> {
        let c = counts.first().map_or(0, Vec::len);
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::Matrix("ragged contingency rows".into()));
        }
        let proportions = counts
            .iter()
            .enumerate()
            .map(|(j, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    return Err(Error::EmptyLabel(j as u32 + 1));
                }
                Ok(row.iter().map(|&x| x as f64 / total as f64).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { counts, proportions })
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }
}

/// Counts nodes per (label, cluster).
pub fn contingency(labels: &[u32], num_labels: u32, a: &ClusterAssignment) -> Result<ContingencyTable> {
    if labels.len() != a.labels.len() {
        return Err(Error::LengthMismatch(labels.len(), a.labels.len()));
    }
    let mut counts = vec![vec![0usize; a.k]; num_labels as usize];
    for (&l, &c) in labels.iter().zip(&a.labels) {
        if l < 1 || l > num_labels {
            return Err(Error::LabelOutOfRange {
                label: l,
                max: num_labels,
            });
        }
        if c >= a.k {
            return Err(Error::ClusterOutOfRange { id: c, k: a.k });
        }
        counts[l as usize - 1][c] += 1;
    }
    ContingencyTable::from_counts(counts)
}

/// `-sum p ln p` over one label's proportions, `0 ln 0 = 0`.
pub fn subcluster_entropy(row: &[f64], base: LogBase) -> Result<f64> {
    if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::Distribution("entries must lie in [0, 1]".into()));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Distribution(format!("entries sum to {total}, not 1")));
    }
    Ok(entropy_unchecked(row, base))
}

fn entropy_unchecked(row: &[f64], base: LogBase) -> f64 {
    // summing in sorted order makes the result independent of cluster ids
    let mut ps: Vec<f64> = row.iter().copied().filter(|&p| p > 0.0).collect();
    ps.sort_by(f64::total_cmp);
    let h: f64 = ps.iter().map(|&p| -p * base.log(p)).sum();
    // a point mass gives -1 * log(1) = -0.0
    h.max(0.0)
}

/// Per-row entropies of a table.
pub fn row_entropies(table: &ContingencyTable, base: LogBase) -> Vec<f64> {
    table.proportions.iter().map(|r| entropy_unchecked(r, base)).collect()
}

/// Sum of the per-label entropies.
pub fn entropy_sum(table: &ContingencyTable, base: LogBase) -> f64 {
    row_entropies(table, base).iter().sum()
}

/// Standard deviation of the sizes of the clusters that received nodes.
pub fn balanced_score(a: &ClusterAssignment, convention: StdConvention) -> f64 {
    let mut sizes: Vec<f64> = a.sizes().into_iter().filter(|&s| s > 0).map(|s| s as f64).collect();
    sizes.sort_by(f64::total_cmp);
    std_dev(&sizes, convention)
}

pub(crate) fn std_dev(xs: &[f64], convention: StdConvention) -> f64 {
    let n = xs.len();
    let denom = match convention {
        StdConvention::Population => n,
        StdConvention::Sample => n.saturating_sub(1),
    };
    if n == 0 || denom == 0 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / denom as f64).sqrt()
}

/// The two clustering scores; lower is better for both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub entropy_sum: f64,
    pub balanced_score: f64,
}

/// Scores `a` against per-node labels in `1..=num_labels`.
pub fn score(labels: &[u32], num_labels: u32, a: &ClusterAssignment, cfg: &ScoreConfig) -> Result<ScorePair> {
    let table = contingency(labels, num_labels, a)?;
    Ok(ScorePair {
        entropy_sum: entropy_sum(&table, cfg.log_base),
        balanced_score: balanced_score(a, cfg.std),
    })
}

/// Relabeling of a candidate clustering onto a reference clustering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentMap {
    /// `map[c]` is the reference id for candidate id `c`, `None` if unmatched.
    pub map: Vec<Option<usize>>,
    pub reference_clusters: usize,
    /// Nodes whose mapped candidate id equals their reference id.
    pub overlap: usize,
    pub unmatched_candidate: Vec<usize>,
    pub unmatched_reference: Vec<usize>,
}

impl AlignmentMap {
    /// Relabels `a`. Unmatched candidate ids get fresh ids after the
    /// reference ids, in ascending order.
    pub fn apply(&self, a: &ClusterAssignment) -> ClusterAssignment {
        let mut full = vec![0; self.map.len()];
        let mut next = self.reference_clusters;
        for (c, m) in self.map.iter().enumerate() {
            full[c] = match m {
                Some(r) => *r,
                None => {
                    next += 1;
                    next - 1
                }
            };
        }
        ClusterAssignment {
            labels: a.labels.iter().map(|&c| full[c]).collect(),
            k: next.max(self.reference_clusters),
            objective: a.objective,
        }
    }
}

fn overlap_matrix(reference: &ClusterAssignment, candidate: &ClusterAssignment) -> Vec<Vec<usize>> {
    let mut o = vec![vec![0usize; candidate.k]; reference.k];
    for (&r, &c) in reference.labels.iter().zip(&candidate.labels) {
        o[r][c] += 1;
    }
    o
}

/// Finds the relabeling of `candidate` that agrees with `reference` on the
/// most nodes.
///
/// Up to [`EXHAUSTIVE_ALIGN_MAX`] clusters every injective map is tried; ties
/// prefer more ids left unchanged, then the lexicographically first map.
/// Beyond that a greedy pass repeatedly matches the pair with the largest
/// overlap (ties: same id first, then lower reference id, then lower
/// candidate id). With different cluster counts the smaller side is fully
/// matched and the rest reported as unmatched.
pub fn align_clusters(reference: &ClusterAssignment, candidate: &ClusterAssignment) -> Result<AlignmentMap> {
    if reference.len() != candidate.len() {
        return Err(Error::LengthMismatch(reference.len(), candidate.len()));
    }
    let o = overlap_matrix(reference, candidate);
    let (cr, cc) = (reference.k, candidate.k);
    let map = if cr.max(cc) <= EXHAUSTIVE_ALIGN_MAX {
        exhaustive_map(&o, cr, cc)
    } else {
        greedy_map(&o, cr, cc)
    };
    let overlap = map.iter().enumerate().filter_map(|(c, m)| m.map(|r| o[r][c])).sum();
    let unmatched_candidate = (0..cc).filter(|&c| map[c].is_none()).collect();
    let unmatched_reference = (0..cr).filter(|r| !map.contains(&Some(*r))).collect();
    Ok(AlignmentMap {
        map,
        reference_clusters: cr,
        overlap,
        unmatched_candidate,
        unmatched_reference,
    })
}

fn exhaustive_map(o: &[Vec<usize>], cr: usize, cc: usize) -> Vec<Option<usize>> {
    // enumerate injective maps from the smaller side into the larger side
    let cand_small = cc <= cr;
    let (small, large) = if cand_small { (cc, cr) } else { (cr, cc) };
    let weight = |s: usize, l: usize| if cand_small { o[l][s] } else { o[s][l] };
    let mut best: Option<(usize, usize, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(small);
    let mut used = vec![false; large];
    fn walk(
        small: usize,
        large: usize,
        weight: &dyn Fn(usize, usize) -> usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<(usize, usize, Vec<usize>)>,
    ) {
        if current.len() == small {
            let total: usize = current.iter().enumerate().map(|(s, &l)| weight(s, l)).sum();
            let fixed = current.iter().enumerate().filter(|(s, &l)| *s == l).count();
            let better = match best {
                None => true,
                Some((bt, bf, _)) => total > *bt || (total == *bt && fixed > *bf),
            };
            if better {
                *best = Some((total, fixed, current.clone()));
            }
            return;
        }
        for l in 0..large {
            if !used[l] {
                used[l] = true;
                current.push(l);
                walk(small, large, weight, current, used, best);
                current.pop();
                used[l] = false;
            }
        }
    }
    walk(small, large, &weight, &mut current, &mut used, &mut best);
    let chosen = best.map(|b| b.2).unwrap_or_default();
    let mut map = vec![None; cc];
    for (s, &l) in chosen.iter().enumerate() {
        if cand_small {
            map[s] = Some(l);
        } else {
            map[l] = Some(s);
        }
    }
    map
}

fn greedy_map(o: &[Vec<usize>], cr: usize, cc: usize) -> Vec<Option<usize>> {
    let mut pairs: Vec<(usize, usize)> = (0..cr).flat_map(|r| (0..cc).map(move |c| (r, c))).collect();
    pairs.sort_by(|&(r1, c1), &(r2, c2)| {
        o[r2][c2]
            .cmp(&o[r1][c1])
            .then((r2 == c2).cmp(&(r1 == c1)))
            .then(r1.cmp(&r2))
            .then(c1.cmp(&c2))
    });
    let mut map = vec![None; cc];
    let mut ref_used = vec![false; cr];
    for (r, c) in pairs {
        if !ref_used[r] && map[c].is_none() {
            ref_used[r] = true;
            map[c] = Some(r);
        }
    }
    map
}

/// Fraction of nodes with equal ids in both assignments.
pub fn agreement(a: &ClusterAssignment, b: &ClusterAssignment) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let same = a.labels.iter().zip(&b.labels).filter(|(x, y)| x == y).count();
    same as f64 / a.len() as f64
}

/// Cluster chosen for each taxonomy label by plurality of its nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperTacticMap {
    /// `cluster_of[j - 1]` is the cluster of label `j`.
    pub cluster_of: Vec<usize>,
    pub num_clusters: usize,
    /// Labels whose plurality was tied (resolved to the lowest cluster id).
    pub ties: Vec<u32>,
}

impl SuperTacticMap {
    pub fn cluster(&self, label: u32) -> Option<usize> {
        label
            .checked_sub(1)
            .and_then(|i| self.cluster_of.get(i as usize))
            .copied()
    }

    /// Labels of each cluster, ascending.
    pub fn groups(&self) -> Vec<Vec<u32>> {
        let mut g = vec![Vec::new(); self.num_clusters];
        for (i, &c) in self.cluster_of.iter().enumerate() {
            g[c].push(i as u32 + 1);
        }
        g
    }

    /// Label names per cluster.
    pub fn named_groups(&self, taxonomy: &Taxonomy) -> BTreeMap<usize, Vec<String>> {
        self.groups()
            .into_iter()
            .enumerate()
            .map(|(c, labels)| {
                let names = labels
                    .iter()
                    .map(|&l| taxonomy.name(l).map_or_else(|| format!("label {l}"), str::to_string))
                    .collect();
                (c, names)
            })
            .collect()
    }
}

/// Sends each label to the cluster holding most of its nodes.
pub fn majority_vote_supertactics(table: &ContingencyTable) -> SuperTacticMap {
    let mut ties = Vec::new();
    let cluster_of = table
        .counts
        .iter()
        .enumerate()
        .map(|(j, row)| {
            let max = row.iter().copied().max().unwrap_or(0);
            let first = row.iter().position(|&x| x == max).unwrap_or(0);
            if row.iter().filter(|&&x| x == max).count() > 1 {
                ties.push(j as u32 + 1);
            }
            first
        })
        .collect();
    SuperTacticMap {
        cluster_of,
        num_clusters: table.num_clusters(),
        ties,
    }
}

/// Places every node in its label's cluster. The result has a pure row for
/// every label, so its entropy sum is exactly 0.
pub fn finalize_assignment(labels: &[u32], map: &SuperTacticMap) -> Result<ClusterAssignment> {
    let out = labels
        .iter()
        .map(|&l| map.cluster(l).ok_or(Error::UnmappedLabel(l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterAssignment {
        labels: out,
        k: map.num_clusters,
        objective: f64::NAN,
    })
}
