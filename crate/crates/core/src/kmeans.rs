//! Spherical K-means: K-means under cosine similarity with unit-normalized
//! points and normalized-mean centroids.
//!
//! Initialization samples `k` distinct nonzero rows (Forgy). Each restart
//! draws from its own stream derived from `(seed, restart)`, and the restart
//! with the highest objective wins (lowest restart index on ties), so the
//! result is a pure function of `(points, config)`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::rng;

/// Stream id for restart seeds in [`rng::stable_mix`].
const RESTART_STREAM: u32 = 0x4b4d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Relative objective change below which a run stops.
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: 300,
            tol: 1e-6,
            seed,
            restarts: 10,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k < 1 {
            return Err(Error::KMeans("k must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::KMeans(format!("k = {} exceeds the {n} points", self.k)));
        }
        if self.max_iter < 1 || self.restarts < 1 {
            return Err(Error::KMeans("max_iter and restarts must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::KMeans("tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-node cluster labels shared by every clustering method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id of each node, `0..k`.
    pub labels: Vec<usize>,
    pub k: usize,
    /// Method-specific quality: total cosine to centroids for K-means,
    /// modularity for Louvain.
    #[serde(with = "crate::fmt::nan_as_null")]
    pub objective: f64,
}

impl ClusterAssignment {
    /// Wraps labels, checking they lie in `0..k`.
    pub fn new(labels: Vec<usize>, k: usize, objective: f64) -> Result<Self> {
        if let Some(&id) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::ClusterOutOfRange { id, k });
        }
        Ok(Self { labels, k, objective })
    }

    /// Uses `max label + 1` as the cluster count.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self {
            labels,
            k,
            objective: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Node count of each cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Details of the winning restart.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub assignment: ClusterAssignment,
    /// Unit-norm centroids, one per cluster.
    pub centroids: Vec<Vec<f64>>,
    /// Objective after every assignment step, then the final objective.
    pub history: Vec<f64>,
    /// Rows with zero norm; they are always placed in cluster 0.
    pub zero_rows: Vec<usize>,
    /// Number of empty-cluster repairs.
    pub repairs: usize,
    pub restart: usize,
    pub iterations: usize,
}

/// Clusters the rows of `points` into `cfg.k` groups.
pub fn spherical_kmeans<R: AsRef<[f64]> + Sync>(points: &[R], cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    spherical_kmeans_run(points, cfg).map(|r| r.assignment)
}

/// [`spherical_kmeans`] with per-run diagnostics.
pub fn spherical_kmeans_run<R: AsRef<[f64]> + Sync>(points: &[R], cfg: &KMeansConfig) -> Result<KMeansRun> {
    let n = points.len();
    cfg.validate(n)?;
    let d = points[0].as_ref().len();
    if let Some(r) = points.iter().find(|r| r.as_ref().len() != d) {
        return Err(Error::VectorDimension(d, r.as_ref().len()));
    }
    let unit: Vec<Vec<f64>> = points.iter().map(|r| normalized(r.as_ref())).collect();
    let zero_rows: Vec<usize> = (0..n).filter(|&i| is_zero(&unit[i])).collect();
    let nonzero: Vec<usize> = (0..n).filter(|&i| !is_zero(&unit[i])).collect();
    if nonzero.len() < cfg.k {
        return Err(Error::KMeans(format!(
            "only {} nonzero rows for k = {}",
            nonzero.len(),
            cfg.k
        )));
    }
    if !zero_rows.is_empty() {
        log::debug!("{} zero rows assigned to cluster 0", zero_rows.len());
    }

    let runs = exec::map_range(cfg.restarts, |r| {
        let seed = rng::stable_mix(cfg.seed, RESTART_STREAM, r as u32);
        single_run(&unit, &nonzero, cfg, seed)
    });
    let (restart, best) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cur| if cur.1.objective > best.1.objective { cur } else { best })
        .expect("restarts >= 1");
    Ok(KMeansRun {
        assignment: ClusterAssignment {
            labels: best.labels,
            k: cfg.k,
            objective: best.objective,
        },
        centroids: best.centroids,
        history: best.history,
        zero_rows,
        repairs: best.repairs,
        restart,
        iterations: best.iterations,
    })
}

/// `sum_i cos(point_i, centroid[label_i])` for unit-norm centroids.
pub fn kmeans_objective<R: AsRef<[f64]>>(points: &[R], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            let p = p.as_ref();
            let nrm = norm(p);
            if nrm == 0.0 {
                0.0
            } else {
                dot(p, &centroids[l]) / nrm
            }
        })
        .sum()
}

struct SingleRun {
    labels: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    objective: f64,
    history: Vec<f64>,
    repairs: usize,
    iterations: usize,
}

fn single_run(unit: &[Vec<f64>], nonzero: &[usize], cfg: &KMeansConfig, seed: u64) -> SingleRun {
    let n = unit.len();
    let k = cfg.k;
    let mut rng = rng::from_seed(seed);
    let mut centroids: Vec<Vec<f64>> = index::sample(&mut rng, nonzero.len(), k)
        .into_iter()
        .map(|i| unit[nonzero[i]].clone())
        .collect();

    let mut labels: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    let mut repairs = 0;
    let mut iterations = 0;
    for iter in 0..cfg.max_iter {
        iterations = iter + 1;
        let assigned = exec::map_range(n, |i| nearest(&unit[i], &centroids));
        let objective: f64 = assigned.iter().map(|&(_, c)| c).sum();
        let new_labels: Vec<usize> = assigned.iter().map(|&(l, _)| l).collect();
        let stalled = history
            .last()
            .is_some_and(|&prev: &f64| (objective - prev).abs() < cfg.tol * prev.abs().max(f64::MIN_POSITIVE));
        let fixpoint = new_labels == labels;
        history.push(objective);
        labels = new_labels;

        let repaired = repair_empty(unit, &mut labels, &centroids, k);
        repairs += repaired;
        update_centroids(unit, &labels, &mut centroids);
        if repaired == 0 && (fixpoint || stalled) {
            break;
        }
    }
    let objective = kmeans_objective(unit, &labels, &centroids);
    history.push(objective);
    SingleRun {
        labels,
        centroids,
        objective,
        history,
        repairs,
        iterations,
    }
}

/// Highest-cosine centroid; ties go to the lower id, zero rows to 0.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    if is_zero(p) {
        return (0, 0.0);
    }
    let mut best = (0, dot(p, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let s = dot(p, centroid);
        if s > best.1 {
            best = (c, s);
        }
    }
    best
}

/// Moves into each empty cluster the point farthest (smallest cosine) from
/// its current centroid, taken from clusters that keep at least one member.
fn repair_empty(unit: &[Vec<f64>], labels: &mut [usize], centroids: &[Vec<f64>], k: usize) -> usize {
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    let mut repaired = 0;
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..unit.len())
            .filter(|&i| !is_zero(&unit[i]) && sizes[labels[i]] > 1)
            .map(|i| (i, dot(&unit[i], &centroids[labels[i]])))
            .reduce(|a, b| if b.1 < a.1 { b } else { a });
        if let Some((i, _)) = donor {
            sizes[labels[i]] -= 1;
            labels[i] = c;
            sizes[c] = 1;
            repaired += 1;
        }
    }
    repaired
}

/// Normalized member means; a cluster whose members sum to zero keeps its
/// previous centroid.
fn update_centroids(unit: &[Vec<f64>], labels: &[usize], centroids: &mut [Vec<f64>]) {
    let d = centroids[0].len();
    let mut sums = vec![vec![0.0; d]; centroids.len()];
    for (p, &l) in unit.iter().zip(labels) {
        for (s, x) in sums[l].iter_mut().zip(p) {
            *s += x;
        }
    }
    for (c, sum) in centroids.iter_mut().zip(sums) {
        let u = normalized(&sum);
        if !is_zero(&u) {
            *c = u;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let nrm = norm(a);
    if nrm == 0.0 || !nrm.is_finite() {
        vec![0.0; a.len()]
    } else {
        a.iter().map(|x| x / nrm).collect()
    }
}

fn is_zero(a: &[f64]) -> bool {
    a.iter().all(|&x| x == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn polar(deg: f64) -> Vec<f64> {
        let r = deg.to_radians();
        vec![r.cos(), r.sin()]
    }

    fn four_angles() -> Vec<Vec<f64>> {
        [0.0, 5.0, 90.0, 95.0].iter().map(|&a| polar(a)).collect()
    }

    /// Best 2-partition by exhaustive search: every labeling of n points with
    /// both clusters nonempty, scored with normalized-mean centroids.
    fn brute_force_k2(points: &[Vec<f64>]) -> (Vec<usize>, f64) {
        let n = points.len();
        let mut best = (vec![], f64::NEG_INFINITY);
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let centroids: Vec<Vec<f64>> = (0..2)
                .map(|c| {
                    let mut s = vec![0.0; points[0].len()];
                    for (p, _) in points.iter().zip(&labels).filter(|(_, &l)| l == c) {
                        let u = normalized(p);
                        s.iter_mut().zip(&u).for_each(|(a, b)| *a += b);
                    }
                    normalized(&s)
                })
                .collect();
            let obj = kmeans_objective(points, &labels, &centroids);
            if obj > best.1 {
                best = (labels, obj);
            }
        }
        best
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn four_angle_fixture_matches_brute_force() {
        let pts = four_angles();
        let (oracle, oracle_obj) = brute_force_k2(&pts);
        assert!(same_partition(&oracle, &[0, 0, 1, 1]));
        let a = spherical_kmeans(&pts, &KMeansConfig::new(2, 3)).unwrap();
        assert!(same_partition(&a.labels, &oracle));
        assert_relative_eq!(a.objective, oracle_obj, epsilon = 1e-12);
        assert_relative_eq!(a.objective, 4.0 * 2.5f64.to_radians().cos(), epsilon = 1e-12);
    }

    #[test]
    fn objective_examples() {
        let pts = vec![vec![1.0, 1.0]; 3];
        let c = vec![normalized(&[1.0, 1.0])];
        assert_relative_eq!(kmeans_objective(&pts, &[0, 0, 0], &c), 3.0, epsilon = 1e-15);
        let pts = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        let c = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(kmeans_objective(&pts, &[0, 1], &c), 2.0);
    }

    #[test]
    fn k_equals_n_and_k_one() {
        let pts = four_angles();
        let a = spherical_kmeans(&pts, &KMeansConfig::new(4, 1)).unwrap();
        let mut sorted = a.labels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_relative_eq!(a.objective, 4.0, epsilon = 1e-12);
        let a = spherical_kmeans(&pts, &KMeansConfig::new(1, 1)).unwrap();
        assert_eq!(a.labels, vec![0; 4]);
    }

    #[test]
    fn config_errors() {
        let pts = four_angles();
        assert!(spherical_kmeans(&pts, &KMeansConfig::new(5, 1)).is_err());
        assert!(spherical_kmeans(&pts, &KMeansConfig::new(0, 1)).is_err());
        let cfg = KMeansConfig {
            tol: 0.0,
            ..KMeansConfig::new(2, 1)
        };
        assert!(spherical_kmeans(&pts, &cfg).is_err());
    }

    #[test]
    fn zero_rows_go_to_cluster_zero() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0], vec![0.1, 1.0]];
        let run = spherical_kmeans_run(&pts, &KMeansConfig::new(2, 9)).unwrap();
        assert_eq!(run.zero_rows, vec![1]);
        assert_eq!(run.assignment.labels[1], 0);
    }

    #[test]
    fn duplicates_trigger_repair_and_keep_k() {
        // three identical points plus one distinct: k = 3 forces a repair
        let pts = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        for seed in 0..20 {
            let cfg = KMeansConfig {
                restarts: 1,
                ..KMeansConfig::new(3, seed)
            };
            let a = spherical_kmeans(&pts, &cfg).unwrap();
            assert!(a.sizes().iter().all(|&s| s > 0), "seed {seed}: {:?}", a.labels);
        }
    }

    #[test]
    fn history_is_non_decreasing() {
        let mut r = rng::from_seed(5);
        use rand::Rng;
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..5).map(|_| r.random_range(-1.0..1.0)).collect())
            .collect();
        for seed in 0..10 {
            let run = spherical_kmeans_run(&pts, &KMeansConfig::new(4, seed)).unwrap();
            for w in run.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{:?}", run.history);
            }
        }
    }
}
