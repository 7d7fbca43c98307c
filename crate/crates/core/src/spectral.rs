//! Spectral clustering on the unnormalized Laplacian `L = D - S`.
//!
//! The embedding keeps the eigenvectors of the `egn` smallest eigenvalues
//! after dropping exactly one (the smallest), arranged as `n` rows of `egn`
//! coordinates, and clusters the rows with spherical K-means.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::kmeans::{spherical_kmeans_run, ClusterAssignment, KMeansConfig};
use crate::simgraph::{degrees, SimilarityMatrix};

mod eigen;

pub use eigen::{symmetric_eig, EigenDecomposition};

/// Symmetry tolerance accepted by [`symmetric_eig`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Matrix(format!(
                "expected {} entries, found {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// `L_ii = k_i`, `L_ij = -S_ij`.
pub fn laplacian(s: &SimilarityMatrix) -> SquareMatrix {
    let n = s.n();
    let k = degrees(s);
    let mut data: Vec<f64> = s.as_slice().iter().map(|w| -w).collect();
    for i in 0..n {
        // diagonal of a level-0 graph is zero, so L_ii is exactly the degree
        data[i * n + i] = k[i];
    }
    SquareMatrix { n, data }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// K-means cluster count.
    pub n_clusters: usize,
    /// Number of retained eigenvectors.
    pub egn: usize,
    /// Settings for the embedding stage; its `k` is replaced by `n_clusters`.
    pub kmeans: KMeansConfig,
}

impl SpectralConfig {
    pub fn new(n_clusters: usize, egn: usize, seed: u64) -> Self {
        Self {
            n_clusters,
            egn,
            kmeans: KMeansConfig::new(n_clusters, seed),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.egn < 1 || self.egn + 1 > n {
            return Err(Error::Spectral(format!(
                "egn = {} outside 1..={}",
                self.egn,
                n.saturating_sub(1)
            )));
        }
        if self.n_clusters < 1 || self.n_clusters > n {
            return Err(Error::Spectral(format!(
                "n_clusters = {} outside 1..={n}",
                self.n_clusters
            )));
        }
        Ok(())
    }
}

/// Eigendecomposition of the Laplacian of `s`.
///
/// When the zero eigenvalue is repeated (a disconnected graph), the solver's
/// basis of the null space is arbitrary. It is replaced by the constant
/// vector followed by an orthonormal completion, so the dropped smallest
/// eigenvector is always the trivial one.
pub fn laplacian_eig(s: &SimilarityMatrix) -> Result<EigenDecomposition> {
    let mut eig = symmetric_eig(&laplacian(s))?;
    let m = eig.zero_multiplicity();
    if m > 1 {
        let n = eig.values.len();
        let mut basis = vec![vec![1.0 / (n as f64).sqrt(); n]];
        for v in &eig.vectors[..m] {
            if basis.len() == m {
                break;
            }
            let mut w = v.clone();
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 {
                w.iter_mut().for_each(|x| *x /= norm);
                eigen::fix_sign(&mut w);
                basis.push(w);
            }
        }
        for (k, b) in basis.into_iter().enumerate() {
            eig.vectors[k] = b;
        }
    }
    Ok(eig)
}

/// Rows of the eigenvectors for eigenvalues `2..=egn+1` (1-based ascending).
pub fn embed_from(eig: &EigenDecomposition, egn: usize) -> Result<Vec<Vec<f64>>> {
    let n = eig.values.len();
    if egn < 1 || egn + 1 > n {
        return Err(Error::Spectral(format!(
            "egn = {egn} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok((0..n).map(|i| (1..=egn).map(|c| eig.vectors[c][i]).collect()).collect())
}

/// `n x egn` spectral embedding of the graph.
pub fn spectral_embed(s: &SimilarityMatrix, egn: usize) -> Result<Vec<Vec<f64>>> {
    if egn < 1 || egn + 1 > s.n() {
        return Err(Error::Spectral(format!(
            "egn = {egn} outside 1..={}",
            s.n().saturating_sub(1)
        )));
    }
    embed_from(&laplacian_eig(s)?, egn)
}

/// Spectral clustering output with diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralRun {
    pub assignment: ClusterAssignment,
    /// Multiplicity of the zero eigenvalue (connected components of the
    /// thresholded graph). Above 1, the embedding keeps some null vectors.
    pub zero_multiplicity: usize,
    /// Embedding rows with zero norm; placed in cluster 0.
    pub zero_rows: Vec<usize>,
}

pub fn spectral_cluster(s: &SimilarityMatrix, cfg: &SpectralConfig) -> Result<ClusterAssignment> {
    cfg.validate(s.n())?;
    let eig = laplacian_eig(s)?;
    spectral_cluster_with(&eig, cfg).map(|r| r.assignment)
}

/// Clusters with a precomputed decomposition of the Laplacian.
pub fn spectral_cluster_with(eig: &EigenDecomposition, cfg: &SpectralConfig) -> Result<SpectralRun> {
    let n = eig.values.len();
    cfg.validate(n)?;
    let rows = embed_from(eig, cfg.egn)?;
    let km = KMeansConfig {
        k: cfg.n_clusters,
        ..cfg.kmeans
    };
    let run = spherical_kmeans_run(&rows, &km)?;
    let zero_multiplicity = eig.zero_multiplicity();
    if zero_multiplicity > 1 {
        log::info!("zero eigenvalue has multiplicity {zero_multiplicity}; consider a larger egn");
    }
    Ok(SpectralRun {
        assignment: run.assignment,
        zero_multiplicity,
        zero_rows: run.zero_rows,
    })
}

/// Writes `eigenvalues.csv` (`index,eigenvalue`, all eigenvalues) and
/// `embedding.csv` (`node,e1..e{egn}`) into `dir`.
pub fn write_spectrum(eig: &EigenDecomposition, egn: usize, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("eigenvalues.csv");
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    let io = |p: &Path, e| Error::io(p, e);
    writeln!(out, "index,eigenvalue").map_err(|e| io(&path, e))?;
    for (i, v) in eig.values.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, f64_17(*v)).map_err(|e| io(&path, e))?;
    }
    out.flush().map_err(|e| io(&path, e))?;

    let rows = embed_from(eig, egn)?;
    let path = dir.join("embedding.csv");
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    let header: Vec<String> = (1..=egn).map(|c| format!("e{c}")).collect();
    writeln!(out, "node,{}", header.join(",")).map_err(|e| io(&path, e))?;
    for (i, r) in rows.iter().enumerate() {
        let vals: Vec<String> = r.iter().map(|&x| f64_17(x)).collect();
        writeln!(out, "{i},{}", vals.join(",")).map_err(|e| io(&path, e))?;
    }
    out.flush().map_err(|e| io(&path, e))
}
