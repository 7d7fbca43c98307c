//! Cosine-similarity graph construction, the low/high threshold transform and
//! weighted-graph quantities.
//!
//! Matrices are dense and row-major. Level-0 similarity graphs have an exactly
//! zero diagonal; aggregated graphs built by Louvain carry self-loops on the
//! diagonal, and every quantity here treats the diagonal entry as part of the
//! row (so a self-loop stored as `A_cc` contributes `A_cc` to the degree).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exec;
use crate::fmt::f64_17;

/// Tolerance for the symmetry check on imported matrices.
pub const IMPORT_SYMMETRY_TOL: f64 = 1e-9;

/// Symmetric, dense `n x n` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Wraps a row-major matrix that must be exactly symmetric with a zero
    /// diagonal.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        let m = Self::with_self_loops(n, data)?;
        if let Some(i) = (0..n).find(|&i| m.get(i, i) != 0.0) {
            return Err(Error::Matrix(format!("diagonal entry {i} is nonzero")));
        }
        Ok(m)
    }

    /// Like [`from_dense`](Self::from_dense) but keeps diagonal entries as
    /// self-loop weights.
    pub fn with_self_loops(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Matrix(format!(
                "expected {} entries for n = {n}, found {}",
                n * n,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Matrix("non-finite entry".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::Matrix(format!("entries ({i},{j}) and ({j},{i}) differ")));
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Builds from rows; see [`from_dense`](Self::from_dense).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Matrix(format!("row of length {} in a {n}-row matrix", r.len())));
        }
        Self::from_dense(n, rows.concat())
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.n)
    }

    /// Returns the matrix with rows and columns reordered: entry `(i, j)` of
    /// the result is entry `(perm[i], perm[j])` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        Self { n, data }
    }

    pub fn has_negative(&self) -> Option<(usize, usize, f64)> {
        self.data
            .iter()
            .position(|&x| x < 0.0)
            .map(|p| (p / self.n, p % self.n, self.data[p]))
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// `<u, v> / (|u| |v|)`, clipped to `[-1, 1]`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::VectorDimension(u.len(), v.len()));
    }
    let (nu, nv) = (norm_sq(u), norm_sq(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(cosine_with_norms(u, v, nu, nv))
}

/// Takes squared norms; `sqrt(|u|^2 |v|^2)` makes identical vectors score
/// exactly 1 where `|u| |v|` can round below it.
#[inline]
fn cosine_with_norms(u: &[f64], v: &[f64], nu_sq: f64, nv_sq: f64) -> f64 {
    (dot(u, v) / (nu_sq * nv_sq).sqrt()).clamp(-1.0, 1.0)
}

/// Pairwise cosine similarities of the corpus vectors, zero diagonal.
///
/// Entry `(i, j)` is bit-identical to `cosine_similarity(record_i, record_j)`
/// and to entry `(j, i)`. With `clamp_negative`, negative cosines become 0.
pub fn build_similarity_matrix(corpus: &Corpus, clamp_negative: bool) -> Result<SimilarityMatrix> {
    let vectors: Vec<&[f64]> = corpus.records().iter().map(|r| r.vector.as_slice()).collect();
    similarity_from_vectors(&vectors, clamp_negative)
}

/// [`build_similarity_matrix`] over bare vectors.
pub fn similarity_from_vectors(vectors: &[&[f64]], clamp_negative: bool) -> Result<SimilarityMatrix> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, |v| v.len());
    if let Some(v) = vectors.iter().find(|v| v.len() != d) {
        return Err(Error::VectorDimension(d, v.len()));
    }
    let norms: Vec<f64> = vectors.iter().map(|v| norm_sq(v)).collect();
    if norms.contains(&0.0) {
        return Err(Error::ZeroVector);
    }
    let mut data = vec![0.0; n * n];
    if n > 0 {
        exec::for_each_chunk(&mut data, n, |i, row| {
            for (j, s) in row.iter_mut().enumerate() {
                if i != j {
                    let c = cosine_with_norms(vectors[i], vectors[j], norms[i], norms[j]);
                    *s = if clamp_negative { c.max(0.0) } else { c };
                }
            }
        });
    }
    Ok(SimilarityMatrix { n, data })
}

/// Low/high cutoff rule applied to off-diagonal similarities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Entries strictly below `lo` become `lo_value`.
    pub lo: f64,
    pub lo_value: f64,
    /// Entries strictly above `hi` become `hi_value`.
    pub hi: f64,
    pub hi_value: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            lo: 0.25,
            lo_value: 0.0,
            hi: 0.85,
            hi_value: 0.5,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ThresholdConfig {
            lo,
            lo_value,
            hi,
            hi_value,
        } = *self;
        let bad = |m: &str| Err(Error::Threshold(m.into()));
        if ![lo, lo_value, hi, hi_value].iter().all(|x| x.is_finite()) {
            return bad("values must be finite");
        }
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("need 0 <= lo <= hi <= 1");
        }
        if !(lo_value <= hi_value && hi_value <= 1.0) {
            return bad("need lo_value <= hi_value <= 1");
        }
        if hi_value < lo {
            return bad("hi_value must not fall below lo");
        }
        if lo_value < 0.0 {
            return bad("lo_value must be non-negative");
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        if s < self.lo {
            self.lo_value
        } else if s > self.hi {
            self.hi_value
        } else {
            s
        }
    }
}

/// Applies `cfg` to every off-diagonal entry; the diagonal is left at 0.
pub fn apply_thresholds(s: &SimilarityMatrix, cfg: &ThresholdConfig) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let n = s.n;
    let mut data = s.data.clone();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                data[i * n + j] = cfg.apply(data[i * n + j]);
            }
        }
    }
    Ok(SimilarityMatrix { n, data })
}

/// Weighted degree `k_i`, the row sum.
pub fn degree(s: &SimilarityMatrix, i: usize) -> Result<f64> {
    if i >= s.n {
        return Err(Error::IndexOutOfRange { index: i, n: s.n });
    }
    Ok(s.row(i).iter().sum())
}

/// All weighted degrees.
pub fn degrees(s: &SimilarityMatrix) -> Vec<f64> {
    s.rows().map(|r| r.iter().sum()).collect()
}

/// `m`, half the sum of all entries (each undirected edge once).
pub fn total_weight(s: &SimilarityMatrix) -> f64 {
    0.5 * degrees(s).iter().sum::<f64>()
}

/// Reads a headerless `n x n` CSV matrix. Entries must be symmetric within
/// [`IMPORT_SYMMETRY_TOL`]; the result is the exact average of the two
/// triangles with the diagonal zeroed.
pub fn load_matrix_csv(path: &Path) -> Result<SimilarityMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| Error::Parse {
                    row: i + 1,
                    message: format!("{:?} is not a number", t.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected {n} columns, found {}", r.len()),
            });
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (rows[i][j], rows[j][i]);
            if !a.is_finite() || !b.is_finite() || (a - b).abs() > IMPORT_SYMMETRY_TOL {
                return Err(Error::Matrix(format!("not symmetric at ({i},{j}): {a} vs {b}")));
            }
            let v = 0.5 * (a + b);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    Ok(SimilarityMatrix { n, data })
}

/// Writes a headerless CSV with 17 significant digits per entry.
pub fn write_matrix_csv(s: &SimilarityMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in s.rows() {
        let line: Vec<String> = row.iter().map(|&x| f64_17(x)).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentRecord, Taxonomy};
    use approx::assert_relative_eq;

    fn corpus(vectors: &[&[f64]]) -> Corpus {
        let recs = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| DocumentRecord {
                id: i.to_string(),
                label: 1,
                vector: v.to_vec(),
            })
            .collect();
        Corpus::new(recs, Taxonomy::numbered(1)).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_relative_eq!(
            cosine_similarity(&[1., 2., 3.], &[1., 2., 3.]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(cosine_similarity(&[1., 0.], &[0., 1.]).unwrap(), 0.0);
        assert_relative_eq!(
            cosine_similarity(&[1., 0.], &[1., 1.]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            cosine_similarity(&[1.], &[1., 2.]),
            Err(Error::VectorDimension(1, 2))
        ));
        assert!(matches!(
            cosine_similarity(&[0., 0.], &[1., 2.]),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn matrix_examples() {
        let s = build_similarity_matrix(&corpus(&[&[1., 2.], &[1., 2.]]), true).unwrap();
        assert_eq!(s.as_slice(), &[0., 1., 1., 0.]);
        let s = build_similarity_matrix(&corpus(&[&[1., 0.], &[-1., 0.]]), true).unwrap();
        assert_eq!(s.get(0, 1), 0.0);
        let s = build_similarity_matrix(&corpus(&[&[1., 0.], &[-1., 0.]]), false).unwrap();
        assert_eq!(s.get(0, 1), -1.0);
    }

    #[test]
    fn threshold_examples() {
        let cfg = ThresholdConfig::default();
        assert_eq!(cfg.apply(0.10), 0.0);
        assert_eq!(cfg.apply(0.90), 0.5);
        assert_eq!(cfg.apply(0.50), 0.50);
        assert_eq!(cfg.apply(0.25), 0.25);
        assert_eq!(cfg.apply(0.85), 0.85);
        let bad = ThresholdConfig { hi_value: 0.1, ..cfg };
        assert!(bad.validate().is_err());
        let bad = ThresholdConfig {
            lo: 0.9,
            hi: 0.5,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn degree_and_weight_examples() {
        let s = SimilarityMatrix::from_rows(&[vec![0., 1.], vec![1., 0.]]).unwrap();
        assert_eq!(degree(&s, 0).unwrap(), 1.0);
        assert_eq!(total_weight(&s), 1.0);
        assert!(matches!(degree(&s, 2), Err(Error::IndexOutOfRange { index: 2, n: 2 })));
        let s = SimilarityMatrix::from_rows(&[vec![0., 0.5, 0.5], vec![0.5, 0., 0.], vec![0.5, 0., 0.]]).unwrap();
        assert_eq!(degree(&s, 0).unwrap(), 1.0);
        let mut two = vec![0.0; 16];
        for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            two[i * 4 + j] = 1.0;
        }
        let s = SimilarityMatrix::from_dense(4, two).unwrap();
        assert_eq!(total_weight(&s), 2.0);
        let z = SimilarityMatrix::zeros(3);
        assert_eq!(total_weight(&z), 0.0);
        assert_eq!(degree(&z, 1).unwrap(), 0.0);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(SimilarityMatrix::from_rows(&[vec![0., 1.], vec![0.5, 0.]]).is_err());
        assert!(SimilarityMatrix::from_rows(&[vec![1., 1.], vec![1., 0.]]).is_err());
        assert!(SimilarityMatrix::with_self_loops(2, vec![1., 1., 1., 0.]).is_ok());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = SimilarityMatrix::from_rows(&[vec![0., 0.1, 1.0 / 3.0], vec![0.1, 0., 0.7], vec![1.0 / 3.0, 0.7, 0.]])
            .unwrap();
        write_matrix_csv(&s, &p).unwrap();
        assert_eq!(load_matrix_csv(&p).unwrap(), s);
        std::fs::write(&p, "5,0.2\n0.2000000000001,9\n").unwrap();
        let l = load_matrix_csv(&p).unwrap();
        assert_eq!(l.get(0, 0), 0.0);
        assert_eq!(l.get(0, 1), l.get(1, 0));
        std::fs::write(&p, "0,0.2\n0.3,0\n").unwrap();
        assert!(load_matrix_csv(&p).is_err());
    }
}
