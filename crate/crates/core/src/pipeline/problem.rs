use std::sync::OnceLock;

use crate::corpus::{load_corpus, load_labels, load_taxonomy, Corpus, CorpusFormat, Taxonomy};
use crate::error::{Error, Result};
use crate::simgraph::{apply_thresholds, build_similarity_matrix, load_matrix_csv, SimilarityMatrix, ThresholdConfig};
use crate::spectral::{laplacian_eig, EigenDecomposition};

use super::{InputSpec, RunConfig};

/// The clustering input shared read-only by every trial: the (thresholded)
/// graph, per-node labels, and a lazily computed Laplacian decomposition.
#[derive(Debug)]
pub struct Problem {
    matrix: SimilarityMatrix,
    labels: Vec<u32>,
    taxonomy: Taxonomy,
    eigen: OnceLock<std::result::Result<EigenDecomposition, String>>,
}

impl Problem {
    /// `matrix` must already be clamped/thresholded as desired.
    pub fn new(matrix: SimilarityMatrix, labels: Vec<u32>, taxonomy: Taxonomy) -> Result<Self> {
        if labels.len() != matrix.n() {
            return Err(Error::LengthMismatch(labels.len(), matrix.n()));
        }
        if let Some(&l) = labels.iter().find(|&&l| !taxonomy.contains(l)) {
            return Err(Error::LabelOutOfRange {
                label: l,
                max: taxonomy.len(),
            });
        }
        Ok(Self {
            matrix,
            labels,
            taxonomy,
            eigen: OnceLock::new(),
        })
    }

    /// Builds the cosine graph of `corpus` and applies `threshold`.
    pub fn from_corpus(corpus: &Corpus, clamp_negative: bool, threshold: Option<&ThresholdConfig>) -> Result<Self> {
        let s = build_similarity_matrix(corpus, clamp_negative)?;
        let s = match threshold {
            Some(t) => apply_thresholds(&s, t)?,
            None => s,
        };
        Self::new(s, corpus.labels(), corpus.taxonomy().clone())
    }

    /// Wraps a precomputed matrix, clamping negatives and thresholding.
    pub fn from_matrix(
        s: SimilarityMatrix,
        labels: Vec<u32>,
        taxonomy: Taxonomy,
        clamp_negative: bool,
        threshold: Option<&ThresholdConfig>,
    ) -> Result<Self> {
        let s = if clamp_negative && s.has_negative().is_some() {
            let clamped = s.as_slice().iter().map(|&x| x.max(0.0)).collect();
            SimilarityMatrix::from_dense(s.n(), clamped)?
        } else {
            s
        };
        let s = match threshold {
            Some(t) => apply_thresholds(&s, t)?,
            None => s,
        };
        Self::new(s, labels, taxonomy)
    }

    pub fn matrix(&self) -> &SimilarityMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    /// Laplacian eigendecomposition, computed once and shared.
    pub fn eigen(&self) -> Result<&EigenDecomposition> {
        self.eigen
            .get_or_init(|| laplacian_eig(&self.matrix).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| Error::Spectral(e.clone()))
    }

    /// The decomposition if some spectral trial already computed it.
    pub fn cached_eigen(&self) -> Option<&EigenDecomposition> {
        self.eigen.get().and_then(|r| r.as_ref().ok())
    }
}

/// Loads the configured input into a [`Problem`].
pub fn load_problem(cfg: &RunConfig) -> Result<Problem> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input configured".into()))?;
    match input {
        InputSpec::Corpus { path, taxonomy } => {
            let tax = taxonomy.as_deref().map(load_taxonomy).transpose()?;
            let corpus = load_corpus(path, CorpusFormat::from_path(path), tax)?;
            Problem::from_corpus(&corpus, cfg.clamp_negative, cfg.threshold.as_ref())
        }
        InputSpec::Matrix { path, labels, taxonomy } => {
            let s = load_matrix_csv(path)?;
            let labels = load_labels(labels)?;
            let tax = match taxonomy {
                Some(t) => load_taxonomy(t)?,
                None => Taxonomy::numbered(labels.iter().copied().max().unwrap_or(1)),
            };
            Problem::from_matrix(s, labels, tax, cfg.clamp_negative, cfg.threshold.as_ref())
        }
    }
}
