//! Reduce a labeled taxonomy of embedded documents into a handful of
//! coherent super clusters.
//!
//! The pipeline builds a cosine-similarity graph over document embeddings,
//! optionally clips it with a low/high threshold transform, clusters it with
//! spherical K-means, Louvain and spectral clustering, and scores each output
//! with an entropy sum (how much each taxonomy label is split across
//! clusters) and a balanced score (how uneven the cluster sizes are). The
//! chosen baseline output is finalized by a per-label majority vote.
//!
//! With the default `parallel` feature, trials, matrix construction and the
//! K-means assignment step run on rayon; without it everything is sequential
//! and produces bit-identical results.

pub mod corpus;
pub mod error;
pub mod exec;
pub mod fmt;
pub mod kmeans;
pub mod louvain;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod simgraph;
pub mod spectral;
pub mod synth;

pub use corpus::{Corpus, DocumentRecord, Taxonomy};
pub use error::{Error, Result};
pub use kmeans::{spherical_kmeans, ClusterAssignment, KMeansConfig};
pub use louvain::{louvain, modularity, Partition};
pub use scoring::{ContingencyTable, ScorePair, SuperTacticMap};
pub use simgraph::{SimilarityMatrix, ThresholdConfig};
pub use spectral::{spectral_cluster, SpectralConfig};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
