//! Synthetic planted-partition fixtures.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, DocumentRecord, Taxonomy};
use crate::error::Result;
use crate::rng;
use crate::simgraph::SimilarityMatrix;

/// Block-structured similarity matrix: `within` inside blocks, `between`
/// across, plus uniform noise in `[-noise, noise]`, clipped to `[0, 1]`.
/// Returns the matrix and the block of every node.
pub fn planted_matrix(
    block_sizes: &[usize],
    within: f64,
    between: f64,
    noise: f64,
    seed: u64,
) -> (SimilarityMatrix, Vec<usize>) {
    let truth: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = truth.len();
    let mut r = rng::from_seed(seed);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let base = if truth[i] == truth[j] { within } else { between };
            let jitter = if noise > 0.0 {
                r.random_range(-noise..=noise)
            } else {
                0.0
            };
            let v = (base + jitter).clamp(0.0, 1.0);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    let s = SimilarityMatrix::from_dense(n, data).expect("symmetric by construction");
    (s, truth)
}

/// Super-cluster of each ATT&CK tactic (index `label - 1`) in the four-group
/// reduction: 0 preparation and reconnaissance, 1 persistence and evasion,
/// 2 credential movement, 3 command and data manipulation.
pub const MITRE_GROUP_OF_TACTIC: [usize; 14] = [1, 3, 0, 0, 0, 3, 3, 2, 1, 1, 1, 0, 2, 0];

/// Names of the four groups, indexed like [`MITRE_GROUP_OF_TACTIC`].
pub const MITRE_GROUP_NAMES: [&str; 4] = [
    "Preparation and Reconnaissance",
    "Persistence and Evasion",
    "Credential Movement",
    "Command and Data Manipulation",
];

/// Tactic sizes for a 785-node fixture, one entry per label.
pub fn fixture_label_sizes() -> Vec<usize> {
    let mut sizes = vec![56; 14];
    sizes[0] = 57;
    sizes
}

/// 785 labeled nodes over the 14 tactics with a similarity matrix whose
/// blocks follow [`MITRE_GROUP_OF_TACTIC`]. Returns `(matrix, labels)`.
pub fn tactic_fixture_matrix(within: f64, between: f64, noise: f64, seed: u64) -> (SimilarityMatrix, Vec<u32>) {
    let sizes = fixture_label_sizes();
    let labels: Vec<u32> = sizes
        .iter()
        .enumerate()
        .flat_map(|(j, &s)| std::iter::repeat_n(j as u32 + 1, s))
        .collect();
    let n = labels.len();
    let group = |l: u32| MITRE_GROUP_OF_TACTIC[l as usize - 1];
    let mut r = rng::from_seed(seed);
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let base = if group(labels[i]) == group(labels[j]) {
                within
            } else {
                between
            };
            let v = (base + r.random_range(-noise..=noise)).clamp(0.0, 1.0);
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    (SimilarityMatrix::from_dense(n, data).expect("symmetric"), labels)
}

/// Embedding corpus: each label's vectors scatter around a label direction
/// that sits near its group's direction.
///
/// `label_sizes[j]` records carry label `j + 1`; `group_of_label[j]` picks the
/// group. Noise is Gaussian with standard deviation `spread` per component.
pub fn planted_corpus(
    label_sizes: &[usize],
    group_of_label: &[usize],
    dim: usize,
    spread: f64,
    seed: u64,
    taxonomy: Taxonomy,
) -> Result<Corpus> {
    let mut r = rng::from_seed(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let groups = group_of_label.iter().max().map_or(0, |g| g + 1);
    let mut draw = |scale: f64| -> Vec<f64> { (0..dim).map(|_| scale * normal.sample(&mut r)).collect() };
    let group_dirs: Vec<Vec<f64>> = (0..groups).map(|_| draw(1.0)).collect();
    let label_dirs: Vec<Vec<f64>> = group_of_label
        .iter()
        .map(|&g| {
            let offset = draw(0.35);
            group_dirs[g].iter().zip(offset).map(|(a, b)| a + b).collect()
        })
        .collect();
    let mut records = Vec::new();
    for (j, &size) in label_sizes.iter().enumerate() {
        for k in 0..size {
            let noise = draw(spread);
            let vector = label_dirs[j].iter().zip(noise).map(|(a, b)| a + b).collect();
            records.push(DocumentRecord {
                id: format!("L{}-{k}", j + 1),
                label: j as u32 + 1,
                vector,
            });
        }
    }
    Corpus::new(records, taxonomy)
}
