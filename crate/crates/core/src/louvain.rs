//! Weighted modularity and the two-phase Louvain method on dense graphs.
//!
//! Level-0 graphs have no self-loops. Aggregated graphs store, for each
//! community `c`, `A_cc = sum_{i,j in c} S_ij` (twice the intra-community
//! weight) so row sums, and therefore degrees and `2m`, are conserved from
//! level to level, and so is modularity.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::simgraph::{degrees, SimilarityMatrix};

/// Smallest modularity gain accepted as an improvement. Anything at or below
/// it counts as zero gain and the node stays put.
pub const MIN_GAIN: f64 = 1e-12;

/// Safety cap on local-moving passes per level.
const MAX_PASSES: usize = 10_000;

const REMOVED: usize = usize::MAX;

/// Community membership with ids compacted to `0..num_communities`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    community: Vec<usize>,
    num_communities: usize,
}

impl Partition {
    /// Compacts arbitrary ids to `0..c` in order of first appearance.
    pub fn new(raw: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let community = raw
            .iter()
            .map(|&c| {
                let next = remap.len();
                *remap.entry(c).or_insert(next)
            })
            .collect();
        Self {
            community,
            num_communities: remap.len(),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            community: (0..n).collect(),
            num_communities: n,
        }
    }

    pub fn all_in_one(n: usize) -> Self {
        Self {
            community: vec![0; n],
            num_communities: usize::from(n > 0),
        }
    }

    pub fn community(&self) -> &[usize] {
        &self.community
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn len(&self) -> usize {
        self.community.len()
    }

    pub fn is_empty(&self) -> bool {
        self.community.is_empty()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.community
    }
}

fn check_graph(s: &SimilarityMatrix) -> Result<f64> {
    if let Some((i, j, weight)) = s.has_negative() {
        return Err(Error::NegativeWeight { i, j, weight });
    }
    let two_m: f64 = s.as_slice().iter().sum();
    if two_m <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    Ok(two_m)
}

fn check_partition(s: &SimilarityMatrix, p: &Partition) -> Result<()> {
    if p.len() != s.n() {
        return Err(Error::LengthMismatch(s.n(), p.len()));
    }
    Ok(())
}

/// `Q = 1/2m sum_ij [S_ij - k_i k_j / 2m] delta(c_i, c_j)`, evaluated as the
/// literal double sum.
pub fn modularity(s: &SimilarityMatrix, p: &Partition) -> Result<f64> {
    check_partition(s, p)?;
    let two_m = check_graph(s)?;
    let k = degrees(s);
    let c = p.community();
    let mut q = 0.0;
    for i in 0..s.n() {
        let row = s.row(i);
        for j in 0..s.n() {
            if c[i] == c[j] {
                q += row[j] - k[i] * k[j] / two_m;
            }
        }
    }
    Ok(q / two_m)
}

/// Same value as [`modularity`] through per-community sums, `O(n^2)` with a
/// smaller constant.
fn modularity_by_community(s: &SimilarityMatrix, community: &[usize], k: &[f64], two_m: f64) -> f64 {
    let c = community.iter().max().map_or(0, |m| m + 1);
    let mut inner = vec![0.0; c];
    let mut tot = vec![0.0; c];
    for i in 0..s.n() {
        tot[community[i]] += k[i];
        let row = s.row(i);
        for j in 0..s.n() {
            if community[i] == community[j] {
                inner[community[i]] += row[j];
            }
        }
    }
    inner.iter().zip(&tot).map(|(a, t)| a - t * t / two_m).sum::<f64>() / two_m
}

/// Collapses each community into one node. Entry `(c, d)` is the total weight
/// between members of `c` and `d`; the diagonal holds `sum_{i,j in c} S_ij`.
pub fn aggregate_graph(s: &SimilarityMatrix, p: &Partition) -> Result<SimilarityMatrix> {
    check_partition(s, p)?;
    let c = p.num_communities();
    let comm = p.community();
    let mut data = vec![0.0; c * c];
    for i in 0..s.n() {
        let ci = comm[i];
        for (j, &w) in s.row(i).iter().enumerate() {
            data[ci * c + comm[j]] += w;
        }
    }
    // exact symmetry regardless of summation order
    for a in 0..c {
        for b in a + 1..c {
            let v = 0.5 * (data[a * c + b] + data[b * c + a]);
            data[a * c + b] = v;
            data[b * c + a] = v;
        }
    }
    SimilarityMatrix::with_self_loops(c, data)
}

/// Incremental modularity bookkeeping over one graph.
///
/// Community slots are `0..n`. A node under evaluation is first
/// [`remove`](Self::remove)d, then [`gain`](Self::gain) gives the modularity
/// change of inserting it into a community relative to leaving it alone.
#[derive(Debug, Clone)]
pub struct ModularityState<'a> {
    graph: &'a SimilarityMatrix,
    community: Vec<usize>,
    degrees: Vec<f64>,
    sigma_tot: Vec<f64>,
    two_m: f64,
}

impl<'a> ModularityState<'a> {
    pub fn new(graph: &'a SimilarityMatrix, p: &Partition) -> Result<Self> {
        check_partition(graph, p)?;
        let two_m = check_graph(graph)?;
        let degrees = degrees(graph);
        let n = graph.n();
        let mut sigma_tot = vec![0.0; n.max(p.num_communities())];
        for (i, &c) in p.community().iter().enumerate() {
            sigma_tot[c] += degrees[i];
        }
        Ok(Self {
            graph,
            community: p.community().to_vec(),
            degrees,
            sigma_tot,
            two_m,
        })
    }

    pub fn num_slots(&self) -> usize {
        self.sigma_tot.len()
    }

    /// Current community of `node`, `None` while removed.
    pub fn community_of(&self, node: usize) -> Option<usize> {
        match self.community[node] {
            REMOVED => None,
            c => Some(c),
        }
    }

    pub fn remove(&mut self, node: usize) -> Result<()> {
        let c = self.community_of(node).ok_or(Error::NodeNotRemoved(node))?;
        self.sigma_tot[c] -= self.degrees[node];
        self.community[node] = REMOVED;
        Ok(())
    }

    pub fn insert(&mut self, node: usize, target: usize) -> Result<()> {
        if target >= self.num_slots() {
            return Err(Error::UnknownCommunity(target));
        }
        if self.community[node] != REMOVED {
            return Err(Error::NodeNotRemoved(node));
        }
        self.sigma_tot[target] += self.degrees[node];
        self.community[node] = target;
        Ok(())
    }

    /// Modularity change of inserting the removed `node` into `target`,
    /// relative to `node` sitting alone.
    pub fn gain(&self, node: usize, target: usize) -> Result<f64> {
        if target >= self.num_slots() {
            return Err(Error::UnknownCommunity(target));
        }
        if self.community[node] != REMOVED {
            return Err(Error::NodeNotRemoved(node));
        }
        let k_in: f64 = self
            .graph
            .row(node)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != node && self.community[j] == target)
            .map(|(_, w)| w)
            .sum();
        Ok(self.gain_from(node, target, k_in))
    }

    #[inline]
    fn gain_from(&self, node: usize, target: usize, k_in: f64) -> f64 {
        2.0 * (k_in - self.sigma_tot[target] * self.degrees[node] / self.two_m) / self.two_m
    }

    /// Modularity change of moving `node` from its community to `target`.
    pub fn move_gain(&mut self, node: usize, target: usize) -> Result<f64> {
        let from = self.community_of(node).ok_or(Error::NodeNotRemoved(node))?;
        if target >= self.num_slots() {
            return Err(Error::UnknownCommunity(target));
        }
        self.remove(node)?;
        let delta = self.gain(node, target)? - self.gain(node, from)?;
        self.insert(node, from)?;
        Ok(delta)
    }

    pub fn partition(&self) -> Partition {
        Partition::new(&self.community)
    }

    pub fn modularity(&self) -> f64 {
        modularity_by_community(self.graph, &self.community, &self.degrees, self.two_m)
    }

    /// One local-moving pass in `order`. Returns the number of moves.
    fn pass(&mut self, order: &[usize], buf: &mut NeighborWeights) -> usize {
        let mut moves = 0;
        for &i in order {
            let from = self.community[i];
            buf.clear();
            for (j, &w) in self.graph.row(i).iter().enumerate() {
                if j != i && w > 0.0 {
                    buf.add(self.community[j], w);
                }
            }
            self.sigma_tot[from] -= self.degrees[i];
            self.community[i] = REMOVED;

            let stay = self.gain_from(i, from, buf.weight(from));
            let mut best = (from, stay);
            buf.touched.sort_unstable();
            for &c in &buf.touched {
                if c == from {
                    continue;
                }
                let g = self.gain_from(i, c, buf.weights[c]);
                if g > best.1 || (g == best.1 && c < best.0) {
                    best = (c, g);
                }
            }
            let target = if best.0 != from && best.1 - stay > MIN_GAIN {
                moves += 1;
                best.0
            } else {
                from
            };
            self.sigma_tot[target] += self.degrees[i];
            self.community[i] = target;
        }
        moves
    }
}

struct NeighborWeights {
    weights: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    fn new(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        }
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.weights[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
    }

    fn add(&mut self, c: usize, w: f64) {
        if !self.seen[c] {
            self.seen[c] = true;
            self.touched.push(c);
        }
        self.weights[c] += w;
    }

    fn weight(&self, c: usize) -> f64 {
        self.weights[c]
    }
}

/// Result of one Louvain run.
#[derive(Debug, Clone)]
pub struct LouvainRun {
    pub partition: Partition,
    /// Modularity of `partition` on the input graph.
    pub modularity: f64,
    /// Modularity on the input graph at the start, after every local-moving
    /// pass and after every aggregation.
    pub trace: Vec<f64>,
    /// Number of aggregation levels performed.
    pub levels: usize,
}

/// Louvain community detection; the community count is an output.
pub fn louvain(s: &SimilarityMatrix, seed: u64) -> Result<Partition> {
    louvain_run(s, seed).map(|r| r.partition)
}

/// [`louvain`] with the modularity trace.
pub fn louvain_run(s: &SimilarityMatrix, seed: u64) -> Result<LouvainRun> {
    check_graph(s)?;
    let mut rng = rng::from_seed(seed);
    let mut graph = s.clone();
    let mut membership: Vec<usize> = (0..s.n()).collect();
    let k0 = degrees(s);
    let two_m0: f64 = k0.iter().sum();
    // every entry is evaluated on the input graph so aggregation steps
    // reproduce the previous value bit for bit
    let flat_q = |membership: &[usize], community: &[usize]| {
        let flat: Vec<usize> = membership.iter().map(|&m| community[m]).collect();
        modularity_by_community(s, Partition::new(&flat).community(), &k0, two_m0)
    };
    let mut trace = Vec::new();
    let mut levels = 0;
    loop {
        let n = graph.n();
        let mut state = ModularityState::new(&graph, &Partition::singletons(n))?;
        if levels == 0 {
            trace.push(flat_q(&membership, &state.community));
        }
        let mut buf = NeighborWeights::new(n);
        let mut order: Vec<usize> = (0..n).collect();
        let mut moved_any = false;
        for pass in 0.. {
            if pass == MAX_PASSES {
                log::warn!("louvain: pass cap reached at level {levels}");
                break;
            }
            order.shuffle(&mut rng);
            let moves = state.pass(&order, &mut buf);
            if moves == 0 {
                break;
            }
            moved_any = true;
            trace.push(flat_q(&membership, &state.community));
        }
        if !moved_any {
            break;
        }
        let level_partition = state.partition();
        let next = aggregate_graph(&graph, &level_partition)?;
        for m in membership.iter_mut() {
            *m = level_partition.community()[*m];
        }
        graph = next;
        levels += 1;
        trace.push(flat_q(&membership, &(0..graph.n()).collect::<Vec<_>>()));
    }
    let partition = Partition::new(&membership);
    let modularity = modularity(s, &partition)?;
    Ok(LouvainRun {
        partition,
        modularity,
        trace,
        levels,
    })
}
