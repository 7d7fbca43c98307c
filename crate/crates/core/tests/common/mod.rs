//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use supercluster::SimilarityMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric graph with zero diagonal: each pair gets an edge with
/// probability `density`, weight uniform in `(0, 1]`. Never edgeless.
pub fn random_graph(n: usize, density: f64, r: &mut ChaCha8Rng) -> SimilarityMatrix {
    loop {
        let mut data = vec![0.0; n * n];
        let mut any = false;
        for i in 0..n {
            for j in i + 1..n {
                if r.random_bool(density) {
                    let w = 1.0 - r.random::<f64>();
                    data[i * n + j] = w;
                    data[j * n + i] = w;
                    any = true;
                }
            }
        }
        if any {
            return SimilarityMatrix::from_dense(n, data).unwrap();
        }
    }
}

/// Symmetric matrix with entries uniform in `[-1, 1]`, diagonal included.
pub fn random_symmetric(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let x = r.random_range(-1.0..=1.0);
            a[i * n + j] = x;
            a[j * n + i] = x;
        }
    }
    a
}

/// Every set partition of `0..n` as a restricted growth string.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for c in 0..=max + 1 {
            prefix.push(c);
            grow(prefix, max.max(c), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut prefix = vec![0];
    grow(&mut prefix, 0, n, &mut out);
    out
}

/// Newman modularity straight from the definition, with `2m` the sum of all
/// matrix entries.
pub fn modularity_oracle(w: &[f64], n: usize, community: &[usize]) -> f64 {
    let k: Vec<f64> = (0..n).map(|i| w[i * n..(i + 1) * n].iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if community[i] == community[j] {
                q += w[i * n + j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// True when `a` and `b` induce the same grouping of nodes.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.iter()
        .zip(b)
        .all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

/// Random orthogonal matrix (rows) from Gram-Schmidt on Gaussian-ish rows.
pub fn random_rotation(d: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for b in &q {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    q
}

pub fn rotate(rows: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|x| q.iter().map(|qr| qr.iter().zip(x).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

/// Well separated points: `k` random directions, `per` noisy copies of each.
pub fn clustered_points(k: usize, per: usize, d: usize, noise: f64, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| r.random_range(-1.0..1.0)).collect())
        .collect();
    let mut out = Vec::new();
    for c in &centers {
        for _ in 0..per {
            out.push(c.iter().map(|x| x + r.random_range(-noise..noise)).collect());
        }
    }
    out
}
