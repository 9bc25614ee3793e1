#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use uptail::Graph;

/// Every pair `(i, j)` with `i < j < v`, in a fixed order.
fn all_pairs(v: usize) -> Vec<(usize, usize)> {
    (0..v).flat_map(|i| (i + 1..v).map(move |j| (i, j))).collect()
}

fn permutations(v: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..v).collect();
    fn go(k: usize, perm: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == perm.len() {
            out.push(perm.clone());
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            go(k + 1, perm, out);
            perm.swap(k, i);
        }
    }
    go(0, &mut perm, &mut out);
    out
}

/// Smallest edge bitmask over all relabelings.
fn canonical(mask: u32, pairs: &[(usize, usize)], perms: &[Vec<usize>]) -> u32 {
    perms
        .iter()
        .map(|perm| {
            let mut out = 0u32;
            for (bit, &(a, b)) in pairs.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    let (x, y) = (perm[a].min(perm[b]), perm[a].max(perm[b]));
                    let idx = pairs.iter().position(|&q| q == (x, y)).unwrap();
                    out |= 1 << idx;
                }
            }
            out
        })
        .min()
        .unwrap()
}

/// One representative per isomorphism class of connected graphs on exactly `v` vertices.
pub fn connected_graphs(v: usize) -> Vec<Graph> {
    let pairs = all_pairs(v);
    let perms = permutations(v);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask >> bit & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let g = Graph::new(v, edges).unwrap();
        if !g.is_connected() {
            continue;
        }
        if seen.insert(canonical(mask, &pairs, &perms)) {
            out.push(g);
        }
    }
    out
}

pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Graph {
    let edges: Vec<(usize, usize)> = all_pairs(n).into_iter().filter(|_| rng.gen_bool(p)).collect();
    Graph::new(n, edges).unwrap()
}

/// Exact number of labeled 2-regular graphs on `n` vertices, by choosing the
/// cycle through vertex 0 and recursing on the rest.
pub fn two_regular_count(n: usize) -> f64 {
    let mut a = vec![0.0f64; n + 1];
    a[0] = 1.0;
    for m in 1..=n {
        let mut total = 0.0;
        for k in 3..=m {
            // choose the other k−1 cycle vertices, then the (k−1)!/2 cyclic orders
            let mut ways = binomial(m - 1, k - 1);
            for f in 1..k {
                ways *= f as f64;
            }
            total += ways / 2.0 * a[m - k];
        }
        a[m] = total;
    }
    a[n]
}

pub fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Integer adjacency power trace.
pub fn trace_power(g: &Graph, l: usize) -> i128 {
    let n = g.vertex_count();
    let a: Vec<Vec<i128>> = (0..n)
        .map(|i| (0..n).map(|j| g.has_edge(i, j) as i128).collect())
        .collect();
    let mut m = a.clone();
    for _ in 1..l {
        m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|k| m[i][k] * a[k][j]).sum())
                    .collect()
            })
            .collect();
    }
    (0..n).map(|i| m[i][i]).sum()
}

pub fn diamond() -> Graph {
    Graph::new(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap()
}
