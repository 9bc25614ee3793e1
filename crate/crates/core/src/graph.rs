//! Simple undirected graphs and the small-graph combinatorics every rate
//! formula depends on: 2-core peeling, the max-degree subgraph `H*`, its
//! independence polynomial, `Δ*` and the regular-ensemble exponent `f(H)`.
//!
//! The pattern graphs `H` handled here are tiny (a handful of vertices), so
//! the subset-based quantities are computed by exhaustive bitmask enumeration
//! behind an explicit vertex cap.

use std::collections::VecDeque;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational used for `Δ*` and `f(H)`.
pub type Rational = Ratio<i64>;

/// Default vertex cap for the exhaustive subset enumerations.
pub const ENUMERATION_CAP: usize = 20;

/// Simple undirected labeled graph on `0..vertex_count`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        Graph::new(r.vertex_count, r.edges)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> Self {
        GraphRepr {
            vertex_count: g.n,
            edges: g.edges,
        }
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph(n={}, edges={:?})", self.n, self.edges)
    }
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges and out-of-range endpoints.
    pub fn new<I>(vertex_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); vertex_count];
        let mut list = Vec::new();
        for (u, v) in edges {
            let token = format!("{u} {v}");
            if u == v {
                return Err(Error::parse(token, "self-loop"));
            }
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::parse(
                    token,
                    format!("endpoint out of range for {vertex_count} vertices"),
                ));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            list.push((a, b));
            adj[a].push(b);
            adj[b].push(a);
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::parse(
                format!("{} {}", w[0].0, w[0].1),
                "duplicate edge",
            ));
        }
        for nb in &mut adj {
            nb.sort_unstable();
        }
        Ok(Graph {
            n: vertex_count,
            edges: list,
            adj,
        })
    }

    /// Graph without edges.
    pub fn empty(vertex_count: usize) -> Self {
        Graph {
            n: vertex_count,
            edges: Vec::new(),
            adj: vec![Vec::new(); vertex_count],
        }
    }

    pub fn cycle(l: usize) -> Result<Self> {
        if l < 3 {
            return Err(Error::domain(format!("cycle length must be >= 3, got {l}")));
        }
        Graph::new(l, (0..l).map(|i| (i, (i + 1) % l)))
    }

    pub fn clique(k: usize) -> Self {
        let edges = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j)));
        Graph::new(k, edges).expect("clique edges are simple")
    }

    /// `K_{1,k}`: center 0 joined to leaves `1..=k`.
    pub fn star(k: usize) -> Self {
        Graph::new(k + 1, (1..=k).map(|j| (0, j))).expect("star edges are simple")
    }

    /// Path on `k` vertices.
    pub fn path(k: usize) -> Self {
        Graph::new(k, (1..k).map(|j| (j - 1, j))).expect("path edges are simple")
    }

    pub fn complete_bipartite(a: usize, b: usize) -> Self {
        let edges = (0..a).flat_map(|i| (0..b).map(move |j| (i, a + j)));
        Graph::new(a + b, edges).expect("bipartite edges are simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, lexicographically sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// True when every vertex has the same degree (vacuously for `n = 0`).
    pub fn is_regular(&self) -> bool {
        self.max_degree() == self.min_degree()
    }

    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        self.components().len() == 1
    }

    /// Vertex sets of the connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Subgraph induced on `vertices`, relabeled `0..vertices.len()` in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut index = vec![usize::MAX; self.n];
        for (i, &v) in vertices.iter().enumerate() {
            index[v] = i;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(u, v)| index[u] != usize::MAX && index[v] != usize::MAX)
            .map(|&(u, v)| (index[u], index[v]));
        Graph::new(vertices.len(), edges).expect("induced subgraph of a simple graph is simple")
    }

    /// Neighborhood bitmasks; only meaningful for `vertex_count <= 64`.
    pub(crate) fn masks(&self) -> Vec<u64> {
        debug_assert!(self.n <= 64);
        self.adj
            .iter()
            .map(|nb| nb.iter().fold(0u64, |m, &w| m | (1 << w)))
            .collect()
    }

    /// Edge-list text, one `u v` per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for &(u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }
}

/// Parses an edge list (`u v` per line, `#` comments) or a named spec:
/// `cycle:l`, `clique:k`, `star:k`, `path:k`, `complete_bipartite:a:b`.
///
/// In edge-list form the vertex count is one more than the largest endpoint.
pub fn parse_graph(text: &str) -> Result<Graph> {
    let trimmed = text.trim();
    if let Some((name, rest)) = trimmed.split_once(':') {
        if !trimmed.contains(char::is_whitespace) {
            return parse_named(name, rest);
        }
    }
    if !trimmed.is_empty()
        && !trimmed.contains(char::is_whitespace)
        && trimmed.chars().next().is_some_and(|c| c.is_alphabetic())
    {
        return Err(Error::parse(trimmed, "unknown graph spec"));
    }

    let mut edges = Vec::new();
    let mut n = 0;
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(Error::parse(line, "expected two vertex indices")),
        };
        let u: usize = a
            .parse()
            .map_err(|_| Error::parse(a, "not a nonnegative integer"))?;
        let v: usize = b
            .parse()
            .map_err(|_| Error::parse(b, "not a nonnegative integer"))?;
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    Graph::new(n, edges)
}

fn parse_named(name: &str, rest: &str) -> Result<Graph> {
    let arg = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::parse(s, "expected a nonnegative integer"))
    };
    match name {
        "cycle" => Graph::cycle(arg(rest)?),
        "clique" => Ok(Graph::clique(arg(rest)?)),
        "star" => Ok(Graph::star(arg(rest)?)),
        "path" => Ok(Graph::path(arg(rest)?)),
        "complete_bipartite" => {
            let (a, b) = rest
                .split_once(':')
                .ok_or_else(|| Error::parse(rest, "expected a:b"))?;
            Ok(Graph::complete_bipartite(arg(a)?, arg(b)?))
        }
        other => Err(Error::parse(other, "unknown graph spec name")),
    }
}

/// Result of 2-core peeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoCore {
    pub graph: Graph,
    /// `original[i]` is the vertex of the input graph relabeled to `i`.
    pub original: Vec<usize>,
}

/// Repeatedly deletes vertices of degree at most one. Trees map to the empty graph.
pub fn two_core(h: &Graph) -> TwoCore {
    let n = h.vertex_count();
    let mut deg = h.degrees();
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| deg[v] <= 1).collect();
    while let Some(v) = stack.pop() {
        if removed[v] {
            continue;
        }
        removed[v] = true;
        for &w in h.neighbors(v) {
            if !removed[w] {
                deg[w] -= 1;
                if deg[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    let original: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    TwoCore {
        graph: h.induced(&original),
        original,
    }
}

/// `½ · max over edges of deg(u) + deg(v)`.
pub fn delta_star(h: &Graph) -> Result<Rational> {
    h.edges()
        .iter()
        .map(|&(u, v)| (h.degree(u) + h.degree(v)) as i64)
        .max()
        .map(|m| Rational::new(m, 2))
        .ok_or_else(|| Error::domain("delta_star needs at least one edge"))
}

/// Subgraph induced on the vertices of maximum degree.
pub fn h_star(h: &Graph) -> Graph {
    let top = h.max_degree();
    let keep: Vec<usize> = (0..h.vertex_count())
        .filter(|&v| h.degree(v) == top)
        .collect();
    h.induced(&keep)
}

/// `Σ_k c_k x^k` where `c_k` counts independent sets of size `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependencePolynomial {
    pub coefficients: Vec<u64>,
}

impl IndependencePolynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x + c as f64)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, &c)| acc * x + (k as u64 * c) as f64)
    }

    /// Total number of independent sets (the value at 1).
    pub fn total(&self) -> u64 {
        self.coefficients.iter().sum()
    }
}

fn check_cap(h: &Graph, cap: usize, what: &str) -> Result<()> {
    if h.vertex_count() > cap {
        return Err(Error::Resource(format!(
            "{what}: {} vertices exceeds enumeration cap {cap}",
            h.vertex_count()
        )));
    }
    Ok(())
}

fn independent_masks(h: &Graph) -> Vec<u32> {
    let masks = h.masks();
    let n = h.vertex_count();
    (0u32..(1u32 << n))
        .filter(|&s| {
            (0..n).all(|v| s & (1 << v) == 0 || masks[v] & u64::from(s) == 0)
        })
        .collect()
}

pub fn independence_polynomial(h: &Graph) -> Result<IndependencePolynomial> {
    independence_polynomial_capped(h, ENUMERATION_CAP)
}

pub fn independence_polynomial_capped(h: &Graph, cap: usize) -> Result<IndependencePolynomial> {
    check_cap(h, cap, "independence_polynomial")?;
    let mut coefficients = vec![0u64; h.vertex_count() + 1];
    for s in independent_masks(h) {
        coefficients[s.count_ones() as usize] += 1;
    }
    while coefficients.len() > 1 && *coefficients.last().unwrap() == 0 {
        coefficients.pop();
    }
    Ok(IndependencePolynomial { coefficients })
}

/// All independent sets, empty set included, ordered by size then lexicographically.
pub fn independent_sets(h: &Graph) -> Result<Vec<Vec<usize>>> {
    check_cap(h, ENUMERATION_CAP, "independent_sets")?;
    let mut sets: Vec<Vec<usize>> = independent_masks(h)
        .into_iter()
        .map(|s| (0..h.vertex_count()).filter(|&v| s & (1 << v) != 0).collect())
        .collect();
    sets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(sets)
}

/// Exponent `f(H)` bounding the regular-ensemble rate growth for irregular `H`:
///
/// ```text
/// max_F 2e_F/v_F  ∨  max_{S∩S'=∅, v_S' > v_S ≥ 1} 1 + (e_{S∪S'} − e_S' − v_S') / v_S
/// ```
///
/// `e_A` counts edges with both endpoints in `A`. Cost is `3^v`.
pub fn f_exponent(h: &Graph) -> Result<Rational> {
    check_cap(h, ENUMERATION_CAP, "f_exponent")?;
    let n = h.vertex_count();
    if n == 0 || h.min_degree() < 2 {
        return Err(Error::domain(
            "f_exponent needs minimum degree >= 2; reduce to the 2-core first",
        ));
    }
    let full = (1u32 << n) - 1;
    let inside = edges_inside_table(h);

    let mut best = Rational::from_integer(0);
    for f in 1..=full {
        let cand = Rational::new(2 * inside[f as usize] as i64, f.count_ones() as i64);
        best = best.max(cand);
    }

    for s_prime in 1..=full {
        let vp = s_prime.count_ones();
        if vp < 2 {
            continue;
        }
        let ep = inside[s_prime as usize] as i64;
        let rest = full & !s_prime;
        // nonempty submasks of the complement
        let mut s = rest;
        while s != 0 {
            let vs = s.count_ones();
            if vs < vp {
                let union = inside[(s | s_prime) as usize] as i64;
                let cand = Rational::from_integer(1)
                    + Rational::new(union - ep - vp as i64, vs as i64);
                best = best.max(cand);
            }
            s = (s - 1) & rest;
        }
    }
    Ok(best)
}

/// `inside[mask]` = number of edges with both endpoints in `mask`.
fn edges_inside_table(h: &Graph) -> Vec<u16> {
    let n = h.vertex_count();
    let masks = h.masks();
    let mut table = vec![0u16; 1 << n];
    for mask in 1usize..(1 << n) {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        table[mask] = table[rest] + (masks[low] & rest as u64).count_ones() as u16;
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Graph {
        Graph::new(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    #[test]
    fn named_specs() {
        let k3 = parse_graph("cycle:3").unwrap();
        assert_eq!((k3.vertex_count(), k3.edge_count()), (3, 3));
        assert_eq!(parse_graph("clique:4").unwrap().edge_count(), 6);
        assert_eq!(parse_graph("star:3").unwrap().max_degree(), 3);
        assert_eq!(parse_graph("path:4").unwrap().edge_count(), 3);
        let kab = parse_graph("complete_bipartite:2:3").unwrap();
        assert_eq!((kab.vertex_count(), kab.edge_count()), (5, 6));
    }

    #[test]
    fn edge_list_parsing() {
        let g = parse_graph("0 1\n1 2").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let g = parse_graph("# comment\n\n0 1\n  \n").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn parse_errors_name_the_token() {
        match parse_graph("0 0") {
            Err(Error::Parse { token, reason }) => {
                assert_eq!(token, "0 0");
                assert!(reason.contains("self-loop"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_graph("0 1\n1 0") {
            Err(Error::Parse { reason, .. }) => assert!(reason.contains("duplicate")),
            other => panic!("unexpected {other:?}"),
        }
        match parse_graph("0 x") {
            Err(Error::Parse { token, .. }) => assert_eq!(token, "x"),
            other => panic!("unexpected {other:?}"),
        }
        match parse_graph("wheel:5") {
            Err(Error::Parse { token, .. }) => assert_eq!(token, "wheel"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_graph("0 1 2").is_err());
        assert!(parse_graph("petersen").is_err());
    }

    #[test]
    fn two_core_examples() {
        let k3 = Graph::clique(3);
        assert_eq!(two_core(&k3).graph, k3);
        assert_eq!(two_core(&Graph::path(4)).graph.vertex_count(), 0);

        // K3 plus pendant vertex 3 hanging off vertex 1
        let g = Graph::new(4, [(0, 1), (1, 2), (0, 2), (1, 3)]).unwrap();
        let core = two_core(&g);
        assert_eq!(core.graph, k3);
        assert_eq!(core.original, vec![0, 1, 2]);

        // a long tail peels completely
        let g = Graph::new(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5)]).unwrap();
        assert_eq!(two_core(&g).original, vec![0, 1, 2]);
    }

    #[test]
    fn delta_star_examples() {
        assert_eq!(delta_star(&Graph::clique(3)).unwrap(), Rational::from_integer(2));
        assert_eq!(delta_star(&Graph::star(3)).unwrap(), Rational::from_integer(2));
        assert_eq!(delta_star(&Graph::cycle(5).unwrap()).unwrap(), Rational::from_integer(2));
        assert_eq!(delta_star(&Graph::star(2)).unwrap(), Rational::new(3, 2));
        assert!(matches!(delta_star(&Graph::empty(3)), Err(Error::Domain(_))));
    }

    #[test]
    fn h_star_examples() {
        assert_eq!(h_star(&Graph::clique(3)), Graph::clique(3));
        let hs = h_star(&Graph::star(2));
        assert_eq!((hs.vertex_count(), hs.edge_count()), (1, 0));
        let c4 = Graph::cycle(4).unwrap();
        assert_eq!(h_star(&c4), c4);
        // diamond: the two degree-3 vertices are adjacent
        let hs = h_star(&diamond());
        assert_eq!((hs.vertex_count(), hs.edge_count()), (2, 1));
    }

    #[test]
    fn independence_polynomial_examples() {
        let ip = |g: &Graph| independence_polynomial(g).unwrap().coefficients;
        assert_eq!(ip(&Graph::clique(3)), vec![1, 3]);
        assert_eq!(ip(&Graph::empty(1)), vec![1, 1]);
        assert_eq!(ip(&Graph::cycle(4).unwrap()), vec![1, 4, 2]);
        assert_eq!(ip(&Graph::empty(0)), vec![1]);
        assert!(matches!(
            independence_polynomial_capped(&Graph::empty(5), 4),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn independent_set_listing() {
        assert_eq!(
            independent_sets(&Graph::clique(3)).unwrap(),
            vec![vec![], vec![0], vec![1], vec![2]]
        );
        assert_eq!(independent_sets(&Graph::empty(2)).unwrap().len(), 4);
        let c4 = independent_sets(&Graph::cycle(4).unwrap()).unwrap();
        assert_eq!(c4.len(), 7);
        assert_eq!(c4[5..], [vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn f_exponent_examples() {
        assert_eq!(f_exponent(&Graph::clique(3)).unwrap(), Rational::from_integer(2));
        assert_eq!(f_exponent(&Graph::clique(4)).unwrap(), Rational::from_integer(3));
        assert_eq!(f_exponent(&diamond()).unwrap(), Rational::new(5, 2));
        assert!(f_exponent(&Graph::path(3)).is_err());
    }

    /// Independent re-derivation of f(H) over explicit vertex lists.
    fn f_exponent_oracle(h: &Graph) -> f64 {
        let n = h.vertex_count();
        let e_in = |set: &[usize]| {
            h.edges()
                .iter()
                .filter(|(u, v)| set.contains(u) && set.contains(v))
                .count() as f64
        };
        let mut best = 0.0f64;
        // label each vertex 0 (unused), 1 (in S), 2 (in S')
        let mut labels = vec![0usize; n];
        loop {
            let s: Vec<usize> = (0..n).filter(|&v| labels[v] == 1).collect();
            let sp: Vec<usize> = (0..n).filter(|&v| labels[v] == 2).collect();
            let f: Vec<usize> = (0..n).filter(|&v| labels[v] != 0).collect();
            if !f.is_empty() {
                best = best.max(2.0 * e_in(&f) / f.len() as f64);
            }
            if !s.is_empty() && sp.len() > s.len() {
                let u: Vec<usize> = s.iter().chain(&sp).copied().collect();
                best = best.max(1.0 + (e_in(&u) - e_in(&sp) - sp.len() as f64) / s.len() as f64);
            }
            let mut i = 0;
            while i < n && labels[i] == 2 {
                labels[i] = 0;
                i += 1;
            }
            if i == n {
                break;
            }
            labels[i] += 1;
        }
        best
    }

    #[test]
    fn f_exponent_matches_label_oracle() {
        let graphs = [
            Graph::clique(3),
            Graph::clique(4),
            Graph::clique(5),
            diamond(),
            Graph::cycle(5).unwrap(),
            Graph::complete_bipartite(2, 3),
            Graph::new(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)]).unwrap(),
        ];
        for g in &graphs {
            let f = f_exponent(g).unwrap();
            let exact = *f.numer() as f64 / *f.denom() as f64;
            assert!((exact - f_exponent_oracle(g)).abs() < 1e-12, "{g:?}");
            // F = V term
            assert!(f >= Rational::new(2 * g.edge_count() as i64, g.vertex_count() as i64));
        }
    }

    #[test]
    fn regular_graphs_are_their_own_h_star() {
        for g in [Graph::clique(4), Graph::cycle(6).unwrap(), Graph::complete_bipartite(3, 3)] {
            assert_eq!(h_star(&g), g);
        }
    }

    #[test]
    fn serde_roundtrip_validates() {
        let g = Graph::cycle(4).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(serde_json::from_str::<Graph>(&json).unwrap(), g);
        assert!(serde_json::from_str::<Graph>(r#"{"vertex_count":2,"edges":[[0,0]]}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
            (1..=max_n).prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> =
                    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
                let m = pairs.len();
                proptest::collection::vec(any::<bool>(), m).prop_map(move |bits| {
                    let edges = pairs.iter().zip(&bits).filter(|(_, &b)| b).map(|(&e, _)| e);
                    Graph::new(n, edges).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn two_core_is_idempotent(g in arb_graph(9)) {
                let once = two_core(&g).graph;
                let twice = two_core(&once).graph;
                prop_assert_eq!(&once, &twice);
                prop_assert!(once.vertex_count() == 0 || once.min_degree() >= 2);
            }

            #[test]
            fn independence_polynomial_counts_sets(g in arb_graph(10)) {
                let p = independence_polynomial(&g).unwrap();
                let sets = independent_sets(&g).unwrap();
                prop_assert_eq!(p.total() as usize, sets.len());
                prop_assert_eq!(p.eval(0.0), 1.0);
                prop_assert_eq!(p.eval(1.0), sets.len() as f64);
                prop_assert_eq!(p.coefficients[1] as usize, g.vertex_count());
                prop_assert!(p.eval(0.7) < p.eval(0.8));
            }
        }
    }
}
