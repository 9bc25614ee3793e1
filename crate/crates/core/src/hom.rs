//! Homomorphism counts `Hom(H, G)` and weighted densities `t(H, X)`.
//!
//! Three engines evaluate the same sum over all maps `φ: V(H) → [n]`:
//!
//! * a brute-force nested loop over all `n^v` maps (the reference oracle),
//! * a backtracking enumerator that only follows edges of a 0/1 graph,
//! * variable elimination along a min-degree ordering of `H`, i.e. dynamic
//!   programming over the tree decomposition that ordering induces. Its
//!   intermediate tables have `n^{|bag| - 1}` entries, so the width is capped.
//!
//! Block-constant matrices get a separate closed form ([`hom_density_blocks`])
//! that never materializes the `n × n` matrix.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::SymMatrix;

/// Largest pattern handled by the brute-force and backtracking engines.
pub const BRUTE_FORCE_MAX_VERTICES: usize = 10;

/// Largest elimination width (bag size minus one) accepted by the DP engine.
pub const MAX_WIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Auto,
    BruteForce,
    /// Neighbor-following enumeration; for weighted input this is the brute force.
    Backtrack,
    TreeDecomposition,
}

/// Semiring element for the engines: exact integers or floats.
trait Weight: Copy + PartialEq + Send + Sync {
    type Acc;
    const ZERO: Self;
    const ONE: Self;
    fn mul(self, other: Self) -> Self;
    fn from_usize(n: usize) -> Self;
    fn acc() -> Self::Acc;
    fn add(acc: &mut Self::Acc, x: Self);
    fn total(acc: &Self::Acc) -> Self;
}

impl Weight for u128 {
    type Acc = u128;
    const ZERO: Self = 0;
    const ONE: Self = 1;
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn from_usize(n: usize) -> Self {
        n as u128
    }
    fn acc() -> u128 {
        0
    }
    fn add(acc: &mut u128, x: Self) {
        *acc += x;
    }
    fn total(acc: &u128) -> Self {
        *acc
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl Weight for f64 {
    type Acc = KahanSum;
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn mul(self, other: Self) -> Self {
        self * other
    }
    fn from_usize(n: usize) -> Self {
        n as f64
    }
    fn acc() -> KahanSum {
        KahanSum::default()
    }
    fn add(acc: &mut KahanSum, x: Self) {
        acc.add(x);
    }
    fn total(acc: &KahanSum) -> Self {
        acc.value()
    }
}

/// Labeled homomorphisms `H → G` (maps, not necessarily injective).
pub fn hom_count(h: &Graph, g: &Graph) -> Result<u128> {
    hom_count_with(h, g, Engine::Auto)
}

pub fn hom_count_with(h: &Graph, g: &Graph, engine: Engine) -> Result<u128> {
    let n = g.vertex_count();
    let engine = match engine {
        Engine::Auto if h.vertex_count() <= BRUTE_FORCE_MAX_VERTICES => Engine::Backtrack,
        Engine::Auto => Engine::TreeDecomposition,
        e => e,
    };
    match engine {
        Engine::Backtrack => {
            check_brute_cap(h)?;
            Ok(backtrack_count(h, g))
        }
        Engine::BruteForce => {
            check_brute_cap(h)?;
            let w = dense_adjacency(g);
            Ok(brute_force(h, n, &w))
        }
        Engine::TreeDecomposition => {
            let w = dense_adjacency(g);
            Ok(contract(h, n, &w, &[])?.table[0])
        }
        Engine::Auto => unreachable!(),
    }
}

fn dense_adjacency(g: &Graph) -> Vec<u128> {
    let n = g.vertex_count();
    let mut w = vec![0u128; n * n];
    for &(u, v) in g.edges() {
        w[u * n + v] = 1;
        w[v * n + u] = 1;
    }
    w
}

fn check_brute_cap(h: &Graph) -> Result<()> {
    if h.vertex_count() > BRUTE_FORCE_MAX_VERTICES {
        return Err(Error::Resource(format!(
            "brute force limited to {BRUTE_FORCE_MAX_VERTICES} pattern vertices, got {}",
            h.vertex_count()
        )));
    }
    Ok(())
}

/// Below this size the elimination engines are as fast as dense products.
const CYCLE_FAST_PATH_MIN_N: usize = 16;

/// `Some(l)` when `h` is the cycle `C_l`.
fn cycle_length(h: &Graph) -> Option<usize> {
    let v = h.vertex_count();
    (v >= 3 && h.edge_count() == v && h.degrees().iter().all(|&d| d == 2) && h.is_connected())
        .then_some(v)
}

fn matrix_power(x: &SymMatrix, k: usize) -> nalgebra::DMatrix<f64> {
    let m = x.to_nalgebra();
    let mut out = m.clone();
    for _ in 1..k {
        out = &out * &m;
    }
    out
}

/// `t(H, X) = n^{-v} Σ_φ Π_{(k,l)∈E(H)} x_{φ(k)φ(l)}`.
pub fn hom_density_t(h: &Graph, x: &SymMatrix) -> Result<f64> {
    hom_density_with(h, x, Engine::Auto)
}

pub fn hom_density_with(h: &Graph, x: &SymMatrix, engine: Engine) -> Result<f64> {
    let n = x.n();
    let v = h.vertex_count();
    if engine == Engine::Auto && n >= CYCLE_FAST_PATH_MIN_N {
        if let Some(l) = cycle_length(h) {
            let walks = matrix_power(x, l - 1);
            let m = x.to_nalgebra();
            return Ok(walks.component_mul(&m).sum() / (n as f64).powi(v as i32));
        }
    }
    let sum = match pick_weighted_engine(h, n, engine)? {
        Engine::BruteForce | Engine::Backtrack => brute_force(h, n, x.as_slice()),
        Engine::TreeDecomposition => contract(h, n, x.as_slice(), &[])?.table[0],
        Engine::Auto => unreachable!(),
    };
    Ok(sum / (n as f64).powi(v as i32))
}

fn pick_weighted_engine(h: &Graph, n: usize, engine: Engine) -> Result<Engine> {
    if engine != Engine::Auto {
        if matches!(engine, Engine::BruteForce | Engine::Backtrack) {
            check_brute_cap(h)?;
        }
        return Ok(engine);
    }
    let plan = plan_elimination(h, &[]);
    let brute_cost = (n as f64).powi(h.vertex_count() as i32);
    if plan.width <= MAX_WIDTH && plan.cost(n) < brute_cost {
        Ok(Engine::TreeDecomposition)
    } else if h.vertex_count() <= BRUTE_FORCE_MAX_VERTICES {
        Ok(Engine::BruteForce)
    } else {
        Err(Error::Resource(format!(
            "pattern with {} vertices and elimination width {} exceeds both caps",
            h.vertex_count(),
            plan.width
        )))
    }
}

/// `hom(H, X) = t(H, X) / p^{e(H)}`, switching to logs when `p^e` underflows.
pub fn hom_normalized(h: &Graph, x: &SymMatrix, p: f64) -> Result<f64> {
    check_p(p)?;
    let t = hom_density_t(h, x)?;
    Ok(normalize_density(t, p, h.edge_count()))
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(())
}

pub(crate) fn normalize_density(t: f64, p: f64, edges: usize) -> f64 {
    let scale = p.powi(edges as i32);
    if scale >= 1e-300 {
        t / scale
    } else if t <= 0.0 {
        t
    } else {
        (t.ln() - edges as f64 * p.ln()).exp()
    }
}

/// `(np)^{-l} Σ_i λ_i^l` over the eigenvalues of `X`; equals `hom(C_l, X)`.
pub fn cycle_hom_spectral(l: usize, x: &SymMatrix, p: f64) -> Result<f64> {
    if l < 3 {
        return Err(Error::domain(format!("cycle length must be >= 3, got {l}")));
    }
    check_p(p)?;
    let n = x.n();
    if n == 0 {
        return Ok(0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(x.to_nalgebra());
    if eig.eigenvalues.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("eigen-decomposition produced non-finite values".into()));
    }
    let scale = n as f64 * p;
    let mut acc = KahanSum::default();
    for &lambda in eig.eigenvalues.iter() {
        acc.add((lambda / scale).powi(l as i32));
    }
    Ok(acc.value())
}

/// `∂t(H, X)/∂x_uv` with `x_uv = x_vu` treated as a single variable.
///
/// For each edge `(k, l)` of `H` the remaining edges are contracted with `k`
/// and `l` pinned, giving the matrix of partial sums over maps sending the
/// edge onto `{u, v}` in either orientation.
pub fn hom_gradient(h: &Graph, x: &SymMatrix) -> Result<SymMatrix> {
    let n = x.n();
    let v = h.vertex_count();
    if n >= CYCLE_FAST_PATH_MIN_N {
        if let Some(l) = cycle_length(h) {
            // each of the l edges lands on {u, v} in two orientations
            let walks = matrix_power(x, l - 1);
            let scale = 2.0 * l as f64 / (n as f64).powi(v as i32);
            return Ok(SymMatrix::from_fn(n, |i, j| scale * walks[(i, j)]));
        }
    }
    let mut acc = vec![0.0; n * n];
    for (idx, &(k, l)) in h.edges().iter().enumerate() {
        let rest = h
            .edges()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != idx)
            .map(|(_, &e)| e);
        let reduced = Graph::new(v, rest).expect("subgraph of a simple graph");
        let pinned = contract(&reduced, n, x.as_slice(), &[k, l])?;
        for (a, val) in acc.iter_mut().zip(&pinned.table) {
            *a += val;
        }
    }
    let norm = (n as f64).powi(v as i32);
    Ok(SymMatrix::from_fn(n, |i, j| {
        (acc[i * n + j] + acc[j * n + i]) / norm
    }))
}

/// Reference oracle: every map `[v] → [n]`, pruned only on zero products.
fn brute_force<W: Weight>(h: &Graph, n: usize, w: &[W]) -> W {
    let v = h.vertex_count();
    let back: Vec<Vec<usize>> = (0..v)
        .map(|k| h.neighbors(k).iter().copied().filter(|&j| j < k).collect())
        .collect();
    let mut phi = vec![0usize; v];
    let mut acc = W::acc();

    fn rec<W: Weight>(
        k: usize,
        partial: W,
        n: usize,
        w: &[W],
        back: &[Vec<usize>],
        phi: &mut [usize],
        acc: &mut W::Acc,
    ) {
        if k == phi.len() {
            W::add(acc, partial);
            return;
        }
        for a in 0..n {
            let mut prod = partial;
            for &j in &back[k] {
                prod = prod.mul(w[phi[j] * n + a]);
            }
            if prod == W::ZERO {
                continue;
            }
            phi[k] = a;
            rec(k + 1, prod, n, w, back, phi, acc);
        }
    }

    rec(0, W::ONE, n, w, &back, &mut phi, &mut acc);
    W::total(&acc)
}

/// Counts per connected component of `H`, following edges of `G` from a BFS parent.
fn backtrack_count(h: &Graph, g: &Graph) -> u128 {
    let n = g.vertex_count();
    let mut total: u128 = 1;
    for comp in h.components() {
        if comp.len() == 1 {
            total *= n as u128;
            continue;
        }
        // BFS order with parent pointers
        let mut order = vec![comp[0]];
        let mut pos = vec![usize::MAX; h.vertex_count()];
        pos[comp[0]] = 0;
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            for &w in h.neighbors(u) {
                if pos[w] == usize::MAX {
                    pos[w] = order.len();
                    order.push(w);
                }
            }
            i += 1;
        }
        // for each position: parent position and the other earlier neighbors
        let steps: Vec<(usize, Vec<usize>)> = order
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &u)| {
                let mut earlier: Vec<usize> = h
                    .neighbors(u)
                    .iter()
                    .map(|&w| pos[w])
                    .filter(|&p| p < k)
                    .collect();
                earlier.sort_unstable();
                let parent = earlier.remove(0);
                (parent, earlier)
            })
            .collect();

        fn rec(k: usize, steps: &[(usize, Vec<usize>)], g: &Graph, phi: &mut Vec<usize>) -> u128 {
            if k > steps.len() {
                return 1;
            }
            let (parent, ref others) = steps[k - 1];
            let mut count = 0;
            for &a in g.neighbors(phi[parent]) {
                if others.iter().all(|&j| g.has_edge(phi[j], a)) {
                    phi.push(a);
                    count += rec(k + 1, steps, g, phi);
                    phi.pop();
                }
            }
            count
        }

        let mut count: u128 = 0;
        let mut phi = Vec::with_capacity(order.len());
        for a in 0..n {
            phi.push(a);
            count += rec(1, &steps, g, &mut phi);
            phi.pop();
        }
        total *= count;
    }
    total
}

/// Elimination ordering chosen by the min-degree heuristic.
#[derive(Debug, Clone)]
struct Plan {
    order: Vec<usize>,
    /// Sizes of the new factor scopes created by each elimination.
    scopes: Vec<usize>,
    width: usize,
}

impl Plan {
    fn cost(&self, n: usize) -> f64 {
        self.scopes
            .iter()
            .map(|&s| (n as f64).powi(s as i32 + 1))
            .sum()
    }
}

fn plan_elimination(h: &Graph, free: &[usize]) -> Plan {
    let v = h.vertex_count();
    let mut nb: Vec<Vec<bool>> = vec![vec![false; v]; v];
    for &(a, b) in h.edges() {
        nb[a][b] = true;
        nb[b][a] = true;
    }
    let mut alive: Vec<bool> = (0..v).map(|u| !free.contains(&u)).collect();
    let mut present = vec![true; v];
    let mut order = Vec::new();
    let mut scopes = Vec::new();
    while let Some(u) = (0..v)
        .filter(|&u| alive[u])
        .min_by_key(|&u| (0..v).filter(|&w| present[w] && nb[u][w]).count())
    {
        let neigh: Vec<usize> = (0..v).filter(|&w| present[w] && nb[u][w]).collect();
        for &a in &neigh {
            for &b in &neigh {
                if a != b {
                    nb[a][b] = true;
                }
            }
        }
        alive[u] = false;
        present[u] = false;
        order.push(u);
        scopes.push(neigh.len());
    }
    let width = scopes.iter().copied().max().unwrap_or(0);
    Plan {
        order,
        scopes,
        width,
    }
}

/// Dense table over the assignments of `scope` (mixed radix `n`, first variable most significant).
struct Factor<'a, W: Clone> {
    scope: Vec<usize>,
    table: Cow<'a, [W]>,
}

struct Contracted<W> {
    table: Vec<W>,
}

/// Sums out every vertex of `H` outside `free`, leaving a table indexed by the
/// values of `free` in the given order.
fn contract<W: Weight>(h: &Graph, n: usize, w: &[W], free: &[usize]) -> Result<Contracted<W>> {
    let plan = plan_elimination(h, free);
    if plan.width > MAX_WIDTH {
        return Err(Error::Resource(format!(
            "elimination width {} exceeds cap {MAX_WIDTH}",
            plan.width
        )));
    }
    let mut factors: Vec<Factor<W>> = h
        .edges()
        .iter()
        .map(|&(a, b)| Factor {
            scope: vec![a, b],
            table: Cow::Borrowed(w),
        })
        .collect();
    let mut scalar = W::ONE;

    for &u in &plan.order {
        let (with_u, rest): (Vec<_>, Vec<_>) =
            factors.into_iter().partition(|f| f.scope.contains(&u));
        factors = rest;
        if with_u.is_empty() {
            scalar = scalar.mul(W::from_usize(n));
            continue;
        }
        let mut scope: Vec<usize> = with_u
            .iter()
            .flat_map(|f| f.scope.iter().copied())
            .filter(|&x| x != u)
            .collect();
        scope.sort_unstable();
        scope.dedup();
        let table = sum_out(&with_u, &scope, u, n);
        factors.push(Factor {
            scope,
            table: Cow::Owned(table),
        });
    }

    // multiply what is left into a table over `free`
    let k = free.len();
    let size = n.pow(k as u32);
    let layouts: Vec<Vec<usize>> = factors
        .iter()
        .map(|f| strides_for(&f.scope, free, n))
        .collect();
    let mut table = vec![W::ZERO; size];
    let mut digits = vec![0usize; k];
    for (idx, slot) in table.iter_mut().enumerate() {
        decode(idx, n, &mut digits);
        let mut prod = scalar;
        for (f, strides) in factors.iter().zip(&layouts) {
            let off: usize = strides.iter().zip(&digits).map(|(s, d)| s * d).sum();
            prod = prod.mul(f.table[off]);
        }
        *slot = prod;
    }
    Ok(Contracted { table })
}

/// For each variable of `target`, the stride it contributes to an index into a factor over `scope`.
fn strides_for(scope: &[usize], target: &[usize], n: usize) -> Vec<usize> {
    let len = scope.len();
    target
        .iter()
        .map(|var| match scope.iter().position(|s| s == var) {
            Some(p) => n.pow((len - 1 - p) as u32),
            None => 0,
        })
        .collect()
}

fn decode(mut idx: usize, n: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = idx % n;
        idx /= n;
    }
}

fn sum_out<W: Weight>(factors: &[Factor<W>], scope: &[usize], u: usize, n: usize) -> Vec<W> {
    let k = scope.len();
    let size = n.pow(k as u32);
    let layouts: Vec<Vec<usize>> = factors.iter().map(|f| strides_for(&f.scope, scope, n)).collect();
    let u_strides: Vec<usize> = factors
        .iter()
        .map(|f| strides_for(&f.scope, &[u], n)[0])
        .collect();
    let mut out = vec![W::ZERO; size];
    let mut digits = vec![0usize; k];
    let mut bases = vec![0usize; factors.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        decode(idx, n, &mut digits);
        for (b, strides) in bases.iter_mut().zip(&layouts) {
            *b = strides.iter().zip(&digits).map(|(s, d)| s * d).sum();
        }
        let mut acc = W::acc();
        for a in 0..n {
            let mut prod = W::ONE;
            for ((f, &b), &s) in factors.iter().zip(&bases).zip(&u_strides) {
                prod = prod.mul(f.table[b + a * s]);
                if prod == W::ZERO {
                    break;
                }
            }
            W::add(&mut acc, prod);
        }
        *slot = W::total(&acc);
    }
    out
}

/// Counts of partitions of each vertex subset of `H` into `j` nonempty independent sets,
/// so that the proper colorings of `H[S]` with `s` colors number `Σ_j a_j(S) (s)_j`.
fn independent_partition_counts(h: &Graph) -> Vec<Vec<f64>> {
    let v = h.vertex_count();
    let masks = h.masks();
    let independent = |s: usize| (0..v).all(|x| s & (1 << x) == 0 || masks[x] & s as u64 == 0);
    let mut table: Vec<Vec<f64>> = vec![vec![0.0; v + 1]; 1 << v];
    table[0][0] = 1.0;
    for s in 1usize..(1 << v) {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        // blocks containing the lowest vertex
        let mut sub = rest;
        loop {
            let block = sub | low;
            if independent(block) {
                let remaining = s ^ block;
                for j in 1..=v {
                    let prev = table[remaining][j - 1];
                    if prev != 0.0 {
                        table[s][j] += prev;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    table
}

fn falling(s: usize, j: usize) -> f64 {
    (0..j).map(|i| s.saturating_sub(i) as f64).product()
}

/// `t(H, X)` for `X` constant on the blocks of a partition of `[n]` (zero diagonal).
///
/// Sums over block assignments `σ` of `V(H)`; vertices sharing a block must
/// avoid coinciding along edges, which is a proper-coloring count of the
/// induced subgraph with `size_b` colors.
pub fn hom_density_blocks(h: &Graph, sizes: &[usize], values: &[Vec<f64>]) -> Result<f64> {
    let v = h.vertex_count();
    check_brute_cap(h)?;
    let k = sizes.len();
    if values.len() != k || values.iter().any(|r| r.len() != k) {
        return Err(Error::domain("block values must be k × k"));
    }
    let n: usize = sizes.iter().sum();
    if v == 0 {
        return Ok(1.0);
    }
    if n == 0 {
        return Ok(0.0);
    }
    let parts = independent_partition_counts(h);
    let colorings = |mask: usize, s: usize| -> f64 {
        parts[mask]
            .iter()
            .enumerate()
            .map(|(j, &c)| if c == 0.0 { 0.0 } else { c * falling(s, j) })
            .sum()
    };

    let mut acc = KahanSum::default();
    let mut sigma = vec![0usize; v];
    let total = k.pow(v as u32);
    for code in 0..total {
        let mut c = code;
        for s in sigma.iter_mut() {
            *s = c % k;
            c /= k;
        }
        let mut prod = 1.0;
        for &(a, b) in h.edges() {
            prod *= values[sigma[a]][sigma[b]];
            if prod == 0.0 {
                break;
            }
        }
        if prod == 0.0 {
            continue;
        }
        let mut block_masks = vec![0usize; k];
        for (x, &b) in sigma.iter().enumerate() {
            block_masks[b] |= 1 << x;
        }
        for (b, &mask) in block_masks.iter().enumerate() {
            if mask != 0 {
                prod *= colorings(mask, sizes[b]);
            }
        }
        acc.add(prod);
    }
    Ok(acc.value() / (n as f64).powi(v as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.gen::<f64>() < p)
            .collect();
        Graph::new(n, edges).unwrap()
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> SymMatrix {
        SymMatrix::from_fn(n, |_, _| rng.gen::<f64>())
    }

    #[test]
    fn k2_counts_ordered_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(9, 0.4, &mut rng);
        for e in [Engine::BruteForce, Engine::Backtrack, Engine::TreeDecomposition] {
            assert_eq!(hom_count_with(&Graph::clique(2), &g, e).unwrap(), 2 * g.edge_count() as u128);
        }
    }

    #[test]
    fn small_known_counts() {
        assert_eq!(hom_count(&Graph::clique(3), &Graph::clique(4)).unwrap(), 24);
        assert_eq!(hom_count(&Graph::cycle(4).unwrap(), &Graph::clique(3)).unwrap(), 18);
        // isolated pattern vertices map anywhere
        assert_eq!(hom_count(&Graph::empty(2), &Graph::clique(3)).unwrap(), 9);
        assert_eq!(
            hom_count_with(&Graph::empty(2), &Graph::clique(3), Engine::TreeDecomposition).unwrap(),
            9
        );
    }

    #[test]
    fn caps_are_enforced() {
        let big = Graph::cycle(11).unwrap();
        assert!(matches!(
            hom_count_with(&big, &Graph::clique(3), Engine::BruteForce),
            Err(Error::Resource(_))
        ));
        // cycles have width 2, so the DP still works
        assert_eq!(
            hom_count(&big, &Graph::clique(2)).unwrap(),
            0,
            "odd cycle into an edge"
        );
        assert!(matches!(
            hom_count_with(&Graph::clique(7), &Graph::clique(3), Engine::TreeDecomposition),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn density_of_adjacency_is_normalized_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_graph(10, 0.5, &mut rng);
        let x = SymMatrix::adjacency(&g);
        let h = Graph::cycle(4).unwrap();
        let t = hom_density_t(&h, &x).unwrap();
        let count = hom_count(&h, &g).unwrap() as f64;
        assert!((t - count / 1e4).abs() < 1e-12);
    }

    #[test]
    fn k2_density_is_normalized_entry_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_matrix(7, &mut rng);
        let t = hom_density_t(&Graph::clique(2), &x).unwrap();
        assert!((t - 2.0 * x.upper_sum() / 49.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_density_of_constant_matrix() {
        let x = SymMatrix::constant(100, 0.2);
        let t = hom_density_t(&Graph::clique(3), &x).unwrap();
        let expect = 0.008 * 0.99 * 0.98;
        assert!((t - expect).abs() < 1e-14, "{t} vs {expect}");
        let hom = hom_normalized(&Graph::clique(3), &x, 0.2).unwrap();
        assert!((hom - 0.99 * 0.98).abs() < 1e-12);
        assert!((hom_normalized(&Graph::clique(3), &x, 1.0).unwrap() - t).abs() < 1e-18);
        assert!(hom_normalized(&Graph::clique(3), &x, 0.0).is_err());
        assert!(hom_normalized(&Graph::clique(3), &x, 1.5).is_err());
    }

    #[test]
    fn engines_agree_on_weighted_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_matrix(6, &mut rng);
        for h in [Graph::clique(3), Graph::clique(4), Graph::cycle(5).unwrap(), Graph::star(3)] {
            let a = hom_density_with(&h, &x, Engine::BruteForce).unwrap();
            let b = hom_density_with(&h, &x, Engine::TreeDecomposition).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300), "{h:?}: {a} vs {b}");
        }
    }

    #[test]
    fn log_domain_normalization() {
        // p^e underflows for e = 400 at p = 0.1
        let v = normalize_density(1e-200, 0.1, 400);
        assert!((v.ln() - (-200.0 * 10f64.ln() + 400.0 * 10f64.ln())).abs() < 1e-9);
        assert_eq!(normalize_density(0.0, 0.1, 400), 0.0);
    }

    #[test]
    fn spectral_cycle_examples() {
        let k3 = SymMatrix::adjacency(&Graph::clique(3));
        let v = cycle_hom_spectral(3, &k3, 1.0).unwrap();
        assert!((v - 6.0 / 27.0).abs() < 1e-12);
        assert_eq!(cycle_hom_spectral(4, &SymMatrix::zeros(5), 0.3).unwrap(), 0.0);
        assert!(cycle_hom_spectral(2, &k3, 1.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_matrix(20, &mut rng);
        for l in 3..=6 {
            let a = cycle_hom_spectral(l, &x, 0.5).unwrap();
            let b = hom_normalized(&Graph::cycle(l).unwrap(), &x, 0.5).unwrap();
            assert!((a - b).abs() <= 1e-9 * b.abs(), "l={l}: {a} vs {b}");
        }
    }

    #[test]
    fn gradient_of_k2_and_zero_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_matrix(5, &mut rng);
        let g = hom_gradient(&Graph::clique(2), &x).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 0.0 } else { 2.0 / 25.0 };
                assert!((g.get(i, j) - expect).abs() < 1e-15);
            }
        }
        let z = hom_gradient(&Graph::clique(3), &SymMatrix::zeros(6)).unwrap();
        assert!(z.upper_entries().all(|v| v == 0.0));
    }

    #[test]
    fn block_closed_form_matches_materialized() {
        let sizes = [3usize, 4, 2];
        let values = vec![
            vec![1.0, 0.3, 0.0],
            vec![0.3, 0.5, 0.7],
            vec![0.0, 0.7, 0.2],
        ];
        let mut block = Vec::new();
        for (b, &s) in sizes.iter().enumerate() {
            block.extend(std::iter::repeat(b).take(s));
        }
        let x = SymMatrix::from_fn(9, |i, j| values[block[i]][block[j]]);
        for h in [
            Graph::clique(3),
            Graph::cycle(4).unwrap(),
            Graph::star(3),
            Graph::path(4),
            Graph::clique(4),
            Graph::empty(2),
        ] {
            let a = hom_density_blocks(&h, &sizes, &values).unwrap();
            let b = hom_density_with(&h, &x, Engine::BruteForce).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12), "{h:?}: {a} vs {b}");
        }
    }
}
