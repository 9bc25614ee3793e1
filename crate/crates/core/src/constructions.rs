//! Explicit block-constant matrices that nearly attain the rate constants.
//!
//! Block values are kept as exact rationals, so row sums and total weights
//! can be checked without rounding error even when `n` is far too large to
//! materialize the matrix.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Ensemble, EnsembleSpec};
use crate::error::{Error, Result};
use crate::graph::{f_exponent, Graph, Rational};
use crate::hom::{hom_density_blocks, normalize_density};
use crate::matrix::SymMatrix;
use crate::rate::entropy_ip;

pub type Exact = Ratio<i128>;

/// Denominator used when importing floating-point block values.
const IMPORT_DENOMINATOR: i128 = 1 << 40;

/// Largest `n` that [`BlockSpec::materialize`] will allocate.
pub const MATERIALIZE_CAP: usize = 5000;

fn exact_to_f64(x: &Exact) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn abs(x: Exact) -> Exact {
    if x < Exact::from_integer(0) {
        -x
    } else {
        x
    }
}

fn int(x: usize) -> Exact {
    Exact::from_integer(x as i128)
}

/// Matrix constant on the blocks of a partition of `[n]` into consecutive
/// intervals, with zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockSpecRepr", into = "BlockSpecRepr")]
pub struct BlockSpec {
    sizes: Vec<usize>,
    values: Vec<Vec<Exact>>,
}

#[derive(Serialize, Deserialize)]
struct BlockSpecRepr {
    sizes: Vec<usize>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<BlockSpecRepr> for BlockSpec {
    type Error = Error;
    fn try_from(r: BlockSpecRepr) -> Result<Self> {
        BlockSpec::from_f64(r.sizes, r.values)
    }
}

impl From<BlockSpec> for BlockSpecRepr {
    fn from(b: BlockSpec) -> Self {
        BlockSpecRepr {
            values: b.values_f64(),
            sizes: b.sizes,
        }
    }
}

impl BlockSpec {
    pub fn new(sizes: Vec<usize>, values: Vec<Vec<Exact>>) -> Result<Self> {
        let k = sizes.len();
        if k == 0 || sizes.contains(&0) {
            return Err(Error::domain("block sizes must be positive and nonempty"));
        }
        if values.len() != k || values.iter().any(|r| r.len() != k) {
            return Err(Error::domain("block values must be k × k"));
        }
        let (zero, one) = (Exact::from_integer(0), Exact::from_integer(1));
        for a in 0..k {
            for b in 0..k {
                if values[a][b] != values[b][a] {
                    return Err(Error::domain("block values must be symmetric"));
                }
                if values[a][b] < zero || values[a][b] > one {
                    return Err(Error::domain(format!(
                        "block value {} at ({a},{b}) outside [0, 1]",
                        exact_to_f64(&values[a][b])
                    )));
                }
            }
        }
        Ok(BlockSpec { sizes, values })
    }

    /// Imports floats by rounding to a multiple of `2^-40`.
    pub fn from_f64(sizes: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("block values must be finite"));
        }
        let exact = values
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|v| {
                        Exact::new((v * IMPORT_DENOMINATOR as f64).round() as i128, IMPORT_DENOMINATOR)
                    })
                    .collect()
            })
            .collect();
        Self::new(sizes, exact)
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn values(&self) -> &[Vec<Exact>] {
        &self.values
    }

    pub fn values_f64(&self) -> Vec<Vec<f64>> {
        self.values
            .iter()
            .map(|r| r.iter().map(exact_to_f64).collect())
            .collect()
    }

    /// Block index of every vertex.
    pub fn block_of(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
            .collect()
    }

    pub fn materialize(&self) -> Result<SymMatrix> {
        let n = self.n();
        if n > MATERIALIZE_CAP {
            return Err(Error::Resource(format!(
                "materializing n = {n} exceeds cap {MATERIALIZE_CAP}"
            )));
        }
        let block = self.block_of();
        let vals = self.values_f64();
        Ok(SymMatrix::from_fn(n, |i, j| vals[block[i]][block[j]]))
    }

    /// Exact row sum shared by all rows of each block.
    pub fn block_row_sums(&self) -> Vec<Exact> {
        (0..self.sizes.len())
            .map(|a| {
                self.sizes
                    .iter()
                    .enumerate()
                    .map(|(b, &s)| {
                        let count = if a == b { s - 1 } else { s };
                        self.values[a][b] * int(count)
                    })
                    .sum()
            })
            .collect()
    }

    /// Exact `Σ_{i<j} x_ij`.
    pub fn total_weight(&self) -> Exact {
        let mut acc = Exact::from_integer(0);
        for (a, &sa) in self.sizes.iter().enumerate() {
            acc += self.values[a][a] * int(sa * (sa - 1) / 2);
            for (b, &sb) in self.sizes.iter().enumerate().skip(a + 1) {
                acc += self.values[a][b] * int(sa * sb);
            }
        }
        acc
    }

    pub fn hom_density(&self, h: &Graph) -> Result<f64> {
        hom_density_blocks(h, &self.sizes, &self.values_f64())
    }

    pub fn hom_normalized(&self, h: &Graph, p: f64) -> Result<f64> {
        crate::hom::check_p(p)?;
        Ok(normalize_density(self.hom_density(h)?, p, h.edge_count()))
    }

    /// `Σ_{i≠j} I_p(x_ij)` evaluated per block pair.
    pub fn entropy(&self, p: f64) -> Result<f64> {
        let vals = self.values_f64();
        let mut acc = 0.0;
        for (a, &sa) in self.sizes.iter().enumerate() {
            let within = sa as f64 * (sa as f64 - 1.0);
            acc += within * entropy_ip(vals[a][a], p)?;
            for (b, &sb) in self.sizes.iter().enumerate().skip(a + 1) {
                acc += 2.0 * sa as f64 * sb as f64 * entropy_ip(vals[a][b], p)?;
            }
        }
        Ok(acc)
    }
}

fn check_unit(name: &str, v: Exact) -> Result<Exact> {
    if v < Exact::from_integer(0) || v > Exact::from_integer(1) {
        return Err(Error::Construction(format!(
            "{name} = {} outside [0, 1]; p is too large for this regime",
            exact_to_f64(&v)
        )));
    }
    Ok(v)
}

fn ratio(num: Exact, den: usize) -> Result<Exact> {
    if den == 0 {
        return Err(Error::Construction("degenerate block sizes".into()));
    }
    Ok(num / int(den))
}

/// Builds a symmetric `k × k` table from a closure over `a ≤ b`.
fn table(k: usize, f: impl Fn(usize, usize) -> Exact) -> Vec<Vec<Exact>> {
    (0..k)
        .map(|a| (0..k).map(|b| f(a.min(b), a.max(b))).collect())
        .collect()
}

/// Disjoint all-ones blocks for a cycle pattern in the `d`-regular ensemble:
/// `⌊δ⌋` of size `d + 1` and one of size `round({δ}^{1/l} d)`, with the rest
/// filled so every row sums to exactly `d`.
pub fn build_cycle_blocks(n: usize, d: usize, delta: f64, l: usize) -> Result<BlockSpec> {
    if l < 3 {
        return Err(Error::domain(format!("cycle length must be >= 3, got {l}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if d < 2 || d >= n {
        return Err(Error::domain(format!("need 2 <= d < n, got d={d}, n={n}")));
    }
    let whole = delta.floor() as usize;
    let frac = delta - delta.floor();
    let s1 = if frac == 0.0 {
        0
    } else {
        (frac.powf(1.0 / l as f64) * d as f64).round() as usize
    };
    let s = whole * (d + 1) + s1;
    if 2 * s > n {
        return Err(Error::Construction(format!(
            "planted blocks cover {s} of {n} vertices; need at most n/2"
        )));
    }
    let d_ex = int(d);
    let r = if s1 > 0 {
        check_unit("r", ratio(d_ex - int(s1) + int(1), n - s)?)?
    } else {
        Exact::from_integer(0)
    };
    let q = check_unit("q", ratio(d_ex - int(s1) * r, n - s - 1)?)?;

    let mut sizes = vec![d + 1; whole];
    if s1 > 0 {
        sizes.push(s1);
    }
    sizes.push(n - s);
    let k = sizes.len();
    let partial = if s1 > 0 { Some(k - 2) } else { None };
    let rest = k - 1;
    let one = Exact::from_integer(1);
    let zero = Exact::from_integer(0);
    let values = table(k, |a, b| {
        if a == b && a != rest {
            one
        } else if a == b {
            q
        } else if Some(a) == partial && b == rest {
            r
        } else {
            zero
        }
    });
    BlockSpec::new(sizes, values)
}

/// A single planted clique of size `round(δ^{1/v} n p^{Δ/2})` for a
/// `Δ`-regular pattern with `Δ ≥ 3`, background fixed by exact row sums `d`.
pub fn build_clique_block(n: usize, d: usize, delta: f64, h: &Graph) -> Result<BlockSpec> {
    if !h.is_regular() || h.max_degree() < 3 {
        return Err(Error::domain("clique block needs a regular pattern with degree >= 3"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be positive, got {delta}")));
    }
    if d < 2 || d >= n {
        return Err(Error::domain(format!("need 2 <= d < n, got d={d}, n={n}")));
    }
    let p = d as f64 / n as f64;
    let v = h.vertex_count() as f64;
    let s1 = (delta.powf(1.0 / v) * n as f64 * p.powf(h.max_degree() as f64 / 2.0)).round() as usize;
    if s1 < 2 || 2 * s1 > d {
        return Err(Error::Construction(format!(
            "clique size {s1} outside [2, d/2] for d = {d}"
        )));
    }
    let r = check_unit("r", ratio(int(d) - int(s1) + int(1), n - s1)?)?;
    let q = check_unit("q", ratio(int(d) - int(s1) * r, n - s1 - 1)?)?;
    let one = Exact::from_integer(1);
    BlockSpec::new(vec![s1, n - s1], vec![vec![one, r], vec![r, q]])
}

/// Hub of size `round(x p^Δ n)` joined to everything, inside a clique of total
/// size `s = round(y p^{Δ/2} n) + s1`; background `q` makes the total weight
/// exactly `m`, with `p = m / binom(n, 2)`.
pub fn build_clique_hub(n: usize, m: u64, x: f64, y: f64, max_degree: usize) -> Result<BlockSpec> {
    if !(x >= 0.0 && y >= 0.0) || (x == 0.0 && y == 0.0) {
        return Err(Error::domain("need x, y >= 0, not both zero"));
    }
    if n < 3 {
        return Err(Error::domain("need n >= 3"));
    }
    let ne = n * (n - 1) / 2;
    if m as usize > ne {
        return Err(Error::domain(format!("m = {m} exceeds binom(n, 2) = {ne}")));
    }
    let p = m as f64 / ne as f64;
    let nf = n as f64;
    let s1 = (x * p.powi(max_degree as i32) * nf).round() as usize;
    let s = (y * p.powf(max_degree as f64 / 2.0) * nf).round() as usize + s1;
    if s >= n {
        return Err(Error::Construction(format!("planted part {s} reaches n = {n}")));
    }
    if s == 0 {
        return Err(Error::Construction("hub and clique both round to size 0".into()));
    }
    let k_ones = s * (s - 1) / 2 + (n - s) * s1;
    let q = check_unit(
        "q",
        ratio(Exact::from_integer(m as i128) - int(k_ones), ne - k_ones)?,
    )?;
    let one = Exact::from_integer(1);
    // blocks: hub, clique remainder, background
    let full = [s1, s - s1, n - s];
    let pattern = |a: usize, b: usize| if a == 0 || (a == 1 && b == 1) { one } else { q };
    let keep: Vec<usize> = (0..3).filter(|&b| full[b] > 0).collect();
    let sizes = keep.iter().map(|&b| full[b]).collect();
    let values = keep
        .iter()
        .map(|&a| keep.iter().map(|&b| pattern(a.min(b), a.max(b))).collect())
        .collect();
    BlockSpec::new(sizes, values)
}

/// Three-block candidate for an irregular pattern in the `d`-regular
/// ensemble, with block sizes `s1 = round(x n p^{f−1})`, `d − s1 + 1` and
/// `n − d − 1`, where `f = f_exponent(H)`. Returns the matrix and `f`.
///
/// Value pattern `[[1,1,0],[1,r,r],[0,r,q]]`. The middle block has `d − s1 + 1`
/// vertices so that hub rows sum to exactly `d` with a zero diagonal.
pub fn build_irregular_dreg(n: usize, d: usize, h: &Graph, x: f64) -> Result<(BlockSpec, Rational)> {
    if h.vertex_count() == 0 || h.min_degree() < 2 {
        return Err(Error::domain("pattern must have minimum degree >= 2; use its 2-core"));
    }
    if h.is_regular() {
        return Err(Error::domain("pattern is regular; use build_clique_block"));
    }
    if h.max_degree() < 3 {
        return Err(Error::domain("pattern must have max degree >= 3"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("x must be positive, got {x}")));
    }
    if d < 2 || d + 3 > n {
        return Err(Error::domain(format!("need 2 <= d <= n - 3, got d={d}, n={n}")));
    }
    let f = f_exponent(h)?;
    let ff = *f.numer() as f64 / *f.denom() as f64;
    let p = d as f64 / n as f64;
    let s1 = (x * n as f64 * p.powf(ff - 1.0)).round() as usize;
    if s1 < 1 || s1 >= d {
        return Err(Error::Construction(format!("hub size {s1} outside [1, d)")));
    }
    let r = check_unit("r", ratio(int(d) - int(s1), n - s1 - 1)?)?;
    let q = check_unit("q", ratio(int(d) - r * int(d - s1 + 1), n - d - 2)?)?;
    let (one, zero) = (Exact::from_integer(1), Exact::from_integer(0));
    let spec = BlockSpec::new(
        vec![s1, d - s1 + 1, n - d - 1],
        vec![vec![one, one, zero], vec![one, r, r], vec![zero, r, q]],
    )?;
    Ok((spec, f))
}

/// Either representation accepted by [`validate_membership`].
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    Block(&'a BlockSpec),
    Dense(&'a SymMatrix),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    /// Max row-sum deviation (regular), total-weight deviation (uniform), else 0.
    pub deviation: f64,
    pub entries_in_range: bool,
    pub passes: bool,
}

pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub fn validate_membership(x: Candidate<'_>, ensemble: &EnsembleSpec) -> MembershipReport {
    let n = match x {
        Candidate::Block(b) => b.n(),
        Candidate::Dense(m) => m.n(),
    };
    let entries_in_range = match x {
        // checked at construction
        Candidate::Block(_) => true,
        Candidate::Dense(m) => m.entries_within(0.0, 1.0),
    };
    let deviation = if n != ensemble.n {
        f64::INFINITY
    } else {
        match (&ensemble.kind, x) {
            (Ensemble::Regular { d }, Candidate::Block(b)) => b
                .block_row_sums()
                .iter()
                .map(|s| exact_to_f64(&abs(*s - int(*d))))
                .fold(0.0, f64::max),
            (Ensemble::Regular { d }, Candidate::Dense(m)) => m
                .row_sums()
                .iter()
                .map(|s| (s - *d as f64).abs())
                .fold(0.0, f64::max),
            (Ensemble::Uniform { m: target }, Candidate::Block(b)) => {
                exact_to_f64(&abs(b.total_weight() - Exact::from_integer(*target as i128)))
            }
            (Ensemble::Uniform { m: target }, Candidate::Dense(m)) => {
                (m.upper_sum() - *target as f64).abs()
            }
            _ => 0.0,
        }
    };
    MembershipReport {
        deviation,
        entries_in_range,
        passes: entries_in_range && deviation <= MEMBERSHIP_TOL,
    }
}
