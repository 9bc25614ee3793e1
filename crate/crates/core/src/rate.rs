//! Closed-form rate constants and the scalar pieces they are built from.

use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{delta_star, h_star, independence_polynomial, Graph, IndependencePolynomial};
use crate::matrix::SymMatrix;

/// Relative tolerance under which two branch values count as tied.
const TIE_RTOL: f64 = 1e-14;

fn xlogy_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

fn ip(x: f64, p: f64) -> f64 {
    xlogy_ratio(x, p) + xlogy_ratio(1.0 - x, 1.0 - p)
}

/// `I_p(x) = x log(x/p) + (1−x) log((1−x)/(1−p))`, with `0 log 0 = 0`.
pub fn entropy_ip(x: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x must lie in [0, 1], got {x}")));
    }
    Ok(ip(x, p))
}

/// Reference probabilities for [`entropy_matrix`].
#[derive(Debug, Clone, Copy)]
pub enum Base<'a> {
    Scalar(f64),
    Matrix(&'a SymMatrix),
}

/// `Σ_{i≠j} I_{p_ij}(x_ij)` over ordered pairs.
pub fn entropy_matrix(x: &SymMatrix, base: Base<'_>) -> Result<f64> {
    let n = x.n();
    if let Base::Matrix(p) = base {
        if p.n() != n {
            return Err(Error::domain(format!(
                "dimension mismatch: X is {n}×{n}, P is {0}×{0}",
                p.n()
            )));
        }
    }
    let mut acc = crate::hom::KahanSum::default();
    for i in 0..n {
        for j in i + 1..n {
            let pij = match base {
                Base::Scalar(p) => p,
                Base::Matrix(m) => m.get(i, j),
            };
            acc.add(2.0 * entropy_ip(x.get(i, j), pij)?);
        }
    }
    Ok(acc.value())
}

/// `a_{n,p} = n² p^Δ log(1/p)`.
pub fn scale_anp(n: usize, p: f64, max_degree: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    if max_degree < 2 {
        return Err(Error::domain(format!("max degree must be >= 2, got {max_degree}")));
    }
    let n = n as f64;
    Ok(n * n * p.powi(max_degree as i32) * (1.0 / p).ln())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("delta must be finite and >= 0, got {delta}")));
    }
    Ok(())
}

fn hub_polynomial(h: &Graph) -> Result<IndependencePolynomial> {
    if h.edge_count() == 0 {
        return Err(Error::domain("graph must have at least one edge"));
    }
    independence_polynomial(&h_star(h))
}

fn bisect_root(poly: &IndependencePolynomial, target: f64, mut hi: f64) -> f64 {
    let mut lo = 0.0;
    while poly.eval(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if poly.eval(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The positive root `θ` of `P_{H*}(θ) = 1 + δ`.
pub fn theta_root(h: &Graph, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let poly = hub_polynomial(h)?;
    if delta == 0.0 {
        return Ok(0.0);
    }
    // P(θ) ≥ 1 + v* θ, so the root lies below δ / v*
    let vstar = poly.coefficients.get(1).copied().unwrap_or(1).max(1) as f64;
    Ok(bisect_root(&poly, 1.0 + delta, delta / vstar))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Hub,
    Clique,
    Mixed,
    MultiClique,
    Infinite,
}

/// Finite-size context attached to a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub n: usize,
    pub p: f64,
    pub max_degree: usize,
    pub a_np: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `f64::INFINITY` when the branch is [`Branch::Infinite`].
    pub constant: f64,
    pub branch: Branch,
    /// `(x, y)` for hub/clique/mixed; `(⌊δ⌋, {δ})` for multi-clique.
    pub witness: Option<(f64, f64)>,
    pub delta: Vec<f64>,
    pub normalization: Option<Normalization>,
}

impl RateReport {
    pub fn with_normalization(mut self, n: usize, p: f64, max_degree: usize) -> Result<Self> {
        let a_np = scale_anp(n, p, max_degree)?;
        self.normalization = Some(Normalization {
            n,
            p,
            max_degree,
            a_np,
        });
        Ok(self)
    }
}

impl Serialize for RateReport {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        if self.constant.is_finite() {
            map.serialize_entry("constant", &self.constant)?;
        } else {
            map.serialize_entry("constant", "inf")?;
        }
        map.serialize_entry("branch", &self.branch)?;
        if let Some((x, y)) = self.witness {
            map.serialize_entry("witness_x", &x)?;
            map.serialize_entry("witness_y", &y)?;
        }
        match self.delta.as_slice() {
            [] => {}
            [d] => map.serialize_entry("delta", d)?,
            ds => map.serialize_entry("delta", ds)?,
        }
        if let Some(norm) = &self.normalization {
            map.serialize_entry("n", &norm.n)?;
            map.serialize_entry("p", &norm.p)?;
            map.serialize_entry("max_degree", &norm.max_degree)?;
            map.serialize_entry("a_np", &norm.a_np)?;
        }
        map.end()
    }
}

fn report(constant: f64, branch: Branch, witness: Option<(f64, f64)>, delta: f64) -> RateReport {
    RateReport {
        constant,
        branch,
        witness,
        delta: vec![delta],
        normalization: None,
    }
}

fn check_pattern(h: &Graph) -> Result<()> {
    if !h.is_connected() || h.vertex_count() == 0 {
        return Err(Error::domain("pattern must be connected and nonempty"));
    }
    if h.max_degree() < 2 {
        return Err(Error::domain(format!(
            "pattern must have max degree >= 2, got {}",
            h.max_degree()
        )));
    }
    Ok(())
}

/// Erdős–Rényi constant: `min{θ, ½δ^{2/v}}` for regular `H`, `θ` otherwise.
pub fn c_er(h: &Graph, delta: f64) -> Result<RateReport> {
    check_pattern(h)?;
    let theta = theta_root(h, delta)?;
    if delta == 0.0 {
        return Ok(report(0.0, Branch::Hub, Some((0.0, 0.0)), delta));
    }
    let hub = report(theta, Branch::Hub, Some((theta, 0.0)), delta);
    if !h.is_regular() {
        return Ok(hub);
    }
    let v = h.vertex_count() as f64;
    let clique = 0.5 * delta.powf(2.0 / v);
    if clique < theta * (1.0 - TIE_RTOL) {
        Ok(report(clique, Branch::Clique, Some((0.0, delta.powf(1.0 / v))), delta))
    } else {
        Ok(hub)
    }
}

/// Random-regular constant. Requires minimum degree ≥ 2 (pass the 2-core).
pub fn c_reg(h: &Graph, delta: f64) -> Result<RateReport> {
    check_delta(delta)?;
    if h.vertex_count() == 0 || h.min_degree() < 2 {
        return Err(Error::domain(
            "regular-ensemble constant needs minimum degree >= 2; reduce to the 2-core first",
        ));
    }
    if !h.is_connected() {
        return Err(Error::domain("pattern must be connected"));
    }
    if delta == 0.0 {
        return Ok(report(0.0, Branch::Hub, Some((0.0, 0.0)), delta));
    }
    let v = h.vertex_count() as f64;
    if !h.is_regular() {
        return Ok(report(f64::INFINITY, Branch::Infinite, None, delta));
    }
    if h.max_degree() == 2 {
        let whole = delta.floor();
        let frac = delta - whole;
        let value = 0.5 * (whole + frac.powf(2.0 / v));
        Ok(report(value, Branch::MultiClique, Some((whole, frac)), delta))
    } else {
        let value = 0.5 * delta.powf(2.0 / v);
        Ok(report(value, Branch::Clique, Some((0.0, delta.powf(1.0 / v))), delta))
    }
}

struct JointTerm {
    poly: IndependencePolynomial,
    target: f64,
    regular: bool,
    v: f64,
}

/// Joint constant `min_{x,y≥0} x + ½y²` subject to
/// `P_{H*_i}(x) + 1{H_i regular} y^{v_i} ≥ 1 + δ_i` for every `i`.
///
/// For fixed `x` the smallest feasible `y` is explicit, so the problem is a
/// one-dimensional search over `x` between the largest irregular root and the
/// largest root overall. The reduced objective need not be convex; it is
/// scanned on a grid and the best cell refined.
pub fn c_joint(hs: &[Graph], deltas: &[f64]) -> Result<RateReport> {
    if hs.is_empty() || hs.len() != deltas.len() {
        return Err(Error::domain("need one delta per pattern and at least one pattern"));
    }
    let mut terms = Vec::with_capacity(hs.len());
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    let top = hs[0].max_degree();
    for (h, &delta) in hs.iter().zip(deltas) {
        check_pattern(h)?;
        check_delta(delta)?;
        if h.max_degree() != top {
            return Err(Error::domain("all patterns must share the same max degree"));
        }
        let theta = theta_root(h, delta)?;
        hi = hi.max(theta);
        if !h.is_regular() {
            lo = lo.max(theta);
        }
        terms.push(JointTerm {
            poly: hub_polynomial(h)?,
            target: 1.0 + delta,
            regular: h.is_regular(),
            v: h.vertex_count() as f64,
        });
    }

    let y_of = |x: f64| -> f64 {
        terms
            .iter()
            .filter(|t| t.regular)
            .map(|t| {
                let gap = t.target - t.poly.eval(x);
                if gap > 0.0 {
                    gap.powf(1.0 / t.v)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    };
    let objective = |x: f64| {
        let y = y_of(x);
        x + 0.5 * y * y
    };

    const GRID: usize = 1000;
    let mut best_x = hi;
    let mut best = objective(hi);
    let consider = |x: f64, best_x: &mut f64, best: &mut f64| {
        let v = objective(x);
        if v < *best * (1.0 - TIE_RTOL) {
            *best = v;
            *best_x = x;
        }
    };
    consider(lo, &mut best_x, &mut best);
    let (mut a, mut b) = (lo, hi);
    for _round in 0..4 {
        let step = (b - a) / GRID as f64;
        if step <= 0.0 {
            break;
        }
        for k in 0..=GRID {
            consider(a + step * k as f64, &mut best_x, &mut best);
        }
        a = (best_x - step).max(lo);
        b = (best_x + step).min(hi);
    }

    let y = y_of(best_x);
    let branch = if y == 0.0 {
        Branch::Hub
    } else if best_x == 0.0 {
        Branch::Clique
    } else {
        Branch::Mixed
    };
    Ok(RateReport {
        constant: best,
        branch,
        witness: Some((best_x, y)),
        delta: deltas.to_vec(),
        normalization: None,
    })
}

/// Block model: fractions `α`, kernel `c` and base `p`; pair `(r, r')` has edge probability `c_{rr'} p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockModelParams {
    pub alpha: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub p: f64,
}

impl BlockModelParams {
    pub fn new(alpha: Vec<f64>, kernel: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        let params = BlockModelParams { alpha, kernel, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.alpha.len();
        if l == 0 {
            return Err(Error::domain("block model needs at least one block"));
        }
        if self.alpha.iter().any(|&a| !(a >= 0.0)) {
            return Err(Error::domain("block fractions must be nonnegative"));
        }
        let total: f64 = self.alpha.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("block fractions sum to {total}, not 1")));
        }
        if self.kernel.len() != l || self.kernel.iter().any(|r| r.len() != l) {
            return Err(Error::domain("kernel must be ℓ × ℓ"));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {}", self.p)));
        }
        for r in 0..l {
            for s in 0..l {
                let c = self.kernel[r][s];
                if c != self.kernel[s][r] {
                    return Err(Error::domain("kernel must be symmetric"));
                }
                if !(c >= 0.0) || c * self.p > 1.0 {
                    return Err(Error::domain(format!(
                        "kernel entry {c} at ({r},{s}) gives a probability outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn blocks(&self) -> usize {
        self.alpha.len()
    }
}

/// Largest number of block assignments `ℓ^v` enumerated by [`b_h`].
pub const B_H_ASSIGNMENT_CAP: usize = 50_000_000;

/// `b_H = Σ_σ Π_v α_{σ(v)} Π_{(u,w)∈E} c_{σ(u)σ(w)}` over all maps `σ: V(H) → [ℓ]`.
pub fn b_h(h: &Graph, params: &BlockModelParams) -> Result<f64> {
    params.validate()?;
    let v = h.vertex_count();
    let l = params.blocks();
    if v > 12 {
        return Err(Error::Resource(format!("b_h enumerates at most 12 vertices, got {v}")));
    }
    let total = l
        .checked_pow(v as u32)
        .filter(|&t| t <= B_H_ASSIGNMENT_CAP)
        .ok_or_else(|| Error::Resource(format!("{l}^{v} block assignments exceed the cap")))?;
    let mut sigma = vec![0usize; v];
    let mut acc = crate::hom::KahanSum::default();
    for code in 0..total {
        let mut c = code;
        for s in sigma.iter_mut() {
            *s = c % l;
            c /= l;
        }
        let mut prod: f64 = sigma.iter().map(|&s| params.alpha[s]).product();
        for &(a, b) in h.edges() {
            prod *= params.kernel[sigma[a]][sigma[b]];
        }
        acc.add(prod);
    }
    Ok(acc.value())
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Log of the asymptotic count of labeled `d`-regular graphs on `n` vertices:
/// `√2 e^{1/4} (μ^μ (1−μ)^{1−μ})^{n_e} binom(n−1, d)^n` with `μ = d/(n−1)`.
pub fn log_gn_regular(n: usize, d: usize) -> Result<f64> {
    if d < 1 || d + 2 > n {
        return Err(Error::domain(format!("need 1 <= d <= n - 2, got n={n}, d={d}")));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::domain(format!("no {d}-regular graph on {n} vertices: nd is odd")));
    }
    let nf = n as f64;
    let mu = d as f64 / (nf - 1.0);
    let ne = nf * (nf - 1.0) / 2.0;
    Ok(0.5 * 2f64.ln()
        + 0.25
        + ne * (mu * mu.ln() + (1.0 - mu) * (1.0 - mu).ln())
        + nf * ln_binomial(n - 1, d))
}

/// Returns `(Σx, Σx^β, ⌊Σx⌋ + {Σx}^β)`; for `x ∈ [0,1]^N` the second is at least the third.
pub fn lemma_floor_bound(xs: &[f64], beta: f64) -> (f64, f64, f64) {
    let f1: f64 = xs.iter().sum();
    let fb: f64 = xs.iter().map(|x| x.powf(beta)).sum();
    let whole = f1.floor();
    (f1, fb, whole + (f1 - whole).powf(beta))
}

/// Advisory comparison of `p` against the lower end of the regime where the
/// rate asymptotics are known to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PRangeCheck {
    pub lower: f64,
    /// `p / lower`; the asymptotics need this large and `p` small.
    pub ratio: f64,
    pub within: bool,
}

pub fn p_range_check(h: &Graph, n: usize, p: f64) -> Result<PRangeCheck> {
    if n < 2 {
        return Err(Error::domain("n must be >= 2"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    let nf = n as f64;
    let log_n = nf.ln();
    let is_cycle = h.is_connected() && h.is_regular() && h.max_degree() == 2;
    let lower = if is_cycle {
        let l = h.vertex_count() as f64;
        nf.powf(2.0 / l - 1.0)
            .max(log_n.powf(l / (2.0 * l - 4.0)) / nf.sqrt())
    } else {
        let ds = delta_star(h)?;
        let ds = *ds.numer() as f64 / *ds.denom() as f64;
        nf.powf(-1.0 / (2.0 * ds)) * log_n.powf(1.0 / (2.0 * ds))
    };
    let ratio = p / lower;
    Ok(PRangeCheck {
        lower,
        ratio,
        within: ratio > 1.0,
    })
}
