//! Finite-`n` upper-tail variational problems:
//! minimize `½ Σ_{i≠j} I_p(x_ij)` over symmetric `X ∈ [0,1]^{n×n}` with zero
//! diagonal, subject to `hom(H_k, X) ≥ t_k` and optionally a total-weight or
//! row-sum constraint.
//!
//! The hom constraints are handled by an augmented Lagrangian; each
//! subproblem is solved by projected gradient with Armijo backtracking. The
//! feasible set is not convex, so the solver starts from several seeds
//! (including the block constructions) and returns the best certified point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::{
    build_clique_block, build_clique_hub, build_cycle_blocks, build_irregular_dreg, BlockSpec,
};
use crate::error::{Error, Result};
use crate::graph::{two_core, Graph};
use crate::hom::{hom_density_t, hom_gradient, normalize_density, KahanSum};
use crate::matrix::SymMatrix;
use crate::rate::{c_er, entropy_ip, scale_anp, theta_root};

/// Affine constraint defining the ensemble's matrix set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleConstraint {
    None,
    /// `Σ_{i<j} x_ij = m`.
    TotalWeight { m: f64 },
    /// `Σ_j x_ij = d` for every `i`.
    RowSums { d: f64 },
}

/// Reference measure for the entropy. `p` always normalizes hom values.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMeasure {
    Scalar(f64),
    /// Block model: entrywise probabilities plus the scalar base `p`.
    Matrix { probs: SymMatrix, p: f64 },
}

impl BaseMeasure {
    pub fn p(&self) -> f64 {
        match self {
            BaseMeasure::Scalar(p) => *p,
            BaseMeasure::Matrix { p, .. } => *p,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        match self {
            BaseMeasure::Scalar(p) => *p,
            BaseMeasure::Matrix { probs, .. } => probs.get(i, j),
        }
    }

    fn matrix(&self, n: usize) -> SymMatrix {
        match self {
            BaseMeasure::Scalar(p) => SymMatrix::constant(n, *p),
            BaseMeasure::Matrix { probs, .. } => probs.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Seed {
    Block(BlockSpec),
    Dense(SymMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub value: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-6,
            value: 1e-4,
        }
    }
}

pub const DEFAULT_BUDGET: usize = 500;

/// Largest `n` for the dense solver.
pub const DENSE_CAP: usize = 2000;

#[derive(Debug, Clone)]
pub struct SolveProblem {
    pub n: usize,
    pub targets: Vec<(Graph, f64)>,
    pub constraint: EnsembleConstraint,
    pub base: BaseMeasure,
    /// Extra starting points, labeled for provenance.
    pub seeds: Vec<(String, Seed)>,
    /// Also start from the base matrix and the applicable constructions.
    pub default_seeds: bool,
    pub tolerances: Tolerances,
    /// Outer (multiplier update) iterations per seed.
    pub budget: usize,
}

impl SolveProblem {
    pub fn new(n: usize, base: BaseMeasure, targets: Vec<(Graph, f64)>) -> Self {
        SolveProblem {
            n,
            targets,
            constraint: EnsembleConstraint::None,
            base,
            seeds: Vec::new(),
            default_seeds: true,
            tolerances: Tolerances::default(),
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn with_constraint(mut self, constraint: EnsembleConstraint) -> Self {
        self.constraint = constraint;
        self
    }

    pub fn with_seed(mut self, label: impl Into<String>, seed: Seed) -> Self {
        self.seeds.push((label.into(), seed));
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n > DENSE_CAP {
            return Err(Error::Resource(format!(
                "dense solve limited to n <= {DENSE_CAP}; use the block solver"
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::domain("need at least one target"));
        }
        for (h, t) in &self.targets {
            if h.vertex_count() > n {
                return Err(Error::domain("n must be at least the pattern size"));
            }
            if h.edge_count() == 0 {
                return Err(Error::domain("patterns need at least one edge"));
            }
            if !t.is_finite() {
                return Err(Error::domain("targets must be finite"));
            }
        }
        let p = self.base.p();
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
        }
        if let BaseMeasure::Matrix { probs, .. } = &self.base {
            if probs.n() != n || probs.upper_entries().any(|v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::domain("base matrix must be n × n with entries in (0, 1)"));
            }
        }
        match self.constraint {
            EnsembleConstraint::TotalWeight { m } if !(0.0..=(n * (n - 1) / 2) as f64).contains(&m) => {
                Err(Error::domain(format!("total weight {m} out of range")))
            }
            EnsembleConstraint::RowSums { d } if !(0.0..=(n - 1) as f64).contains(&d) => {
                Err(Error::domain(format!("row sum {d} out of range")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub x: SymMatrix,
    /// `½ Σ_{i≠j} I_p(x_ij)`.
    pub value: f64,
    /// `value / a_{n,p}` with `Δ` from the 2-core of the first pattern.
    pub normalized: Option<f64>,
    /// `max(0, t_k − hom(H_k, X))` per target.
    pub residuals: Vec<f64>,
    pub ensemble_residual: f64,
    pub seed_provenance: String,
    /// Entropy of each starting point that already met every constraint.
    pub feasible_seeds: Vec<(String, f64)>,
    pub iterations: usize,
}

/// `value / a_{n,p}`.
pub fn normalized_phi(result: &SolveResult, n: usize, p: f64, max_degree: usize) -> Result<f64> {
    Ok(result.value / scale_anp(n, p, max_degree)?)
}

const PROJECTION_TOL: f64 = 1e-10;
const PROJECTION_SWEEPS: usize = 2_000;

/// Euclidean projection onto `[0,1]` entries intersected with the ensemble constraint.
pub fn project_ensemble(x: &SymMatrix, constraint: EnsembleConstraint) -> Result<SymMatrix> {
    let mut duals = vec![0.0; x.n()];
    project_warm(x, constraint, Bounds::UNIT, &mut duals)
}

/// Entry range for the projection.
#[derive(Debug, Clone, Copy)]
struct Bounds {
    lo: f64,
    hi: f64,
}

impl Bounds {
    const UNIT: Bounds = Bounds { lo: 0.0, hi: 1.0 };

    /// The entropy has infinite slope at 0 and 1, so iterates stay this far inside.
    const INTERIOR: Bounds = Bounds {
        lo: 1e-7,
        hi: 1.0 - 1e-7,
    };

    fn clip(self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    fn inside(self, v: f64) -> bool {
        v > self.lo && v < self.hi
    }
}

fn project_warm(
    x: &SymMatrix,
    constraint: EnsembleConstraint,
    bounds: Bounds,
    duals: &mut [f64],
) -> Result<SymMatrix> {
    match constraint {
        EnsembleConstraint::None => Ok(x.map(|v| bounds.clip(v))),
        EnsembleConstraint::TotalWeight { m } => project_total(x, m, bounds),
        EnsembleConstraint::RowSums { d } => project_rows(x, d, bounds, duals),
    }
}

/// `Σ clip(y − τ) = m` by bisection on the scalar shift `τ`.
fn project_total(y: &SymMatrix, m: f64, bounds: Bounds) -> Result<SymMatrix> {
    let entries: Vec<f64> = y.upper_entries().collect();
    let total = |tau: f64| {
        let mut acc = KahanSum::default();
        entries.iter().for_each(|v| acc.add(bounds.clip(v - tau)));
        acc.value()
    };
    let lo_init = entries.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let hi_init = entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (lo_init.min(0.0), hi_init.max(0.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = if (total(lo) - m).abs() < (total(hi) - m).abs() { lo } else { hi };
    let mut out = y.map(|v| bounds.clip(v - tau));
    // spread the last rounding error over the interior entries
    let interior: Vec<(usize, usize)> = (0..y.n())
        .flat_map(|i| (i + 1..y.n()).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            bounds.inside(out.get(i, j))
        })
        .collect();
    let gap = m - out.upper_sum();
    if !interior.is_empty() && gap != 0.0 {
        let share = gap / interior.len() as f64;
        for &(i, j) in &interior {
            out.set(i, j, bounds.clip(out.get(i, j) + share));
        }
    }
    let residual = (out.upper_sum() - m).abs();
    if residual > PROJECTION_TOL {
        return Err(Error::Numeric(format!(
            "total-weight projection stalled at residual {residual:e}"
        )));
    }
    Ok(out)
}

/// Solves `Σ_j clip(z_j − τ) = target` for `τ`; the left side is piecewise
/// linear and nonincreasing.
fn solve_row_shift(z: &[f64], target: f64, bounds: Bounds) -> f64 {
    let mut breaks: Vec<f64> = z.iter().flat_map(|&v| [v - bounds.lo, v - bounds.hi]).collect();
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = |tau: f64| z.iter().map(|v| bounds.clip(v - tau)).sum::<f64>();
    // h is linear between consecutive breakpoints; find the bracketing pair
    let (mut lo, mut hi) = (0usize, breaks.len() - 1);
    if h(breaks[hi]) >= target {
        return breaks[hi];
    }
    if h(breaks[lo]) <= target {
        return breaks[lo];
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if h(breaks[mid]) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (a, b) = (breaks[lo], breaks[hi]);
    let (ha, hb) = (h(a), h(b));
    if ha == hb {
        return a;
    }
    a + (ha - target) * (b - a) / (ha - hb)
}

fn row_shifted(y: &SymMatrix, tau: &[f64], bounds: Bounds) -> SymMatrix {
    SymMatrix::from_fn(y.n(), |i, j| bounds.clip(y.get(i, j) - tau[i] - tau[j]))
}

fn row_residuals(x: &SymMatrix, d: f64) -> Vec<f64> {
    x.row_sums().into_iter().map(|s| s - d).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, r| m.max(r.abs()))
}

/// Conjugate gradients for `(D + A) u = r` where `A` is the 0/1 pattern of
/// interior entries and `D` its degrees (1 on empty rows).
fn solve_interior_system(interior: &[Vec<usize>], r: &[f64]) -> Vec<f64> {
    let n = r.len();
    let apply = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let row = &interior[i];
                let diag = if row.is_empty() { 1.0 } else { row.len() as f64 };
                (diag + 1e-9) * u[i] + row.iter().map(|&j| u[j]).sum::<f64>()
            })
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut u = vec![0.0; n];
    let mut res = r.to_vec();
    let mut dir = res.clone();
    let mut rr = dot(&res, &res);
    let stop = 1e-28 * rr.max(1e-300);
    for _ in 0..4 * n.max(25) {
        if rr <= stop {
            break;
        }
        let md = apply(&dir);
        let curv = dot(&dir, &md);
        if curv <= 0.0 {
            break;
        }
        let alpha = rr / curv;
        for i in 0..n {
            u[i] += alpha * dir[i];
            res[i] -= alpha * md[i];
        }
        let next = dot(&res, &res);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            dir[i] = res[i] + beta * dir[i];
        }
    }
    u
}

/// One Gauss-Seidel sweep: each `τ_i` solved exactly with the others fixed.
fn gauss_seidel_sweep(y: &SymMatrix, d: f64, bounds: Bounds, tau: &mut [f64]) {
    let n = y.n();
    let mut z = vec![0.0; n - 1];
    for i in 0..n {
        let mut k = 0;
        for j in 0..n {
            if j != i {
                z[k] = y.get(i, j) - tau[j];
                k += 1;
            }
        }
        tau[i] = solve_row_shift(&z, d, bounds);
    }
}

/// Dual problem on per-vertex shifts, `x_ij = clip(y_ij − τ_i − τ_j)`, solved
/// by semismooth Newton with a Gauss-Seidel sweep whenever a step stalls.
fn project_rows(y: &SymMatrix, d: f64, bounds: Bounds, tau: &mut [f64]) -> Result<SymMatrix> {
    let n = y.n();
    let mut x = row_shifted(y, tau, bounds);
    let mut r = row_residuals(&x, d);
    for _ in 0..PROJECTION_SWEEPS {
        let worst = max_abs(&r);
        if worst <= PROJECTION_TOL {
            return Ok(x);
        }
        let interior: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| {
                        j != i && bounds.inside(x.get(i, j))
                    })
                    .collect()
            })
            .collect();
        let step = solve_interior_system(&interior, &r);
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = tau.iter().zip(&step).map(|(t, s)| t + alpha * s).collect();
            let tx = row_shifted(y, &trial, bounds);
            let tr = row_residuals(&tx, d);
            let tn = tr.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn <= (1.0 - 0.1 * alpha) * norm {
                tau.copy_from_slice(&trial);
                x = tx;
                r = tr;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || max_abs(&r) > 0.5 * worst {
            gauss_seidel_sweep(y, d, bounds, tau);
            x = row_shifted(y, tau, bounds);
            r = row_residuals(&x, d);
        }
    }
    Err(Error::Numeric(format!(
        "row-sum projection did not converge (residual {:e})",
        max_abs(&r)
    )))
}

fn ensemble_residual(x: &SymMatrix, constraint: EnsembleConstraint) -> f64 {
    match constraint {
        EnsembleConstraint::None => 0.0,
        EnsembleConstraint::TotalWeight { m } => (x.upper_sum() - m).abs(),
        EnsembleConstraint::RowSums { d } => x
            .row_sums()
            .iter()
            .map(|s| (s - d).abs())
            .fold(0.0, f64::max),
    }
}

/// Evaluation context shared by all seeds.
struct Ctx<'a> {
    problem: &'a SolveProblem,
    pairs: f64,
}

impl Ctx<'_> {
    /// `½ Σ_{i≠j} I = Σ_{i<j} I`.
    fn value(&self, x: &SymMatrix) -> f64 {
        let n = x.n();
        let mut acc = KahanSum::default();
        for i in 0..n {
            for j in i + 1..n {
                acc.add(entropy_ip(x.get(i, j), self.problem.base.at(i, j)).unwrap_or(f64::INFINITY));
            }
        }
        acc.value()
    }

    fn homs(&self, x: &SymMatrix) -> Result<Vec<f64>> {
        let p = self.problem.base.p();
        self.problem
            .targets
            .iter()
            .map(|(h, _)| Ok(normalize_density(hom_density_t(h, x)?, p, h.edge_count())))
            .collect()
    }

    fn residuals(&self, homs: &[f64]) -> Vec<f64> {
        homs.iter()
            .zip(&self.problem.targets)
            .map(|(v, (_, t))| (t - v).max(0.0))
            .collect()
    }

    fn feasible(&self, homs: &[f64]) -> bool {
        self.residuals(homs)
            .iter()
            .all(|&r| r <= self.problem.tolerances.feasibility)
    }

    /// Augmented Lagrangian `F/N + Σ_k (μ/2)(max(0, λ_k/μ − g_k))² − λ_k²/(2μ)`.
    fn lagrangian(&self, x: &SymMatrix, lambda: &[f64], mu: f64) -> Result<f64> {
        let homs = self.homs(x)?;
        let mut l = self.value(x) / self.pairs;
        for ((h, (_, t)), &lam) in homs.iter().zip(&self.problem.targets).zip(lambda) {
            let g = h - t;
            let s = (lam / mu - g).max(0.0);
            l += 0.5 * mu * s * s - lam * lam / (2.0 * mu);
        }
        Ok(l)
    }

    /// `N · ∇L`, with entropy log-odds clipped away from 0 and 1.
    fn scaled_gradient(&self, x: &SymMatrix, lambda: &[f64], mu: f64) -> Result<SymMatrix> {
        const EPS: f64 = 1e-12;
        let p = self.problem.base.p();
        let homs = self.homs(x)?;
        let mut weights = Vec::with_capacity(homs.len());
        for ((h, (_, t)), &lam) in homs.iter().zip(&self.problem.targets).zip(lambda) {
            weights.push((lam - mu * (h - t)).max(0.0));
        }
        let mut grad = x.map(|_| 0.0);
        for ((h, _), &w) in self.problem.targets.iter().zip(&weights) {
            if w == 0.0 {
                continue;
            }
            let scale = w * self.pairs / p.powi(h.edge_count() as i32);
            let gh = hom_gradient(h, x)?;
            grad = SymMatrix::from_fn(x.n(), |i, j| grad.get(i, j) - scale * gh.get(i, j));
        }
        Ok(SymMatrix::from_fn(x.n(), |i, j| {
            let v = x.get(i, j).clamp(EPS, 1.0 - EPS);
            let pij = self.problem.base.at(i, j);
            let log_odds = (v * (1.0 - pij) / (pij * (1.0 - v))).ln();
            grad.get(i, j) + log_odds
        }))
    }
}

struct Local {
    x: SymMatrix,
    iterations: usize,
}

const INNER_ITERATIONS: usize = 40;
const ARMIJO: f64 = 1e-4;
const STALL_WINDOW: usize = 5;
const STALL_RTOL: f64 = 1e-6;
const MU_CAP: f64 = 1e8;

fn local_solve(ctx: &Ctx, start: &SymMatrix) -> Result<Local> {
    let problem = ctx.problem;
    let constraint = problem.constraint;
    let mut duals = vec![0.0; problem.n];
    let mut x = project_warm(start, constraint, Bounds::INTERIOR, &mut duals)?;
    let k = problem.targets.len();
    let mut lambda = vec![0.0; k];
    let mut mu = 10.0;
    let mut prev_violation = f64::INFINITY;
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut last_alpha: f64 = 1.0;
    let mut stuck = 0;

    for _outer in 0..problem.budget {
        iterations += 1;
        for _inner in 0..INNER_ITERATIONS {
            let l0 = ctx.lagrangian(&x, &lambda, mu)?;
            let grad = ctx.scaled_gradient(&x, &lambda, mu)?;
            // no entry moves by more than half the box; larger trials only
            // make the projection harder
            let gmax = grad.upper_entries().fold(0.0, |m: f64, g| m.max(g.abs()));
            let mut alpha = (4.0 * last_alpha).min(1.0).min(0.5 / gmax.max(1e-300));
            let mut moved = None;
            while alpha > 1e-12 {
                let trial = SymMatrix::from_fn(problem.n, |i, j| x.get(i, j) - alpha * grad.get(i, j));
                let Ok(y) = project_warm(&trial, constraint, Bounds::INTERIOR, &mut duals) else {
                    alpha *= 0.5;
                    continue;
                };
                let decrease: f64 = y
                    .upper_entries()
                    .zip(x.upper_entries())
                    .zip(grad.upper_entries())
                    .map(|((a, b), g)| g * (a - b))
                    .sum::<f64>()
                    / ctx.pairs;
                if ctx.lagrangian(&y, &lambda, mu)? <= l0 + ARMIJO * decrease {
                    last_alpha = alpha;
                    moved = Some(y);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(y) = moved else { break };
            let step = y.max_abs_diff(&x);
            x = y;
            if step < 1e-10 {
                break;
            }
        }

        let homs = ctx.homs(&x)?;
        let mut violation: f64 = 0.0;
        for ((h, (_, t)), lam) in homs.iter().zip(&problem.targets).zip(lambda.iter_mut()) {
            let g = h - t;
            *lam = (*lam - mu * g).max(0.0);
            violation = violation.max((-g).max(0.0));
        }
        // at the penalty cap with no progress the start is a saddle; give up on it
        if mu >= MU_CAP && violation > 0.0 && violation >= 0.999 * prev_violation {
            stuck += 1;
            if stuck >= STALL_WINDOW {
                break;
            }
        } else {
            stuck = 0;
        }
        if violation > 0.25 * prev_violation {
            mu = (mu * 5.0).min(MU_CAP);
        }
        prev_violation = violation;

        history.push(ctx.value(&x));
        if violation <= problem.tolerances.feasibility && history.len() > STALL_WINDOW {
            let old = history[history.len() - 1 - STALL_WINDOW];
            let new = *history.last().unwrap();
            if (old - new).abs() <= STALL_RTOL * new.abs().max(1e-300) {
                break;
            }
        }
    }
    Ok(Local { x, iterations })
}

/// Moves `x` toward a feasible `anchor` along the segment until the hom
/// constraints hold; both ends satisfy the ensemble constraint, so every
/// point between them does too.
fn restore(ctx: &Ctx, x: &SymMatrix, anchor: &SymMatrix) -> Result<SymMatrix> {
    let blend = |theta: f64| {
        SymMatrix::from_fn(x.n(), |i, j| (1.0 - theta) * x.get(i, j) + theta * anchor.get(i, j))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if ctx.feasible(&ctx.homs(&blend(mid))?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(blend(hi))
}

/// A point meeting the ensemble constraint with homomorphism counts as large
/// as practical, used as a restoration anchor.
fn dense_anchor(problem: &SolveProblem) -> Option<SymMatrix> {
    let n = problem.n;
    match problem.constraint {
        EnsembleConstraint::None => Some(SymMatrix::constant(n, 1.0)),
        EnsembleConstraint::TotalWeight { m } => {
            // the largest clique the weight affords, leftover spread evenly
            let mut s = 1;
            while s < n && ((s + 1) * s / 2) as f64 <= m {
                s += 1;
            }
            let inside = (s * (s - 1) / 2) as f64;
            let outside = (n * (n - 1) / 2) as f64 - inside;
            let q = if outside > 0.0 { (m - inside) / outside } else { 0.0 };
            Some(SymMatrix::from_fn(n, |_, j| if j < s { 1.0 } else { q }))
        }
        EnsembleConstraint::RowSums { d } => {
            // disjoint copies of K_{d+1}, remaining vertices spread uniformly
            let d_int = d.round() as usize;
            if (d - d_int as f64).abs() > 1e-12 || d_int == 0 {
                return None;
            }
            let s = d_int + 1;
            let mut k = n / s;
            while k > 0 && n - k * s != 0 && n - k * s < s + 1 {
                k -= 1;
            }
            let rest = n - k * s;
            let q = if rest > 1 { d / (rest - 1) as f64 } else { 0.0 };
            if q > 1.0 {
                return None;
            }
            let group = |i: usize| if i < k * s { i / s } else { k };
            Some(SymMatrix::from_fn(n, |i, j| {
                match (group(i), group(j)) {
                    (a, b) if a != b => 0.0,
                    (a, _) if a < k => 1.0,
                    _ => q,
                }
            }))
        }
    }
}

fn construction_seeds(problem: &SolveProblem) -> Vec<(String, BlockSpec)> {
    let n = problem.n;
    let p = problem.base.p();
    let pairs = (n * (n - 1) / 2) as f64;
    let mut out = Vec::new();
    for (k, (h, t)) in problem.targets.iter().enumerate() {
        let delta = t - 1.0;
        if delta <= 0.0 {
            continue;
        }
        let core = two_core(h).graph;
        match problem.constraint {
            EnsembleConstraint::None | EnsembleConstraint::TotalWeight { .. } => {
                let m = match problem.constraint {
                    EnsembleConstraint::TotalWeight { m } => m.round() as u64,
                    _ => (p * pairs).round() as u64,
                };
                let mut shapes = Vec::new();
                if let Ok(theta) = theta_root(h, delta) {
                    shapes.push(("hub", theta, 0.0));
                }
                if h.is_regular() {
                    let v = h.vertex_count() as f64;
                    shapes.push(("clique", 0.0, delta.powf(1.0 / v)));
                }
                if let Ok(r) = c_er(h, delta) {
                    if let Some((x, y)) = r.witness {
                        shapes.push(("rate-witness", x, y));
                    }
                }
                for (name, x, y) in shapes {
                    if let Ok(b) = build_clique_hub(n, m, x, y, h.max_degree()) {
                        out.push((format!("{name} #{k}"), b));
                    }
                }
            }
            EnsembleConstraint::RowSums { d } => {
                let d = d.round() as usize;
                if core.vertex_count() == 0 {
                    continue;
                }
                let built = if core.is_regular() && core.max_degree() == 2 {
                    build_cycle_blocks(n, d, delta, core.vertex_count())
                } else if core.is_regular() {
                    build_clique_block(n, d, delta, &core)
                } else {
                    build_irregular_dreg(n, d, &core, 1.0).map(|(b, _)| b)
                };
                if let Ok(b) = built {
                    out.push((format!("regular-construction #{k}"), b));
                }
            }
        }
    }
    out
}

struct Candidate {
    x: SymMatrix,
    value: f64,
    label: String,
    iterations: usize,
    order: usize,
}

/// Minimizes `½ I_p(X)` subject to the problem's constraints from every seed
/// and returns the best feasible point found.
pub fn solve_phi(problem: &SolveProblem) -> Result<SolveResult> {
    problem.validate()?;
    let n = problem.n;
    let ctx = Ctx {
        problem,
        pairs: (n * (n - 1) / 2) as f64,
    };
    let base = project_ensemble(&problem.base.matrix(n), problem.constraint)?;

    // targets at or below 1 are met by the base up to O(1/n)
    if problem.targets.iter().all(|(_, t)| *t <= 1.0) {
        let homs = ctx.homs(&base)?;
        return Ok(SolveResult {
            value: ctx.value(&base),
            normalized: normalized_for(problem, ctx.value(&base)),
            residuals: vec![0.0; homs.len()],
            ensemble_residual: ensemble_residual(&base, problem.constraint),
            x: base,
            seed_provenance: "base".into(),
            feasible_seeds: Vec::new(),
            iterations: 0,
        });
    }

    let mut seeds: Vec<(String, SymMatrix)> = Vec::new();
    if problem.default_seeds {
        seeds.push(("base".into(), base.clone()));
        // the base is often a symmetric stationary point of the constrained problem
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let shaken = SymMatrix::from_fn(n, |i, j| base.get(i, j) * (1.0 + rng.gen_range(-0.2..0.2)));
        if let Ok(x) = project_ensemble(&shaken, problem.constraint) {
            seeds.push(("perturbed base".into(), x));
        }
        for (label, b) in construction_seeds(problem) {
            if let Ok(x) = b.materialize() {
                seeds.push((label, x));
            }
        }
    }
    for (label, seed) in &problem.seeds {
        let x = match seed {
            Seed::Block(b) => b.materialize()?,
            Seed::Dense(x) => x.clone(),
        };
        if x.n() != n {
            return Err(Error::domain(format!("seed `{label}` has the wrong dimension")));
        }
        seeds.push((label.clone(), x));
    }

    let feasible_member = |x: &SymMatrix| -> Result<bool> {
        Ok(x.entries_within(0.0, 1.0)
            && ensemble_residual(x, problem.constraint) <= 1e-9
            && ctx.feasible(&ctx.homs(x)?))
    };

    // feasible seeds are candidates and restoration anchors in their own right
    let mut anchors: Vec<SymMatrix> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    for (order, (label, x)) in seeds.iter().enumerate() {
        if feasible_member(x)? {
            anchors.push(x.clone());
            candidates.push(Candidate {
                value: ctx.value(x),
                x: x.clone(),
                label: format!("{label} (as given)"),
                iterations: 0,
                order,
            });
        }
    }
    if let Some(a) = dense_anchor(problem) {
        if feasible_member(&a)? {
            anchors.push(a);
        }
    }

    // infeasible seeds pulled onto the constraint boundary
    let mut order = seeds.len();
    let mut restored: Vec<(String, SymMatrix)> = Vec::new();
    for (label, x) in &seeds {
        if feasible_member(x)? {
            continue;
        }
        let mut best: Option<(f64, SymMatrix)> = None;
        for a in &anchors {
            let r = restore(&ctx, x, a)?;
            let v = ctx.value(&r);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, r));
            }
        }
        if let Some((value, x)) = best {
            let label = format!("{label} (restored)");
            restored.push((label.clone(), x.clone()));
            candidates.push(Candidate {
                value,
                x,
                label,
                iterations: 0,
                order,
            });
            order += 1;
        }
    }
    let feasible_seeds: Vec<(String, f64)> = candidates
        .iter()
        .map(|c| (c.label.clone(), c.value))
        .collect();
    let offset = order;
    // restored seeds are refined too: unlike the originals they are not
    // symmetric stationary points
    let starts: Vec<&(String, SymMatrix)> = seeds.iter().chain(&restored).collect();
    let refined: Vec<Result<Option<Candidate>>> = starts
        .par_iter()
        .enumerate()
        .map(|(order, &(label, start))| {
            let local = local_solve(&ctx, start)?;
            let mut x = local.x;
            if !ctx.feasible(&ctx.homs(&x)?) {
                let mut best: Option<(f64, SymMatrix)> = None;
                for a in &anchors {
                    let r = restore(&ctx, &x, a)?;
                    let v = ctx.value(&r);
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, r));
                    }
                }
                match best {
                    Some((_, r)) => x = r,
                    None => return Ok(None),
                }
            }
            Ok(Some(Candidate {
                value: ctx.value(&x),
                x,
                label: label.clone(),
                iterations: local.iterations,
                order: offset + order,
            }))
        })
        .collect();
    for r in refined {
        if let Some(c) = r? {
            candidates.push(c);
        }
    }

    let best = candidates
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.order.cmp(&b.order)));
    let Some(best) = best else {
        // report the residuals of the least infeasible seed
        let mut least: Option<Vec<f64>> = None;
        for (_, x) in &seeds {
            let r = ctx.residuals(&ctx.homs(x)?);
            let worst = r.iter().copied().fold(0.0, f64::max);
            if least.as_ref().is_none_or(|l| worst < l.iter().copied().fold(0.0, f64::max)) {
                least = Some(r);
            }
        }
        return Err(Error::Infeasible {
            residuals: least.unwrap_or_default(),
        });
    };
    let homs = ctx.homs(&best.x)?;
    Ok(SolveResult {
        normalized: normalized_for(problem, best.value),
        residuals: ctx.residuals(&homs),
        ensemble_residual: ensemble_residual(&best.x, problem.constraint),
        value: best.value,
        x: best.x,
        seed_provenance: best.label,
        feasible_seeds,
        iterations: best.iterations,
    })
}

fn normalized_for(problem: &SolveProblem, value: f64) -> Option<f64> {
    let (h, _) = problem.targets.first()?;
    scale_anp(problem.n, problem.base.p(), core_degree(h)).ok().map(|a| value / a)
}

/// Max degree of the 2-core, or of `h` itself when the core is empty.
fn core_degree(h: &Graph) -> usize {
    let core = two_core(h).graph;
    if core.vertex_count() > 0 {
        core.max_degree()
    } else {
        h.max_degree()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockSolveResult {
    pub spec: BlockSpec,
    pub value: f64,
    pub normalized: Option<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

/// Coordinate search over the values and sizes of a block matrix for the
/// unconstrained problem with a scalar base, for `n` too large to
/// materialize. `start` must satisfy the hom constraints.
pub fn solve_blocks(
    n_targets: &[(Graph, f64)],
    p: f64,
    start: &BlockSpec,
    budget: usize,
) -> Result<BlockSolveResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p must lie in (0, 1), got {p}")));
    }
    let feasible = |b: &BlockSpec| -> Result<bool> {
        for (h, t) in n_targets {
            if b.hom_normalized(h, p)? < *t {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let value = |b: &BlockSpec| b.entropy(p).map(|e| 0.5 * e);
    if !feasible(start)? {
        return Err(Error::Infeasible {
            residuals: n_targets
                .iter()
                .map(|(h, t)| start.hom_normalized(h, p).map(|v| (t - v).max(0.0)))
                .collect::<Result<_>>()?,
        });
    }

    let mut sizes = start.sizes().to_vec();
    let mut vals = start.values_f64();
    let k = sizes.len();
    let mut best = value(start)?;
    let mut step = 0.25;
    let mut iterations = 0;
    let rebuild = |sizes: &[usize], vals: &[Vec<f64>]| BlockSpec::from_f64(sizes.to_vec(), vals.to_vec());

    while step > 1e-9 && iterations < budget {
        iterations += 1;
        let mut improved = false;
        for a in 0..k {
            for b in a..k {
                for dir in [-1.0, 1.0] {
                    let v = (vals[a][b] + dir * step).clamp(0.0, 1.0);
                    if v == vals[a][b] {
                        continue;
                    }
                    let mut trial = vals.clone();
                    trial[a][b] = v;
                    trial[b][a] = v;
                    let spec = rebuild(&sizes, &trial)?;
                    let tv = value(&spec)?;
                    if tv < best && feasible(&spec)? {
                        best = tv;
                        vals = trial;
                        improved = true;
                    }
                }
            }
        }
        // move a batch of vertices between blocks, batch scaled with the step
        let batch = ((step * sizes.iter().sum::<usize>() as f64 / 16.0) as usize).max(1);
        for a in 0..k {
            for b in 0..k {
                if a == b || sizes[a] <= batch {
                    continue;
                }
                let mut trial = sizes.clone();
                trial[a] -= batch;
                trial[b] += batch;
                let spec = rebuild(&trial, &vals)?;
                let tv = value(&spec)?;
                if tv < best && feasible(&spec)? {
                    best = tv;
                    sizes = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let spec = rebuild(&sizes, &vals)?;
    let n: usize = sizes.iter().sum();
    let normalized = n_targets
        .first()
        .and_then(|(h, _)| scale_anp(n, p, core_degree(h)).ok())
        .map(|a| best / a);
    Ok(BlockSolveResult {
        residuals: n_targets
            .iter()
            .map(|(h, t)| spec.hom_normalized(h, p).map(|v| (t - v).max(0.0)))
            .collect::<Result<_>>()?,
        spec,
        value: best,
        normalized,
        iterations,
    })
}
