//! Random graph ensembles and Monte Carlo estimates of upper-tail probabilities.
//!
//! Every sample `i` draws from its own ChaCha8 stream `(seed, i)`, so results
//! do not depend on how samples are spread across threads.

use std::collections::HashSet;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hom::hom_count;
use crate::matrix::SymMatrix;
use crate::rate::{scale_anp, BlockModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Ensemble {
    Er { p: f64 },
    Uniform { m: u64 },
    Regular { d: usize },
    BlockModel(BlockModelParams),
    /// Independent edges with probabilities `x_ij`.
    Planted { x: SymMatrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    #[serde(flatten)]
    pub kind: Ensemble,
}

impl EnsembleSpec {
    pub fn new(n: usize, kind: Ensemble) -> Result<Self> {
        let spec = EnsembleSpec { n, kind };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        match &self.kind {
            Ensemble::Er { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::domain(format!("p must lie in [0, 1], got {p}")));
                }
            }
            Ensemble::Uniform { m } => {
                if *m as usize > pair_count(n) {
                    return Err(Error::domain(format!("m = {m} exceeds binom({n}, 2)")));
                }
            }
            Ensemble::Regular { d } => {
                if *d < 2 || d + 2 > n || (n * d) % 2 == 1 {
                    return Err(Error::domain(format!(
                        "need 2 <= d <= n - 2 with nd even, got n={n}, d={d}"
                    )));
                }
            }
            Ensemble::BlockModel(params) => params.validate()?,
            Ensemble::Planted { x } => {
                if x.n() != n {
                    return Err(Error::domain("planted matrix dimension differs from n"));
                }
                if !x.entries_within(0.0, 1.0) {
                    return Err(Error::domain("planted entries must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// The scalar `p` used to normalize homomorphism counts, if the model has one.
    pub fn base_p(&self) -> Option<f64> {
        match &self.kind {
            Ensemble::Er { p } => Some(*p),
            Ensemble::Uniform { m } => Some(*m as f64 / pair_count(self.n) as f64),
            Ensemble::Regular { d } => Some(*d as f64 / self.n as f64),
            Ensemble::BlockModel(params) => Some(params.p),
            Ensemble::Planted { .. } => None,
        }
    }

    /// Edge probability matrix for the independent-edge models.
    pub fn edge_probabilities(&self) -> Option<SymMatrix> {
        match &self.kind {
            Ensemble::Er { p } => Some(SymMatrix::constant(self.n, *p)),
            Ensemble::BlockModel(params) => {
                let block = block_assignment(&params.alpha, self.n);
                Some(SymMatrix::from_fn(self.n, |i, j| {
                    params.kernel[block[i]][block[j]] * params.p
                }))
            }
            Ensemble::Planted { x } => Some(x.clone()),
            _ => None,
        }
    }
}

fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Block sizes `≈ α_r n` by largest remainder, ties to the lower index.
pub fn block_sizes(alpha: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = alpha.iter().map(|a| a * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let short = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &r in order.iter().cycle().take(short) {
        sizes[r] += 1;
    }
    sizes
}

/// Block index of each vertex, blocks laid out consecutively.
pub fn block_assignment(alpha: &[f64], n: usize) -> Vec<usize> {
    block_sizes(alpha, n)
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect()
}

/// RNG for sample `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleOptions {
    /// Configuration-model attempts before giving up.
    pub max_retries: usize,
    /// If set, regular graphs come from this many switching moves applied to
    /// a circulant start instead of rejection; such samples are approximate.
    pub switching_burn_in: Option<usize>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            max_retries: 100_000,
            switching_burn_in: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub graph: Graph,
    /// True when the draw is not exactly from the target distribution.
    pub approximate: bool,
}

pub fn sample<R: Rng + ?Sized>(spec: &EnsembleSpec, rng: &mut R) -> Result<Graph> {
    Ok(sample_with(spec, &SampleOptions::default(), rng)?.graph)
}

pub fn sample_with<R: Rng + ?Sized>(
    spec: &EnsembleSpec,
    options: &SampleOptions,
    rng: &mut R,
) -> Result<Sampled> {
    spec.validate()?;
    let n = spec.n;
    let exact = |graph| Sampled {
        graph,
        approximate: false,
    };
    match &spec.kind {
        Ensemble::Uniform { m } => {
            let picks = index::sample(rng, pair_count(n), *m as usize);
            let mut codes: Vec<usize> = picks.into_iter().collect();
            codes.sort_unstable();
            let edges = decode_pairs(n, &codes);
            Ok(exact(Graph::new(n, edges)?))
        }
        Ensemble::Regular { d } => match options.switching_burn_in {
            None => Ok(exact(configuration_model(n, *d, options.max_retries, rng)?)),
            Some(steps) => {
                let mut edges = circulant(n, *d);
                switching_walk(&mut edges, steps, rng);
                Ok(Sampled {
                    graph: Graph::new(n, edges)?,
                    approximate: true,
                })
            }
        },
        _ => {
            let probs = spec.edge_probabilities().expect("independent-edge model");
            Ok(exact(independent_edges(&probs, rng)))
        }
    }
}

/// One uniform draw per pair in row-major order, so equal probability
/// matrices give identical graphs from identical streams.
fn independent_edges<R: Rng + ?Sized>(probs: &SymMatrix, rng: &mut R) -> Graph {
    let n = probs.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let u: f64 = rng.gen();
            if u < probs.get(i, j) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges).expect("pairs are distinct")
}

/// Maps sorted pair codes in `0..binom(n,2)` (row-major over `i < j`) to pairs.
fn decode_pairs(n: usize, sorted_codes: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sorted_codes.len());
    let (mut i, mut start) = (0usize, 0usize);
    for &c in sorted_codes {
        while c >= start + (n - 1 - i) {
            start += n - 1 - i;
            i += 1;
        }
        out.push((i, i + 1 + c - start));
    }
    out
}

fn configuration_model<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    max_retries: usize,
    rng: &mut R,
) -> Result<Graph> {
    let mut points: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..max_retries {
        points.shuffle(rng);
        let mut seen = HashSet::with_capacity(n * d / 2);
        for pair in points.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a == b || !seen.insert((a, b)) {
                continue 'attempt;
            }
        }
        return Graph::new(n, seen);
    }
    Err(Error::Sampling(format!(
        "configuration model found no simple {d}-regular graph on {n} vertices in {max_retries} attempts; \
         use the switching sampler"
    )))
}

/// Deterministic `d`-regular start: `i ~ i ± k` for `k ≤ d/2`, plus antipodes when `d` is odd.
fn circulant(n: usize, d: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(n * d / 2);
    for i in 0..n {
        for k in 1..=d / 2 {
            let j = (i + k) % n;
            edges.push((i.min(j), i.max(j)));
        }
        if d % 2 == 1 && i < n / 2 {
            edges.push((i, i + n / 2));
        }
    }
    edges
}

/// Applies `steps` attempted switchings `{uw, u1w1, u2w2} → {wu1, w1u2, w2u}`.
/// A move is skipped when the six endpoints are not distinct or a new edge exists.
fn switching_walk<R: Rng + ?Sized>(edges: &mut [(usize, usize)], steps: usize, rng: &mut R) {
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut present: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let m = edges.len();
    if m < 3 {
        return;
    }
    for _ in 0..steps {
        let picks = index::sample(rng, m, 3);
        let (e0, e1, e2) = (picks.index(0), picks.index(1), picks.index(2));
        let orient = |e: (usize, usize), flip: bool| if flip { (e.1, e.0) } else { e };
        let (u, w) = orient(edges[e0], rng.gen());
        let (u1, w1) = orient(edges[e1], rng.gen());
        let (u2, w2) = orient(edges[e2], rng.gen());
        let all = [u, w, u1, w1, u2, w2];
        let distinct = (0..6).all(|a| (a + 1..6).all(|b| all[a] != all[b]));
        if !distinct {
            continue;
        }
        let new = [key(w, u1), key(w1, u2), key(w2, u)];
        if new.iter().any(|e| present.contains(e)) {
            continue;
        }
        for &e in &[e0, e1, e2] {
            present.remove(&edges[e]);
        }
        edges[e0] = new[0];
        edges[e1] = new[1];
        edges[e2] = new[2];
        present.extend(new);
    }
}

/// How the tail event is thresholded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    /// `Hom(H_i, G) / (n^v p^e) ≥ t_i`.
    #[default]
    Analytic,
    /// `Hom(H_i, G) ≥ t_i · (sample mean of Hom(H_i, ·))`.
    TwoPass,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub samples: usize,
    pub seed: u64,
    pub threshold: Threshold,
    /// Accept tilts with entries 0 or 1 where the base probability is strictly between.
    pub allow_degenerate_tilt: bool,
}

impl TailConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        TailConfig {
            samples,
            seed,
            threshold: Threshold::Analytic,
            allow_degenerate_tilt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `−log(point)`; absent when the point estimate is 0.
    pub neg_log_point: Option<f64>,
    pub neg_log_ci_low: Option<f64>,
    pub neg_log_ci_high: Option<f64>,
    /// `−log(point) / a_{n,p}` when both are defined.
    pub normalized_rate: Option<f64>,
    pub samples: usize,
    /// Direct Monte Carlo only.
    pub hits: Option<usize>,
    /// Importance sampling only: `(Σw)² / Σw²` over the terms of the estimator.
    pub ess: Option<f64>,
    /// No sample hit the event; `ci_high` is the rule-of-three bound `3/N`.
    pub zero_hits: bool,
    pub approximate: bool,
}

fn neg_log(x: f64) -> Option<f64> {
    (x > 0.0).then(|| -x.ln())
}

fn finish_estimate(
    point: f64,
    se: f64,
    samples: usize,
    zero_hits: bool,
    a_np: Option<f64>,
) -> TailEstimate {
    let (ci_low, ci_high) = if zero_hits {
        (0.0, (3.0 / samples as f64).min(1.0))
    } else {
        ((point - 1.96 * se).max(0.0), (point + 1.96 * se).min(1.0))
    };
    let neg_log_point = neg_log(point);
    TailEstimate {
        point,
        ci_low,
        ci_high,
        neg_log_point,
        // −log is decreasing, so the interval endpoints swap
        neg_log_ci_low: neg_log(ci_high),
        neg_log_ci_high: neg_log(ci_low),
        normalized_rate: match (neg_log_point, a_np) {
            (Some(l), Some(a)) if a > 0.0 => Some(l / a),
            _ => None,
        },
        samples,
        hits: None,
        ess: None,
        zero_hits,
        approximate: false,
    }
}

fn check_targets(patterns: &[Graph], targets: &[f64], samples: usize) -> Result<()> {
    if patterns.is_empty() || patterns.len() != targets.len() {
        return Err(Error::domain("need one target per pattern and at least one pattern"));
    }
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::domain("targets must be finite"));
    }
    Ok(())
}

fn scale_for(spec: &EnsembleSpec, patterns: &[Graph]) -> Result<(f64, Vec<f64>)> {
    let p = spec
        .base_p()
        .ok_or_else(|| Error::domain("ensemble has no scalar base p for normalization"))?;
    if !(p > 0.0) {
        return Err(Error::domain("base p must be positive to normalize counts"));
    }
    let n = spec.n as f64;
    let scales = patterns
        .iter()
        .map(|h| n.powi(h.vertex_count() as i32) * p.powi(h.edge_count() as i32))
        .collect();
    Ok((p, scales))
}

fn a_np_for(spec: &EnsembleSpec, patterns: &[Graph], p: f64) -> Option<f64> {
    let delta = patterns.iter().map(Graph::max_degree).max()?;
    scale_anp(spec.n, p, delta).ok()
}

fn counts(g: &Graph, patterns: &[Graph]) -> Result<Vec<f64>> {
    patterns
        .iter()
        .map(|h| hom_count(h, g).map(|c| c as f64))
        .collect()
}

/// Progress callback receiving `(samples done, samples total)`.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

const CHUNK: usize = 2048;

/// Evaluates `f` on every sample index in parallel, in chunks, keeping order.
fn run_chunked<T: Send>(
    samples: usize,
    progress: Option<Progress<'_>>,
    f: impl Fn(u64) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(samples);
    let mut start = 0;
    while start < samples {
        let end = (start + CHUNK).min(samples);
        let chunk: Vec<T> = (start..end)
            .into_par_iter()
            .map(|i| f(i as u64))
            .collect::<Result<_>>()?;
        out.extend(chunk);
        start = end;
        if let Some(cb) = progress {
            cb(start, samples);
        }
    }
    Ok(out)
}

/// Direct Monte Carlo estimate of `P(∩_i {hom(H_i, G) ≥ t_i})`.
pub fn mc_upper_tail(
    spec: &EnsembleSpec,
    patterns: &[Graph],
    targets: &[f64],
    config: &TailConfig,
) -> Result<TailEstimate> {
    mc_upper_tail_with_progress(spec, patterns, targets, config, &SampleOptions::default(), None)
}

pub fn mc_upper_tail_with_progress(
    spec: &EnsembleSpec,
    patterns: &[Graph],
    targets: &[f64],
    config: &TailConfig,
    options: &SampleOptions,
    progress: Option<Progress<'_>>,
) -> Result<TailEstimate> {
    spec.validate()?;
    check_targets(patterns, targets, config.samples)?;
    let (p, scales) = scale_for(spec, patterns)?;
    let draws = run_chunked(config.samples, progress, |i| {
        let mut rng = stream_rng(config.seed, i);
        let s = sample_with(spec, options, &mut rng)?;
        Ok((counts(&s.graph, patterns)?, s.approximate))
    })?;
    let approximate = draws.iter().any(|d| d.1);

    let thresholds: Vec<f64> = match config.threshold {
        Threshold::Analytic => targets.iter().zip(&scales).map(|(t, s)| t * s).collect(),
        Threshold::TwoPass => (0..patterns.len())
            .map(|k| {
                let mean = draws.iter().map(|d| d.0[k]).sum::<f64>() / draws.len() as f64;
                targets[k] * mean
            })
            .collect(),
    };
    let hits = draws
        .iter()
        .filter(|d| d.0.iter().zip(&thresholds).all(|(c, th)| c >= th))
        .count();
    let n = config.samples as f64;
    let point = hits as f64 / n;
    let se = (point * (1.0 - point) / n).sqrt();
    let mut est = finish_estimate(point, se, config.samples, hits == 0, a_np_for(spec, patterns, p));
    est.hits = Some(hits);
    est.approximate = approximate;
    Ok(est)
}

/// Importance-sampled estimate: draws from independent edges with
/// probabilities `tilt` and reweights each sample by its likelihood ratio
/// against the base ensemble (ER or block model), computed in log space.
pub fn importance_tail(
    spec: &EnsembleSpec,
    tilt: &SymMatrix,
    patterns: &[Graph],
    targets: &[f64],
    config: &TailConfig,
) -> Result<TailEstimate> {
    importance_tail_with_progress(spec, tilt, patterns, targets, config, None)
}

pub fn importance_tail_with_progress(
    spec: &EnsembleSpec,
    tilt: &SymMatrix,
    patterns: &[Graph],
    targets: &[f64],
    config: &TailConfig,
    progress: Option<Progress<'_>>,
) -> Result<TailEstimate> {
    spec.validate()?;
    check_targets(patterns, targets, config.samples)?;
    if !matches!(spec.kind, Ensemble::Er { .. } | Ensemble::BlockModel(_)) {
        return Err(Error::domain("importance sampling supports the ER and block models"));
    }
    if config.threshold != Threshold::Analytic {
        return Err(Error::domain("importance sampling uses the analytic threshold only"));
    }
    let n = spec.n;
    if tilt.n() != n || !tilt.entries_within(0.0, 1.0) {
        return Err(Error::domain("tilt must be n × n with entries in [0, 1]"));
    }
    let base = spec.edge_probabilities().expect("independent-edge model");

    // per pair: log-ratio when the edge is present / absent
    let mut log_present = vec![0.0; n * n];
    let mut log_absent = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (p, x) = (base.get(i, j), tilt.get(i, j));
            let interior = p > 0.0 && p < 1.0;
            if interior && (x == 0.0 || x == 1.0) && !config.allow_degenerate_tilt {
                return Err(Error::domain(format!(
                    "tilt entry {x} at ({i},{j}) is degenerate where the base is {p}"
                )));
            }
            if (p == 0.0 && x > 0.0) || (p == 1.0 && x < 1.0) {
                return Err(Error::domain(format!(
                    "tilt at ({i},{j}) charges an outcome the base rules out"
                )));
            }
            log_present[i * n + j] = if x > 0.0 { p.ln() - x.ln() } else { 0.0 };
            log_absent[i * n + j] = if x < 1.0 { (1.0 - p).ln() - (1.0 - x).ln() } else { 0.0 };
        }
    }

    let (p, scales) = scale_for(spec, patterns)?;
    let thresholds: Vec<f64> = targets.iter().zip(&scales).map(|(t, s)| t * s).collect();
    let planted = EnsembleSpec {
        n,
        kind: Ensemble::Planted { x: tilt.clone() },
    };
    let draws: Vec<Option<f64>> = run_chunked(config.samples, progress, |i| {
        let mut rng = stream_rng(config.seed, i);
        let g = sample(&planted, &mut rng)?;
        let c = counts(&g, patterns)?;
        if !c.iter().zip(&thresholds).all(|(c, th)| c >= th) {
            return Ok(None);
        }
        let mut lw = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                lw += if g.has_edge(a, b) {
                    log_present[a * n + b]
                } else {
                    log_absent[a * n + b]
                };
            }
        }
        Ok(Some(lw))
    })?;

    let log_weights: Vec<f64> = draws.into_iter().flatten().collect();
    let samples = config.samples as f64;
    let a_np = a_np_for(spec, patterns, p);
    if log_weights.is_empty() {
        let mut est = finish_estimate(0.0, 0.0, config.samples, true, a_np);
        est.ess = Some(0.0);
        return Ok(est);
    }
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s1: f64 = log_weights.iter().map(|l| (l - top).exp()).sum();
    let s2: f64 = log_weights.iter().map(|l| (2.0 * (l - top)).exp()).sum();
    let point = (top + (s1 / samples).ln()).exp();
    let second = (2.0 * top + (s2 / samples).ln()).exp();
    let var = if config.samples > 1 {
        ((second - point * point) * samples / (samples - 1.0)).max(0.0)
    } else {
        0.0
    };
    let mut est = finish_estimate(point.min(1.0), (var / samples).sqrt(), config.samples, false, a_np);
    est.ess = Some(s1 * s1 / s2);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PittelReport {
    pub p_uniform: f64,
    pub p_er: f64,
    pub se_uniform: f64,
    pub se_er: f64,
    /// `3√m`.
    pub factor: f64,
    /// `P^(m)(A) / P_p(A)`, absent when `P_p(A)` is estimated as 0.
    pub ratio: Option<f64>,
    /// `P^(m)(A) − 3√m P_p(A)` exceeds three combined standard errors.
    pub violation: bool,
    /// Both estimates are 0.
    pub vacuous: bool,
}

/// Compares `P^(m)(A)` with `3√m · P_p(A)` at `p = m / binom(n, 2)` by Monte Carlo.
pub fn pittel_check(
    n: usize,
    m: u64,
    event: &(dyn Fn(&Graph) -> bool + Sync),
    samples: usize,
    seed: u64,
) -> Result<PittelReport> {
    if samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let uniform = EnsembleSpec::new(n, Ensemble::Uniform { m })?;
    let p = m as f64 / pair_count(n) as f64;
    let er = EnsembleSpec::new(n, Ensemble::Er { p })?;
    let estimate = |spec: &EnsembleSpec, offset: u64| -> Result<(f64, f64)> {
        let hits: Vec<bool> = (0..samples as u64)
            .into_par_iter()
            .map(|i| sample(spec, &mut stream_rng(seed, offset + i)).map(|g| event(&g)))
            .collect::<Result<_>>()?;
        let k = samples as f64;
        let pt = hits.iter().filter(|&&h| h).count() as f64 / k;
        Ok((pt, (pt * (1.0 - pt) / k).sqrt()))
    };
    let (pu, su) = estimate(&uniform, 0)?;
    let (pe, se) = estimate(&er, samples as u64)?;
    let factor = 3.0 * (m as f64).sqrt();
    let combined = (su * su + factor * factor * se * se).sqrt();
    Ok(PittelReport {
        p_uniform: pu,
        p_er: pe,
        se_uniform: su,
        se_er: se,
        factor,
        ratio: (pe > 0.0).then(|| pu / pe),
        violation: pu - factor * pe > 3.0 * combined,
        vacuous: pu == 0.0 && pe == 0.0,
    })
}
