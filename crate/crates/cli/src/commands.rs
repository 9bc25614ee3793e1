use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Result;
use clap::ValueEnum;
use serde_json::{json, Value};

use uptail::constructions::{
    build_clique_block, build_clique_hub, build_cycle_blocks, build_irregular_dreg,
    validate_membership, BlockSpec, Candidate,
};
use uptail::ensembles::{
    importance_tail_with_progress, mc_upper_tail_with_progress, sample_with, stream_rng, Ensemble,
    EnsembleSpec, SampleOptions, TailConfig, Threshold,
};
use uptail::graph::{f_exponent, two_core};
use uptail::rate::{b_h, c_er, c_joint, c_reg, p_range_check, scale_anp, BlockModelParams};
use uptail::solver::{solve_blocks, solve_phi, BaseMeasure, EnsembleConstraint, SolveProblem, DENSE_CAP};
use uptail::{hom_count, Graph, SymMatrix};

use crate::input::{graph_arg, graph_file, kernel_arg, tilt_arg, usage, Tilt};
use crate::output::{Format, Output};
use crate::{Command, EnsembleArgs, Model, TargetArgs};

/// Largest matrix written as CSV.
const CSV_MATRIX_CAP: usize = 2000;

/// Mixing weight toward the base for the built-in importance-sampling tilt.
const DEFAULT_TILT_ETA: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstructKind {
    CycleBlocks,
    CliqueBlock,
    CliqueHub,
    IrregularDreg,
}

pub fn run(command: Command, seed: u64, format: Format) -> Result<Output> {
    match command {
        Command::Hom { pattern, graph, graph_file: file, p } => {
            let h = graph_arg("pattern", &pattern)?;
            let g = match (graph, file) {
                (Some(g), _) => graph_arg("graph", &g)?,
                (None, Some(f)) => graph_file(&f)?,
                (None, None) => return Err(usage("one of --graph or --graph-file is required")),
            };
            hom(&h, &g, p)
        }
        Command::Rate { graph, delta, model, n, p, d, alpha, kernel } => {
            let h = graph_arg("graph", &graph)?;
            let scale = match (n, p, d) {
                (Some(n), Some(p), _) => Some((n, p)),
                (Some(n), None, Some(d)) => Some((n, d as f64 / n as f64)),
                (Some(_), None, None) => return Err(usage("--n needs --p or --d")),
                (None, Some(_), _) if model != Model::Block => return Err(usage("--p needs --n")),
                _ => None,
            };
            let block = if model == Model::Block {
                let p = p.ok_or_else(|| usage("block model needs --p"))?;
                Some(block_params(alpha, kernel, p)?)
            } else {
                None
            };
            rate(&h, delta, model, scale, block)
        }
        Command::JointRate { graphs, deltas } => {
            if graphs.len() != deltas.len() {
                return Err(usage("give one --delta per --graph"));
            }
            let hs = graphs.iter().map(|g| graph_arg("graph", g)).collect::<Result<Vec<_>>>()?;
            let report = c_joint(&hs, &deltas)?;
            Ok(Output::json(serde_json::to_value(report)?))
        }
        Command::Construct { kind, graph, n, d, m, p, delta, x, y } => {
            let h = graph_arg("graph", &graph)?;
            let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| usage(format!("{kind:?} needs --{flag}")));
            let need_d = || d.ok_or_else(|| usage(format!("{kind:?} needs --d")));
            let (spec, ensemble, extra) = match kind {
                ConstructKind::CycleBlocks => {
                    let (d, delta) = (need_d()?, need(delta, "delta")?);
                    if !(h.is_connected() && h.is_regular() && h.max_degree() == 2) {
                        return Err(usage("cycle-blocks needs a cycle pattern"));
                    }
                    let b = build_cycle_blocks(n, d, delta, h.vertex_count())?;
                    (b, Ensemble::Regular { d }, json!({}))
                }
                ConstructKind::CliqueBlock => {
                    let (d, delta) = (need_d()?, need(delta, "delta")?);
                    (build_clique_block(n, d, delta, &h)?, Ensemble::Regular { d }, json!({}))
                }
                ConstructKind::CliqueHub => {
                    let m = match (m, p) {
                        (Some(m), _) => m,
                        (None, Some(p)) => (p * pairs(n)).round() as u64,
                        (None, None) => return Err(usage("clique-hub needs --m or --p")),
                    };
                    let (x, y) = (x.unwrap_or(0.0), y.unwrap_or(0.0));
                    let b = build_clique_hub(n, m, x, y, h.max_degree())?;
                    (b, Ensemble::Uniform { m }, json!({}))
                }
                ConstructKind::IrregularDreg => {
                    let (d, x) = (need_d()?, need(x, "x")?);
                    let (b, f) = build_irregular_dreg(n, d, &h, x)?;
                    let f_value = *f.numer() as f64 / *f.denom() as f64;
                    (b, Ensemble::Regular { d }, json!({"f_exponent": f.to_string(), "f_exponent_value": f_value}))
                }
            };
            construct(&h, spec, EnsembleSpec::new(n, ensemble)?, extra, format)
        }
        Command::Solve { targets, ensemble, budget } => {
            let (hs, ts) = target_list(&targets)?;
            let spec = ensemble_spec(&ensemble)?;
            solve(&spec, hs, ts, budget, format)
        }
        Command::Sample { ensemble, index, burn_in } => {
            let spec = ensemble_spec(&ensemble)?;
            let options = SampleOptions {
                switching_burn_in: burn_in,
                ..SampleOptions::default()
            };
            let s = sample_with(&spec, &options, &mut stream_rng(seed, index))?;
            let edges: Vec<[usize; 2]> = s.graph.edges().iter().map(|&(u, v)| [u, v]).collect();
            let mut table = String::from("u,v\n");
            for [u, v] in &edges {
                table.push_str(&format!("{u},{v}\n"));
            }
            Ok(Output {
                json: json!({
                    "n": spec.n,
                    "edge_count": edges.len(),
                    "edges": edges,
                    "approximate": s.approximate,
                    "seed": seed,
                    "index": index,
                }),
                table: Some(table),
            })
        }
        Command::TailMc { targets, ensemble, samples, two_pass, burn_in } => {
            let (hs, ts) = target_list(&targets)?;
            let spec = ensemble_spec(&ensemble)?;
            let mut config = TailConfig::new(samples, seed);
            if two_pass {
                config.threshold = Threshold::TwoPass;
            }
            let options = SampleOptions {
                switching_burn_in: burn_in,
                ..SampleOptions::default()
            };
            let progress = progress_printer();
            let est = mc_upper_tail_with_progress(&spec, &hs, &ts, &config, &options, Some(&progress))?;
            Ok(Output::json(serde_json::to_value(est)?))
        }
        Command::TailIs { targets, ensemble, samples, tilt, eta } => {
            let (hs, ts) = target_list(&targets)?;
            if let Some(eta) = eta {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(usage("--eta must lie in [0, 1]"));
                }
            }
            if tilt.is_none() && ensemble.model != Model::Er {
                return Err(usage("--tilt is required unless --model er"));
            }
            let user_tilt = tilt.as_deref().map(tilt_arg).transpose()?;
            let spec = ensemble_spec(&ensemble)?;
            tail_is(&spec, &hs, &ts, samples, seed, user_tilt, eta)
        }
        Command::Check { graph, n, p } => {
            let h = graph_arg("graph", &graph)?;
            let report = p_range_check(&h, n, p)?;
            if !report.within {
                eprintln!(
                    "warning: p = {p} is below the lower end {:.4e} of the asymptotic regime (ratio {:.3}); results are advisory",
                    report.lower, report.ratio
                );
            }
            Ok(Output::json(serde_json::to_value(report)?))
        }
    }
}

fn pairs(n: usize) -> f64 {
    n as f64 * (n as f64 - 1.0) / 2.0
}

fn block_params(alpha: Vec<f64>, kernel: Option<String>, p: f64) -> Result<BlockModelParams> {
    if alpha.is_empty() {
        return Err(usage("block model needs --alpha"));
    }
    let kernel = kernel.ok_or_else(|| usage("block model needs --kernel"))?;
    Ok(BlockModelParams::new(alpha, kernel_arg(&kernel)?, p)?)
}

/// Checks the model's required options, then builds the ensemble.
fn ensemble_spec(args: &EnsembleArgs) -> Result<EnsembleSpec> {
    let kind = match args.model {
        Model::Er => Ensemble::Er {
            p: args.p.ok_or_else(|| usage("er model needs --p"))?,
        },
        Model::Uniform => Ensemble::Uniform {
            m: args.m.ok_or_else(|| usage("uniform model needs --m"))?,
        },
        Model::Regular => Ensemble::Regular {
            d: args.d.ok_or_else(|| usage("regular model needs --d"))?,
        },
        Model::Block => {
            let p = args.p.ok_or_else(|| usage("block model needs --p"))?;
            Ensemble::BlockModel(block_params(args.alpha.clone(), args.kernel.clone(), p)?)
        }
    };
    Ok(EnsembleSpec::new(args.n, kind)?)
}

fn target_list(args: &TargetArgs) -> Result<(Vec<Graph>, Vec<f64>)> {
    if args.graphs.len() != args.ts.len() {
        return Err(usage("give one --t per --graph"));
    }
    let hs = args.graphs.iter().map(|g| graph_arg("graph", g)).collect::<Result<Vec<_>>>()?;
    Ok((hs, args.ts.clone()))
}

fn progress_printer() -> impl Fn(usize, usize) + Sync {
    let last = AtomicUsize::new(0);
    move |done, total| {
        let decile = done * 10 / total.max(1);
        if last.fetch_max(decile, Ordering::Relaxed) < decile {
            eprintln!("progress: {done}/{total} samples");
        }
    }
}

fn hom(h: &Graph, g: &Graph, p: Option<f64>) -> Result<Output> {
    let count = hom_count(h, g)?;
    let n = g.vertex_count() as f64;
    let density = count as f64 / n.powi(h.vertex_count() as i32);
    let mut out = json!({
        "hom_count": count,
        "density": density,
    });
    if let Some(p) = p {
        if !(p > 0.0 && p < 1.0) {
            return Err(usage(format!("--p must lie in (0, 1), got {p}")));
        }
        out["normalized"] = json!(density / p.powi(h.edge_count() as i32));
    }
    Ok(Output::json(out))
}

fn rate(
    h: &Graph,
    delta: f64,
    model: Model,
    scale: Option<(usize, f64)>,
    block: Option<BlockModelParams>,
) -> Result<Output> {
    let with_scale = |report: uptail::rate::RateReport, max_degree: usize| -> Result<Value> {
        let report = match scale {
            Some((n, p)) => report.with_normalization(n, p, max_degree)?,
            None => report,
        };
        Ok(serde_json::to_value(report)?)
    };
    let mut out = match model {
        Model::Er | Model::Uniform => with_scale(c_er(h, delta)?, h.max_degree())?,
        Model::Regular => {
            let core = two_core(h).graph;
            if core.vertex_count() == 0 {
                return Err(uptail::Error::Domain("pattern is a forest; its 2-core is empty".into()).into());
            }
            let mut out = with_scale(c_reg(&core, delta)?, core.max_degree())?;
            if !core.is_regular() {
                let f = f_exponent(&core)?;
                out["f_exponent"] = json!(f.to_string());
            }
            out["h_used"] = serde_json::to_value(&core)?;
            out
        }
        Model::Block => {
            let params = block.expect("block params are validated by the caller");
            let b = b_h(h, &params)?;
            let mut out = json!({"b_h": b, "delta": delta, "target": (1.0 + delta) * b});
            if let Some((n, p)) = scale {
                out["a_np"] = json!(scale_anp(n, p, h.max_degree())?);
            }
            out
        }
    };
    out["model"] = json!(model_name(model));
    Ok(Output::json(out))
}

fn model_name(model: Model) -> &'static str {
    match model {
        Model::Er => "er",
        Model::Uniform => "uniform",
        Model::Regular => "regular",
        Model::Block => "block",
    }
}

fn matrix_table(x: &SymMatrix) -> Result<Option<String>> {
    if x.n() > CSV_MATRIX_CAP {
        return Err(uptail::Error::Resource(format!("CSV matrix output is limited to n <= {CSV_MATRIX_CAP}")).into());
    }
    Ok(Some(x.to_csv()))
}

fn construct(h: &Graph, spec: BlockSpec, ensemble: EnsembleSpec, extra: Value, format: Format) -> Result<Output> {
    let p = ensemble.base_p().expect("construction ensembles have a scalar p");
    let membership = validate_membership(Candidate::Block(&spec), &ensemble);
    let core = two_core(h).graph;
    let entropy = spec.entropy(p)?;
    let a_np = scale_anp(spec.n(), p, core.max_degree().max(2))?;
    let mut out = json!({
        "n": spec.n(),
        "p": p,
        "spec": spec,
        "membership": membership,
        "entropy": entropy,
        "normalized_half_entropy": entropy / (2.0 * a_np),
        "hom_normalized": spec.hom_normalized(h, p)?,
    });
    if let Value::Object(extra) = extra {
        out.as_object_mut().expect("object").extend(extra);
    }
    let table = if format == Format::Csv { matrix_table(&spec.materialize()?)? } else { None };
    Ok(Output { json: out, table })
}

fn solve(spec: &EnsembleSpec, hs: Vec<Graph>, ts: Vec<f64>, budget: usize, format: Format) -> Result<Output> {
    if ts.iter().any(|&t| t < 1.0) {
        eprintln!("warning: targets below 1 are treated as 1");
    }
    let p = spec.base_p().expect("CLI models have a scalar p");
    let n = spec.n;
    let (base, constraint, targets) = match &spec.kind {
        Ensemble::Er { p } => (BaseMeasure::Scalar(*p), EnsembleConstraint::None, hs.into_iter().zip(ts).collect::<Vec<_>>()),
        Ensemble::Uniform { m } => (BaseMeasure::Scalar(p), EnsembleConstraint::TotalWeight { m: *m as f64 }, hs.into_iter().zip(ts).collect()),
        Ensemble::Regular { d } => (BaseMeasure::Scalar(p), EnsembleConstraint::RowSums { d: *d as f64 }, hs.into_iter().zip(ts).collect()),
        Ensemble::BlockModel(params) => {
            let probs = spec.edge_probabilities().expect("block model has edge probabilities");
            let targets = hs
                .into_iter()
                .zip(ts)
                .map(|(h, t)| b_h(&h, params).map(|b| (h, t * b)))
                .collect::<uptail::Result<Vec<_>>>()?;
            (BaseMeasure::Matrix { probs, p: params.p }, EnsembleConstraint::None, targets)
        }
        Ensemble::Planted { .. } => unreachable!("not reachable from the command line"),
    };

    if n > DENSE_CAP {
        return solve_large(spec, &base, constraint, &targets, budget, format);
    }
    let mut problem = SolveProblem::new(n, base, targets).with_constraint(constraint);
    problem.budget = budget;
    let result = solve_phi(&problem)?;
    let mut out = serde_json::to_value(&result)?;
    out["model"] = json!(model_of(spec));
    out["n"] = json!(n);
    out["p"] = json!(p);
    let table = if format == Format::Csv { matrix_table(&result.x)? } else { None };
    Ok(Output { json: out, table })
}

/// Block-parameterized solve for ER beyond the dense cap, started from the
/// clique/hub construction at the rate witness.
fn solve_large(
    spec: &EnsembleSpec,
    base: &BaseMeasure,
    constraint: EnsembleConstraint,
    targets: &[(Graph, f64)],
    budget: usize,
    format: Format,
) -> Result<Output> {
    let p = match (base, constraint) {
        (BaseMeasure::Scalar(p), EnsembleConstraint::None) => *p,
        _ => {
            return Err(uptail::Error::Resource(format!(
                "n > {DENSE_CAP} is supported only for the er model"
            ))
            .into())
        }
    };
    let start = witness_construction(spec.n, p, targets)?;
    let result = solve_blocks(targets, p, &start, budget)?;
    let mut out = serde_json::to_value(&result)?;
    out["model"] = json!("er");
    out["n"] = json!(spec.n);
    out["p"] = json!(p);
    let table = if format == Format::Csv { matrix_table(&result.spec.materialize()?)? } else { None };
    Ok(Output { json: out, table })
}

/// Clique/hub block matrix at the joint-rate witness for `δ_i = t_i − 1`.
/// At small `n` the witness blocks can round away, so the pure clique and
/// the pure hub shapes are tried next.
fn witness_construction(n: usize, p: f64, targets: &[(Graph, f64)]) -> Result<BlockSpec> {
    let hs: Vec<Graph> = targets.iter().map(|(h, _)| h.clone()).collect();
    let deltas: Vec<f64> = targets.iter().map(|(_, t)| (t - 1.0).max(0.0)).collect();
    let report = c_joint(&hs, &deltas)?;
    let m = (p * pairs(n)).round() as u64;
    let max_degree = hs.iter().map(Graph::max_degree).max().unwrap_or(2);

    let mut shapes = vec![report.witness.unwrap_or((0.0, 0.0))];
    if hs.iter().all(Graph::is_regular) {
        let y = hs
            .iter()
            .zip(&deltas)
            .map(|(h, d)| d.powf(1.0 / h.vertex_count() as f64))
            .fold(0.0, f64::max);
        shapes.push((0.0, y));
    }
    let x = hs
        .iter()
        .zip(&deltas)
        .map(|(h, &d)| uptail::rate::theta_root(h, d))
        .collect::<uptail::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    shapes.push((x, 0.0));

    let mut last = None;
    for (x, y) in shapes {
        match build_clique_hub(n, m, x, y, max_degree) {
            Ok(b) => return Ok(b),
            Err(e) => last = Some(e),
        }
    }
    let e = last.expect("at least one shape was tried");
    Err(anyhow::Error::new(e).context("no default tilt at these parameters; pass --tilt"))
}

fn model_of(spec: &EnsembleSpec) -> &'static str {
    match spec.kind {
        Ensemble::Er { .. } => "er",
        Ensemble::Uniform { .. } => "uniform",
        Ensemble::Regular { .. } => "regular",
        Ensemble::BlockModel(_) => "block",
        Ensemble::Planted { .. } => "planted",
    }
}

fn tail_is(
    spec: &EnsembleSpec,
    hs: &[Graph],
    ts: &[f64],
    samples: usize,
    seed: u64,
    user_tilt: Option<Tilt>,
    eta: Option<f64>,
) -> Result<Output> {
    let p = spec.base_p().expect("CLI models have a scalar p");
    let (tilt, eta, source) = match user_tilt {
        Some(Tilt::Dense(x)) => (x, eta.unwrap_or(0.0), "user"),
        Some(Tilt::Block(b)) => (b.materialize()?, eta.unwrap_or(0.0), "user"),
        None => {
            let targets: Vec<(Graph, f64)> = hs.iter().cloned().zip(ts.iter().copied()).collect();
            let b = witness_construction(spec.n, p, &targets)?;
            (b.materialize()?, eta.unwrap_or(DEFAULT_TILT_ETA), "clique_hub_witness")
        }
    };
    if tilt.n() != spec.n {
        return Err(usage(format!("tilt has dimension {}, expected {}", tilt.n(), spec.n)));
    }
    let base = spec.edge_probabilities().expect("importance sampling models are independent-edge");
    let mixed = SymMatrix::from_fn(spec.n, |i, j| (1.0 - eta) * tilt.get(i, j) + eta * base.get(i, j));
    let progress = progress_printer();
    let est = importance_tail_with_progress(spec, &mixed, hs, ts, &TailConfig::new(samples, seed), Some(&progress))?;
    let mut out = serde_json::to_value(est)?;
    out["tilt"] = json!(source);
    out["eta"] = json!(eta);
    Ok(Output::json(out))
}
