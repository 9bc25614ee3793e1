use std::fmt;
use std::fs;

use anyhow::{Context, Result};

use uptail::constructions::BlockSpec;
use uptail::{parse_graph, Graph, SymMatrix};

/// Bad or missing command-line input, detected before any computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `@path` reads the file, anything else is taken literally.
fn resolve(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("reading {path}"))
            .map_err(|e| usage(format!("{e:#}"))),
        None => Ok(arg.to_string()),
    }
}

pub fn graph_arg(flag: &str, arg: &str) -> Result<Graph> {
    let text = resolve(arg)?;
    parse_graph(&text).map_err(|e| usage(format!("--{flag}: {e}")))
}

pub fn graph_file(path: &str) -> Result<Graph> {
    graph_arg("graph-file", &format!("@{path}"))
}

pub fn kernel_arg(text: &str) -> Result<Vec<Vec<f64>>> {
    serde_json::from_str(text).map_err(|e| usage(format!("--kernel: expected a JSON matrix: {e}")))
}

pub enum Tilt {
    Dense(SymMatrix),
    Block(BlockSpec),
}

/// A tilt is either a CSV matrix or a JSON block spec, inline or from `@file`.
pub fn tilt_arg(arg: &str) -> Result<Tilt> {
    let text = resolve(arg)?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let spec: BlockSpec =
            serde_json::from_str(trimmed).map_err(|e| usage(format!("--tilt: bad block spec: {e}")))?;
        return Ok(Tilt::Block(spec));
    }
    let mut rows = Vec::new();
    for (k, line) in trimmed.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("--tilt: line {}: {e}", k + 1)))?;
        rows.push(row);
    }
    let m = SymMatrix::from_rows(rows).map_err(|e| usage(format!("--tilt: {e}")))?;
    Ok(Tilt::Dense(m))
}
