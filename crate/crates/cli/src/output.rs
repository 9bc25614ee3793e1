use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Human,
}

/// A command's result. `table` overrides the default CSV rendering.
pub struct Output {
    pub json: Value,
    pub table: Option<String>,
}

impl Output {
    pub fn json(json: Value) -> Self {
        Output { json, table: None }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => format!("{}\n", self.json),
            Format::Csv => self.table.clone().unwrap_or_else(|| csv_row(&self.json)),
            Format::Human => human(&self.json),
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Header line plus one data line of the flattened fields.
fn csv_row(v: &Value) -> String {
    let mut fields = Vec::new();
    flatten("", v, &mut fields);
    let header: Vec<String> = fields.iter().map(|(k, _)| quote(k)).collect();
    let row: Vec<String> = fields.iter().map(|(_, v)| quote(v)).collect();
    format!("{}\n{}\n", header.join(","), row.join(","))
}

fn human(v: &Value) -> String {
    let mut fields = Vec::new();
    flatten("", v, &mut fields);
    let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    fields
        .iter()
        .map(|(k, v)| format!("{k:<width$}  {v}\n"))
        .collect()
}
