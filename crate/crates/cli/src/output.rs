//! Tabular results with a provenance header, rendered as CSV or JSON.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn plain(self) -> String {
        match self {
            Cell::Num(x) => num(x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(t) => t,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(x) => json!(num(*x)),
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Num(x.unwrap_or(f64::NAN))
    }
}

/// Shortest round-trip decimal; non-finite values as `nan`, `inf`, `-inf`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

pub struct Table {
    pub command: String,
    pub config_hash: String,
    /// Ordered `(name, value)` tolerance entries.
    pub tolerances: Vec<(String, String)>,
    /// Ordered scalar results and notes.
    pub results: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

pub fn config_hash(canonical: &str) -> String {
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

/// Seconds since the Unix epoch, or `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> String {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        return v;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs().to_string())
        .unwrap_or_else(|_| "0".into())
}

impl Table {
    pub fn new(command: &str, config_hash: String, columns: &[&str]) -> Self {
        Self {
            command: command.into(),
            config_hash,
            tolerances: Vec::new(),
            results: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn tol(&mut self, name: &str, value: impl Into<Cell>) {
        self.tolerances.push((name.into(), value.into().plain()));
    }

    pub fn result(&mut self, name: &str, value: impl Into<Cell>) {
        self.results.push((name.into(), value.into().plain()));
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool: dptqfi {VERSION}");
        let _ = writeln!(out, "# command: {}", self.command);
        let _ = writeln!(out, "# config_sha256: {}", self.config_hash);
        let _ = writeln!(out, "# generated_unix: {}", timestamp());
        for (k, v) in &self.tolerances {
            let _ = writeln!(out, "# tolerance.{k}: {v}");
        }
        for (k, v) in &self.results {
            let _ = writeln!(out, "# result.{k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn json(&self) -> String {
        let pairs = |v: &[(String, String)]| {
            Value::Object(v.iter().map(|(k, s)| (k.clone(), json!(s))).collect::<Map<_, _>>())
        };
        let rows: Vec<Value> = self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
        let doc = json!({
            "tool": format!("dptqfi {VERSION}"),
            "command": self.command,
            "config_sha256": self.config_hash,
            "generated_unix": timestamp(),
            "tolerances": pairs(&self.tolerances),
            "results": pairs(&self.results),
            "columns": self.columns,
            "rows": rows,
        });
        // one key per line keeps the timestamp on its own line
        let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new("demo", "abc".into(), &["x", "label"]);
        t.tol("h", 1e-3);
        t.result("tau", f64::INFINITY);
        t.push(vec![0.5.into(), "a,b".into()]);
        let s = t.render(Format::Csv);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.iter().filter(|l| l.starts_with("# generated_unix")).count(), 1);
        assert!(lines.contains(&"# tolerance.h: 0.001"));
        assert!(lines.contains(&"# result.tau: inf"));
        assert_eq!(lines[lines.len() - 2], "x,label");
        assert_eq!(lines[lines.len() - 1], "0.5,\"a,b\"");
        let j: Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(j["rows"][0][0], json!(0.5));
    }
}
