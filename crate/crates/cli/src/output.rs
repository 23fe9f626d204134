//! Tables and reports written as CSV or JSON, each JSON document carrying
//! the effective config.

use crate::config::{Format, Settings};
use crate::svg::Plot;
use crate::CliError;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Written here instead of `<out-dir>/<name>.<ext>`.
    pub path: Option<PathBuf>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), path: None }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match r[j] {
                    Cell::Num(v) => v,
                    Cell::Int(v) => v as f64,
                    _ => f64::NAN,
                })
                .collect(),
        )
    }

    fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).map_err(io_err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::csv)).map_err(io_err)?;
        }
        w.into_inner().map_err(|e| CliError::Config(format!("csv: {e}")))
    }

    fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("cannot write output: {e}"))
}

/// Collects the outputs of one command.
pub struct Output {
    pub command: String,
    pub settings: Settings,
    pub config: Value,
    pub tables: Vec<Table>,
    pub report: Option<Value>,
    pub plots: Vec<(String, Plot)>,
}

impl Output {
    pub fn new<C: Serialize>(command: &str, settings: &Settings, params: &C) -> Self {
        let config = json!({
            "command": command,
            "global": settings,
            "params": params,
            "version": env!("CARGO_PKG_VERSION"),
        });
        Self { command: command.into(), settings: settings.clone(), config, tables: Vec::new(), report: None, plots: Vec::new() }
    }

    pub fn report<T: Serialize>(&mut self, value: &T) -> Result<(), CliError> {
        self.report = Some(serde_json::to_value(value).map_err(|e| CliError::Numeric(e.to_string()))?);
        Ok(())
    }

    /// Writes everything and returns the paths in write order.
    pub fn finish(self) -> Result<Vec<PathBuf>, CliError> {
        let dir = &self.settings.out_dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        let mut written = Vec::new();
        match self.settings.format {
            Format::Csv => {
                for t in &self.tables {
                    let p = t.path.clone().unwrap_or_else(|| dir.join(format!("{}.csv", t.name)));
                    write(&p, &t.to_csv()?)?;
                    written.push(p);
                }
                let mut doc = json!({ "config": self.config });
                if let Some(r) = &self.report {
                    doc["report"] = r.clone();
                }
                let p = dir.join(format!("{}_report.json", self.command));
                write(&p, &pretty(&doc)?)?;
                written.push(p);
            }
            Format::Json => {
                let mut tables = serde_json::Map::new();
                for t in &self.tables {
                    if let Some(p) = &t.path {
                        let doc = json!({ "config": self.config, "table": t.to_json() });
                        write(p, &pretty(&doc)?)?;
                        written.push(p.clone());
                    } else {
                        tables.insert(t.name.clone(), t.to_json());
                    }
                }
                let mut doc = json!({ "config": self.config, "tables": tables });
                if let Some(r) = &self.report {
                    doc["report"] = r.clone();
                }
                let p = dir.join(format!("{}.json", self.command));
                write(&p, &pretty(&doc)?)?;
                written.push(p);
            }
        }
        if self.settings.svg {
            for (name, plot) in &self.plots {
                let p = dir.join(format!("{name}.svg"));
                write(&p, plot.render().as_bytes())?;
                written.push(p);
            }
        }
        Ok(written)
    }
}

fn pretty(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push(b'\n');
    Ok(s)
}

fn write(p: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    std::fs::write(p, bytes).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))
}
