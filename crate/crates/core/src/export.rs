//! CSV, JSON and SVG exports of a [`RunRecord`].
//!
//! Reals are written with six decimals; the JSON document carries the same
//! rounded values as the CSV files.

use crate::scenarios::RunRecord;
use serde_json::{Map, Number, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{0} already exists (pass --force to overwrite)")]
    Exists(PathBuf),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    /// Already rounded to six decimals.
    Real(String),
    Text(String),
}

impl Cell {
    fn real(v: f64) -> Cell {
        let s = format!("{v:.6}");
        Cell::Real(if s == "-0.000000" { "0.000000".to_string() } else { s })
    }

    fn text(&self) -> &str {
        match self {
            Cell::Real(s) | Cell::Text(s) => s,
            Cell::Int(_) => unreachable!(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Real(s) => Number::from_f64(s.parse().unwrap_or(0.0)).map_or(Value::Null, Value::Number),
            Cell::Text(s) => Value::from(s.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => {
                        let _ = write!(out, "{v}");
                    }
                    other => out.push_str(other.text()),
                }
            }
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let object: Map<String, Value> =
                        self.header.iter().zip(row).map(|(k, c)| (k.to_string(), c.to_json())).collect();
                    Value::Object(object)
                })
                .collect(),
        )
    }
}

/// The five export tables, in file order.
pub fn tables(record: &RunRecord) -> Vec<Table> {
    let mut trajectories = Vec::new();
    let mut errors = Vec::new();
    let mut global = Vec::new();
    for f in &record.frames {
        for (id, p) in &f.positions {
            trajectories.push(vec![Cell::Int(f.frame), Cell::Int(id.0), Cell::real(p.x), Cell::real(p.y)]);
        }
        for (id, e) in &f.errors {
            errors.push(vec![Cell::Int(f.frame), Cell::Int(id.0), Cell::real(*e)]);
        }
        global.push(vec![Cell::Int(f.frame), Cell::real(f.global_error)]);
    }
    let events = record
        .events
        .iter()
        .map(|e| vec![Cell::Text(e.kind.label().to_string()), Cell::Int(e.node.0), Cell::Int(e.term.0), Cell::Int(e.frame)])
        .collect();
    let last = record
        .final_positions
        .iter()
        .map(|(id, p)| vec![Cell::Int(id.0), Cell::real(p.x), Cell::real(p.y)])
        .collect();
    vec![
        Table { name: "trajectories", header: &["frame", "agent", "x", "y"], rows: trajectories },
        Table { name: "errors", header: &["frame", "agent", "error"], rows: errors },
        Table { name: "global", header: &["frame", "E"], rows: global },
        Table { name: "events", header: &["type", "node", "term", "frame"], rows: events },
        Table { name: "final", header: &["agent", "x", "y"], rows: last },
    ]
}

/// All five tables in one document, keyed by table name.
pub fn to_json(record: &RunRecord) -> String {
    let mut doc = Map::new();
    doc.insert("scenario".into(), Value::from(record.label.as_str()));
    doc.insert("seed".into(), Value::from(record.seed));
    for table in tables(record) {
        doc.insert(table.name.into(), table.to_json());
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).unwrap_or_default();
    text.push('\n');
    text
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// A line chart of several series, as a standalone SVG document.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h, pad) = (640.0, 480.0, 50.0);
    let points = series.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{x_label}</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{y_label}</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (text, x, y) in [(x0, pad, h - pad + 15.0), (x1, w - pad, h - pad + 15.0)] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="10">{text:.2}</text>"#);
    }
    for (text, y) in [(y0, h - pad), (y1, pad)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end" font-size="10">{text:.2}</text>"#, pad - 4.0);
    }
    for (i, (name, s)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if k == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{name}</text>"#,
            w - pad + 4.0,
            pad + 14.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn plots(record: &RunRecord) -> Vec<(&'static str, String)> {
    let mut paths: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    let mut errors: std::collections::BTreeMap<u64, Vec<(f64, f64)>> = Default::default();
    for f in &record.frames {
        for (id, p) in &f.positions {
            paths.entry(id.0).or_default().push((p.x, p.y));
        }
        for (id, e) in &f.errors {
            errors.entry(id.0).or_default().push((f.frame as f64, *e));
        }
    }
    let named = |m: std::collections::BTreeMap<u64, Vec<(f64, f64)>>| {
        m.into_iter().map(|(id, s)| (format!("agent {id}"), s)).collect::<Vec<_>>()
    };
    vec![
        ("trajectories.svg", line_chart("Agent trajectories", "x", "y", &named(paths))),
        ("errors.svg", line_chart("Distance to goal", "frame", "error", &named(errors))),
    ]
}

/// Writes the run into `dir` (created if missing). Refuses to replace an
/// existing file unless `force` is set. Returns the written paths.
pub fn write_outputs(
    record: &RunRecord,
    dir: &Path,
    format: Format,
    plot: bool,
    force: bool,
) -> Result<Vec<PathBuf>, ExportError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ExportError::Io { path, source }
    };
    let mut files: Vec<(String, String)> = match format {
        Format::Csv => tables(record).iter().map(|t| (format!("{}.csv", t.name), t.to_csv())).collect(),
        Format::Json => vec![("run.json".to_string(), to_json(record))],
    };
    if plot {
        files.extend(plots(record).into_iter().map(|(n, s)| (n.to_string(), s)));
    }
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let paths: Vec<PathBuf> = files.iter().map(|(name, _)| dir.join(name)).collect();
    if !force {
        if let Some(existing) = paths.iter().find(|p| p.exists()) {
            return Err(ExportError::Exists(existing.clone()));
        }
    }
    for (path, (_, contents)) in paths.iter().zip(&files) {
        std::fs::write(path, contents).map_err(io(path))?;
    }
    Ok(paths)
}
