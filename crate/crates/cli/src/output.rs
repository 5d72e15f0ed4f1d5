//! Headered CSV rendering. Lines starting with `#` carry provenance only.

use crate::settings::Settings;
use std::fmt::Write;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, command: &str, settings: &Settings) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# privleak {} {command}", env!("CARGO_PKG_VERSION"));
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let _ = writeln!(out, "# generated_unix={secs}");
        for (k, v) in settings.iter() {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str(&self.body());
        out
    }

    /// CSV without the provenance header.
    pub fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.9}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Strips `#` lines, leaving the deterministic part of an output.
pub fn strip_header(csv: &str) -> String {
    csv.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}
