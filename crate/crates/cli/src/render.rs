//! Output formats: pretty JSON documents, CSV and aligned tables.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
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

/// A command result: the JSON document plus a flat view for CSV and tables.
pub struct Rendered {
    pub doc: Value,
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// `%g`-style formatting with `digits` significant digits.
pub fn sig(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -4 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits - 1, v);
        let (mantissa, e) = s.split_once('e').expect("exponent present");
        format!("{}e{}", trim_zeros(mantissa), e)
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        // shortest representation that parses back to the same double
        Cell::Float(v) => format!("{v:?}"),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

fn table_cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => sig(*v, 6),
        Cell::Text(s) => s.clone(),
    }
}

pub fn render(r: &Rendered, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&r.doc).expect("document serializes");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut out = r.headers.join(",");
            out.push('\n');
            for row in &r.rows {
                let cells: Vec<String> = row.iter().map(csv_cell).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out
        }
        Format::Table => {
            let cells: Vec<Vec<String>> = r
                .rows
                .iter()
                .map(|row| row.iter().map(table_cell).collect())
                .collect();
            let mut widths: Vec<usize> = r.headers.iter().map(|h| h.chars().count()).collect();
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let mut out = String::new();
            let line = |out: &mut String, items: &[String]| {
                let padded: Vec<String> = items
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:>w$}"))
                    .collect();
                let _ = writeln!(out, "{}", padded.join("  ").trim_end());
            };
            let head: Vec<String> = r.headers.iter().map(|h| h.to_string()).collect();
            line(&mut out, &head);
            for row in &cells {
                line(&mut out, row);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.1875, 6), "0.1875");
        assert_eq!(sig(2.0, 6), "2");
        assert_eq!(sig(std::f64::consts::PI, 6), "3.14159");
        assert_eq!(sig(1234567.0, 6), "1.23457e6");
        assert_eq!(sig(1.5e-7, 6), "1.5e-7");
        assert_eq!(sig(0.0, 6), "0");
    }

    #[test]
    fn csv_quotes_text() {
        assert_eq!(csv_cell(&Cell::Text("BF|SBF".into())), "BF|SBF");
        assert_eq!(csv_cell(&Cell::Text("a,b".into())), "\"a,b\"");
        assert_eq!(csv_cell(&Cell::Float(0.1)), "0.1");
    }
}
