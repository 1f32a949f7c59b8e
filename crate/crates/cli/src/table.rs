use std::collections::HashSet;
use std::fmt::Write as _;

use evsim_core::format::sig;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => sig(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(t) => {
                if t.contains([',', '"', '\n']) {
                    format!("\"{}\"", t.replace('"', "\"\""))
                } else {
                    t.clone()
                }
            }
            Cell::Empty => String::new(),
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
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("duplicate column header `{0}`")]
    DuplicateHeader(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// Which columns a plot of the table draws.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    /// Column whose distinct values split the rows into separate lines.
    pub series: Vec<String>,
}

/// Rectangular result table with unique headers.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub name: String,
    headers: Vec<String>,
    rows: Vec<Vec<Cell>>,
    /// Provenance note per column.
    pub notes: Vec<(String, String)>,
    pub plot: Option<PlotSpec>,
}

impl SweepTable {
    pub fn new(name: &str, headers: &[&str]) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for h in headers {
            if !seen.insert(*h) {
                return Err(TableError::DuplicateHeader(h.to_string()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
            plot: None,
        })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<(), TableError> {
        if row.len() != self.headers.len() {
            return Err(TableError::Ragged { row: self.rows.len(), got: row.len(), expected: self.headers.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn note(mut self, column: &str, text: &str) -> Self {
        self.notes.push((column.to_string(), text.to_string()));
        self
    }

    pub fn with_plot(mut self, x: &str, y: &str, series: &[&str]) -> Self {
        self.plot = Some(PlotSpec {
            x: x.to_string(),
            y: y.to_string(),
            series: series.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn column(&self, name: &str) -> Result<usize, TableError> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn notes_text(&self) -> String {
        let mut out = String::new();
        for (c, n) in &self.notes {
            let _ = writeln!(out, "{c}: {n}");
        }
        out
    }
}
