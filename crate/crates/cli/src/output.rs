use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::ser::{Serialize, SerializeMap, Serializer};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(x) => x.to_string(),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Text(t) => s.serialize_str(t),
            Cell::Num(x) => s.serialize_f64(*x),
            Cell::Int(n) => s.serialize_u64(*n),
            Cell::Bool(b) => s.serialize_bool(*b),
            Cell::Empty => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

struct Record<'a> {
    headers: &'a [&'static str],
    cells: &'a [Cell],
}

impl Serialize for Record<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.cells.len()))?;
        for (h, c) in self.headers.iter().zip(self.cells) {
            map.serialize_entry(h, c)?;
        }
        map.end()
    }
}

/// Where and how tables are written. CSV output starts with a provenance
/// comment; JSON is an array of flat objects keyed by the CSV headers.
pub struct Sink {
    pub format: Format,
    pub provenance: String,
}

impl Sink {
    pub fn write(&self, path: Option<&Path>, table: &Table) -> Result<(), CliError> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))?;
                let mut w = BufWriter::new(file);
                self.write_to(&mut w, table)?;
                w.flush()?;
            }
            None => {
                let stdout = io::stdout();
                let mut w = stdout.lock();
                self.write_to(&mut w, table)?;
                w.flush()?;
            }
        }
        Ok(())
    }

    fn write_to(&self, w: &mut dyn Write, table: &Table) -> Result<(), CliError> {
        match self.format {
            Format::Csv => {
                writeln!(w, "{}", self.provenance)?;
                let mut csv = csv::Writer::from_writer(w);
                csv.write_record(&table.headers)?;
                for row in &table.rows {
                    csv.write_record(row.iter().map(Cell::csv_field))?;
                }
                csv.flush()?;
            }
            Format::Json => {
                let records: Vec<Record> = table
                    .rows
                    .iter()
                    .map(|cells| Record {
                        headers: &table.headers,
                        cells,
                    })
                    .collect();
                serde_json::to_writer(&mut *w, &records).map_err(|e| CliError::Runtime(e.to_string()))?;
                writeln!(w)?;
            }
        }
        Ok(())
    }
}
