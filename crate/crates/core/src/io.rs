//! Tabular CSV input shared by trajectory loading and data ingestion.

use std::io::BufRead;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// A parsed CSV file: header plus raw string cells.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse(format!(
                "schema mismatch: column `{name}` not found (have {})",
                self.header.join(",")
            ))
        })
    }

    /// Selects a time column and variable columns. Every cell must be a
    /// finite number and the time column strictly increasing and evenly spaced.
    /// Row numbers in errors count data rows from 1.
    pub fn to_trajectory(&self, time_col: &str, vars: &[&str]) -> Result<Trajectory> {
        if vars.is_empty() {
            return Err(Error::Parse("schema lists no variable columns".into()));
        }
        let tcol = self.column(time_col)?;
        let vcols = vars.iter().map(|v| self.column(v)).collect::<Result<Vec<_>>>()?;
        let cell = |row: usize, col: usize| -> Result<f64> {
            let raw = self.rows[row].get(col).map(String::as_str).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::Parse(format!(
                    "missing value in row {} column `{}`",
                    row + 1,
                    self.header[col]
                )));
            }
            let v: f64 = raw.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {} column `{}`: `{raw}` is not a number",
                    row + 1,
                    self.header[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!(
                    "missing value in row {} column `{}`",
                    row + 1,
                    self.header[col]
                )));
            }
            Ok(v)
        };
        let mut times = Vec::with_capacity(self.rows.len());
        let mut states = Vec::with_capacity(self.rows.len());
        for r in 0..self.rows.len() {
            let t = cell(r, tcol)?;
            if let Some(&prev) = times.last() {
                if t <= prev {
                    return Err(Error::Parse(format!(
                        "time not strictly increasing at row {}",
                        r + 1
                    )));
                }
            }
            times.push(t);
            states.push(vcols.iter().map(|&c| cell(r, c)).collect::<Result<Vec<_>>>()?);
        }
        let step = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Trajectory::new(vars.iter().map(|s| s.to_string()).collect(), times, states, step)
    }
}
