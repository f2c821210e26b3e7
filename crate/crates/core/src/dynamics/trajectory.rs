use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Equally spaced samples of a multivariate time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    names: Vec<String>,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    step: f64,
}

impl Trajectory {
    /// Validates alignment, dimensions and uniform spacing.
    pub fn new(names: Vec<String>, times: Vec<f64>, states: Vec<Vec<f64>>, step: f64) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Dimension {
                expected: times.len(),
                actual: states.len(),
                context: "trajectory states vs times",
            });
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Domain(format!("sample step must be positive, got {step}")));
        }
        if let Some((k, s)) = states.iter().enumerate().find(|(_, s)| s.len() != names.len()) {
            return Err(Error::Dimension {
                expected: names.len(),
                actual: s.len(),
                context: if k == 0 { "trajectory row 0" } else { "trajectory row" },
            });
        }
        for (k, w) in times.windows(2).enumerate() {
            let dt = w[1] - w[0];
            if dt <= 0.0 {
                return Err(Error::Parse(format!(
                    "times not strictly increasing at row {}",
                    k + 1
                )));
            }
            if (dt - step).abs() > 1e-12 * (step + w[1].abs()) {
                return Err(Error::Invariant(format!(
                    "non-uniform spacing at row {}: {dt} vs step {step}",
                    k + 1
                )));
            }
        }
        Ok(Self {
            names,
            times,
            states,
            step,
        })
    }

    /// Samples at `t0 + k * step` (times computed by multiplication, not accumulation).
    pub fn from_states(names: Vec<String>, t0: f64, step: f64, states: Vec<Vec<f64>>) -> Result<Self> {
        let times = (0..states.len()).map(|k| t0 + k as f64 * step).collect();
        Self::new(names, times, states, step)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.names.len()
    }
    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }
    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// One variable as a scalar series.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keeps only the listed variables, in the listed order.
    pub fn project(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::Dimension {
                expected: self.dim(),
                actual: bad,
                context: "projection index",
            });
        }
        Ok(Self {
            names: indices.iter().map(|&i| self.names[i].clone()).collect(),
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(|s| indices.iter().map(|&i| s[i]).collect())
                .collect(),
            step: self.step,
        })
    }

    /// Rows `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            names: self.names.clone(),
            times: self.times[range.clone()].to_vec(),
            states: self.states[range].to_vec(),
            step: self.step,
        }
    }

    pub(crate) fn map_states(&self, f: impl FnMut(&Vec<f64>) -> Vec<f64>) -> Self {
        Self {
            names: self.names.clone(),
            times: self.times.clone(),
            states: self.states.iter().map(f).collect(),
            step: self.step,
        }
    }

    /// Writes `t,<names...>` then one row per sample with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{}", fmt_f64(*t))?;
            for v in s {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let table = crate::io::CsvTable::read(r)?;
        let names: Vec<String> = table.header().iter().skip(1).cloned().collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        table.to_trajectory(table.header().first().map(String::as_str).unwrap_or("t"), &refs)
    }
}

/// 17 significant digits: round-trips every finite `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
