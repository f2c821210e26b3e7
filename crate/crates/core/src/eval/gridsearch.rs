use serde::{Deserialize, Serialize};

use super::srmse::std_dev;
use crate::error::{Error, Result};
use crate::takens::{build_delay_library, direct_predict, Weighting};

/// Candidate embedding hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingGrid {
    pub d: Vec<usize>,
    pub tau: Vec<usize>,
    pub kappa: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub d: usize,
    pub tau: usize,
    pub kappa: usize,
    /// Mean over horizons of the validation SRMSE.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: GridCell,
    /// Every evaluated cell, in grid order.
    pub evaluated: Vec<GridCell>,
    pub skipped: usize,
}

/// Validation score of one embedding: the last `tail` samples are held out,
/// the library is built on the rest, and every held-out origin with `horizon`
/// future samples is forecast directly.
fn score_cell(series: &[f64], d: usize, tau: usize, kappa: usize, horizon: usize, tail: usize, weighting: Weighting) -> Result<f64> {
    let split = series.len() - tail;
    let lib = build_delay_library(&series[..split], d, tau)?;
    let sd = std_dev(&series[..split]);
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let first = (split - 1).max(d * tau);
    let mut sq = vec![0.0; horizon];
    let mut n = 0usize;
    for origin in first..series.len() - horizon {
        let query: Vec<f64> = (0..=d).map(|j| series[origin - j * tau]).collect();
        let pred = direct_predict(&lib, &query, kappa, horizon, weighting)?;
        for (i, p) in pred.iter().enumerate() {
            sq[i] += (p - series[origin + i + 1]).powi(2);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: split + horizon,
        });
    }
    Ok(sq.iter().map(|s| (s / n as f64).sqrt() / sd).sum::<f64>() / horizon as f64)
}

/// Exhaustive search over `grid` for the embedding with the lowest
/// validation SRMSE on the last `tail` samples of `series`. Ties go to the
/// smaller `d`, then the smaller `kappa`, then the smaller `tau`. Cells the
/// series cannot support are skipped.
pub fn grid_search_embedding(
    series: &[f64],
    grid: &EmbeddingGrid,
    horizon: usize,
    tail: usize,
    weighting: Weighting,
) -> Result<GridSearchResult> {
    if grid.d.is_empty() || grid.tau.is_empty() || grid.kappa.is_empty() {
        return Err(Error::Domain("grid ranges must be nonempty".into()));
    }
    if horizon == 0 || tail <= horizon || tail >= series.len() {
        return Err(Error::Domain(format!(
            "need 0 < horizon < tail < series length, got horizon {horizon}, tail {tail}, length {}",
            series.len()
        )));
    }
    let mut evaluated = Vec::new();
    let mut skipped = 0;
    for &d in &grid.d {
        for &tau in &grid.tau {
            for &kappa in &grid.kappa {
                match score_cell(series, d, tau, kappa, horizon, tail, weighting) {
                    Ok(score) if score.is_finite() => evaluated.push(GridCell { d, tau, kappa, score }),
                    _ => skipped += 1,
                }
            }
        }
    }
    let best = evaluated
        .iter()
        .copied()
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.d.cmp(&b.d))
                .then(a.kappa.cmp(&b.kappa))
                .then(a.tau.cmp(&b.tau))
        })
        .ok_or_else(|| Error::Domain("every grid cell was skipped".into()))?;
    Ok(GridSearchResult {
        best,
        evaluated,
        skipped,
    })
}
