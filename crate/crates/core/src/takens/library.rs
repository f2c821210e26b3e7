use crate::error::{Error, Result};

/// Delay vectors `[x(k), x(k-tau), ..., x(k-d*tau)]` over a scalar series,
/// addressed by their source time `k` (`d*tau <= k <= T`).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLibrary {
    series: Vec<f64>,
    d: usize,
    tau: usize,
}

/// Smallest series length that admits one delay vector.
pub fn min_series_len(d: usize, tau: usize) -> usize {
    d * tau + 1
}

pub fn build_delay_library(series: &[f64], d: usize, tau: usize) -> Result<DelayLibrary> {
    DelayLibrary::new(series.to_vec(), d, tau)
}

impl DelayLibrary {
    pub fn new(series: Vec<f64>, d: usize, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::Domain("delay stride tau must be at least 1".into()));
        }
        let min = min_series_len(d, tau);
        if series.len() < min {
            return Err(Error::SeriesTooShort {
                len: series.len(),
                min,
            });
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { series, d, tau })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Entries per delay vector.
    pub fn embedding_dim(&self) -> usize {
        self.d + 1
    }

    /// Samples spanned by one delay vector.
    pub fn window(&self) -> usize {
        self.d * self.tau
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }

    /// Index of the last sample, `T`.
    pub fn last_time(&self) -> usize {
        self.series.len() - 1
    }

    pub fn first_time(&self) -> usize {
        self.window()
    }

    /// Number of stored vectors, `T + 1 - d*tau`.
    pub fn len(&self) -> usize {
        self.series.len() - self.window()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Source times of the stored vectors, ascending.
    pub fn times(&self) -> std::ops::RangeInclusive<usize> {
        self.first_time()..=self.last_time()
    }

    /// The delay vector with source time `k`.
    pub fn vector(&self, k: usize) -> Vec<f64> {
        assert!(k >= self.window() && k < self.series.len(), "source time {k} outside library");
        (0..=self.d).map(|j| self.series[k - j * self.tau]).collect()
    }

    /// `x(k + i)`.
    pub fn future(&self, k: usize, i: usize) -> f64 {
        self.series[k + i]
    }

    /// Squared distances from `query` to the vectors at source times
    /// `start..start + out.len()`, accumulated lag by lag.
    pub(crate) fn dist2_block(&self, start: usize, query: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = out.len();
        for (j, q) in query.iter().enumerate() {
            let from = start - j * self.tau;
            for (o, x) in out.iter_mut().zip(&self.series[from..from + n]) {
                let e = x - q;
                *o += e * e;
            }
        }
    }

    /// Overwrites sample `k`, changing every vector that contains it.
    pub fn set_sample(&mut self, k: usize, v: f64) {
        self.series[k] = v;
    }

    /// Delay vector read out of a contiguous lag window
    /// `[x(k), x(k-1), ..., x(k-d*tau)]`.
    pub fn query_from_window(&self, window: &[f64]) -> Vec<f64> {
        (0..=self.d).map(|j| window[j * self.tau]).collect()
    }
}
