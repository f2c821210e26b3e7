use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::library::DelayLibrary;
use crate::error::{Error, Result};

/// Offset added to distances under inverse-distance weighting.
pub const INVERSE_DISTANCE_EPS: f64 = 1e-12;

/// Candidates whose distances are computed together.
const BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    InverseDistance,
}

impl std::str::FromStr for Weighting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "inverse_distance" => Ok(Self::InverseDistance),
            other => Err(Error::Parse(format!("unknown weighting `{other}`"))),
        }
    }
}

/// The κ nearest library vectors to a query, closest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub indices: Vec<usize>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Locally constant prediction `sum_s w_s x(k_s + i)`.
    pub fn predict(&self, lib: &DelayLibrary, i: usize) -> f64 {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| w * lib.future(k, i))
            .sum()
    }

    fn reweight(&mut self, weighting: Weighting) {
        let raw: Vec<f64> = match weighting {
            Weighting::Uniform => vec![1.0; self.len()],
            Weighting::InverseDistance => self
                .distances
                .iter()
                .map(|d| 1.0 / (d + INVERSE_DISTANCE_EPS))
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        self.weights = raw.into_iter().map(|w| w / total).collect();
    }
}

/// Which library vectors may serve as neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eligibility {
    /// Neighbors need `x(k + max_future)` to exist.
    pub max_future: usize,
    /// Excludes source times within `radius` of `center`.
    pub exclude: Option<(usize, usize)>,
}

impl Eligibility {
    pub fn future(max_future: usize) -> Self {
        Self {
            max_future,
            exclude: None,
        }
    }

    pub fn excluding(max_future: usize, center: usize, radius: usize) -> Self {
        Self {
            max_future,
            exclude: Some((center, radius)),
        }
    }

    /// Admitted source times as at most two ascending ranges.
    fn ranges(&self, lib: &DelayLibrary) -> [std::ops::Range<usize>; 2] {
        let first = lib.first_time();
        let end = (lib.last_time() + 1).saturating_sub(self.max_future).max(first);
        match self.exclude {
            Some((c, r)) => {
                let lo = c.saturating_sub(r).clamp(first, end);
                let hi = c.saturating_add(r).saturating_add(1).clamp(lo, end);
                [first..lo, hi..end]
            }
            None => [first..end, end..end],
        }
    }

    fn count(&self, lib: &DelayLibrary) -> usize {
        self.ranges(lib).iter().map(ExactSizeIterator::len).sum()
    }
}

/// Squared distance and source time, ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate(f64, usize);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// κ nearest eligible neighbors with uniform weights; ties go to the
/// smaller source time.
pub fn knn(lib: &DelayLibrary, query: &[f64], kappa: usize, max_future: usize) -> Result<NeighborSet> {
    knn_with(lib, query, kappa, Eligibility::future(max_future), Weighting::Uniform)
}

pub fn knn_with(
    lib: &DelayLibrary,
    query: &[f64],
    kappa: usize,
    eligibility: Eligibility,
    weighting: Weighting,
) -> Result<NeighborSet> {
    if query.len() != lib.embedding_dim() {
        return Err(Error::Dimension {
            expected: lib.embedding_dim(),
            actual: query.len(),
            context: "delay query",
        });
    }
    if kappa == 0 {
        return Err(Error::Domain("kappa must be at least 1".into()));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let available = eligibility.count(lib);
    if available < kappa {
        return Err(Error::InsufficientNeighbors {
            needed: kappa,
            available,
        });
    }
    // Times ascend, so a candidate tying the current worst never displaces it.
    let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(kappa + 1);
    let mut worst = f64::INFINITY;
    let mut block = [0.0; BLOCK];
    for range in eligibility.ranges(lib) {
        let mut start = range.start;
        while start < range.end {
            let n = BLOCK.min(range.end - start);
            lib.dist2_block(start, query, &mut block[..n]);
            for (i, &dist2) in block[..n].iter().enumerate() {
                if dist2 < worst {
                    best.push(Candidate(dist2, start + i));
                    if best.len() > kappa {
                        best.pop();
                    }
                    if best.len() == kappa {
                        worst = best.peek().map_or(f64::INFINITY, |c| c.0);
                    }
                }
            }
            start += n;
        }
    }
    let cand: Vec<Candidate> = best.into_sorted_vec();
    let mut set = NeighborSet {
        indices: cand.iter().map(|c| c.1).collect(),
        distances: cand.iter().map(|c| c.0.sqrt()).collect(),
        weights: vec![],
    };
    set.reweight(weighting);
    Ok(set)
}

/// Direct multi-step prediction of `x(T+1..=T+horizon)` from one neighbor
/// search on `query`.
pub fn direct_predict(
    lib: &DelayLibrary,
    query: &[f64],
    kappa: usize,
    horizon: usize,
    weighting: Weighting,
) -> Result<Vec<f64>> {
    let nb = knn_with(lib, query, kappa, Eligibility::future(horizon), weighting)?;
    Ok((1..=horizon).map(|i| nb.predict(lib, i)).collect())
}
