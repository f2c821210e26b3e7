use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    /// Checks shape, finiteness, symmetry and positive semidefiniteness.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let b = Self { mean, cov };
        b.validate()?;
        Ok(b)
    }

    pub fn diagonal(mean: Vec<f64>, variances: &[f64]) -> Result<Self> {
        Self::new(
            DVector::from_vec(mean),
            DMatrix::from_diagonal(&DVector::from_column_slice(variances)),
        )
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if self.cov.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                actual: self.cov.nrows(),
                context: "belief covariance",
            });
        }
        if self.mean.iter().chain(self.cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = self.cov.amax();
        let asym = (&self.cov - self.cov.transpose()).amax();
        if asym > 1e-10 * norm {
            return Err(Error::Invariant(format!(
                "belief covariance not symmetric (asymmetry {asym:e})"
            )));
        }
        if n > 0 {
            let min = self.cov.clone().symmetric_eigenvalues().min();
            if min < -1e-10 * norm {
                return Err(Error::NotPositiveSemidefinite { eigenvalue: min });
            }
        }
        Ok(())
    }

    /// Marginal over the listed coordinates.
    pub fn marginal(&self, indices: &[usize]) -> Self {
        let mean = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(indices.len(), indices.len(), |r, c| {
            self.cov[(indices[r], indices[c])]
        });
        Self { mean, cov }
    }

    pub fn variances(&self) -> Vec<f64> {
        self.cov.diagonal().iter().copied().collect()
    }
}

/// Unscented-transform scaling. The spread is `n + lambda`; by default
/// `lambda = 3 - n`, which places the points at `±sqrt(3)` standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct UnscentedScaling {
    /// Fixed `lambda`; `None` selects `3 - n`.
    pub lambda: Option<f64>,
}

impl UnscentedScaling {
    pub fn lambda(&self, n: usize) -> f64 {
        self.lambda.unwrap_or(3.0 - n as f64)
    }

    /// `(central weight, weight of each of the other 2n points)`.
    pub fn weights(&self, n: usize) -> Result<(f64, f64)> {
        let lambda = self.lambda(n);
        let spread = n as f64 + lambda;
        if !(spread > 0.0) {
            return Err(Error::Domain(format!(
                "unscented spread n + lambda = {spread} must be positive"
            )));
        }
        Ok((lambda / spread, 0.5 / spread))
    }
}

/// The `2n + 1` weighted points of the unscented transform.
#[derive(Debug, Clone)]
pub struct SigmaEnsemble {
    pub points: Vec<DVector<f64>>,
    pub weights: Vec<f64>,
}

impl SigmaEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> DVector<f64> {
        weighted_mean(&self.points, &self.weights)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        weighted_cross_cov(&self.points, &mu, &self.points, &mu, &self.weights)
    }
}

pub(crate) fn weighted_mean(points: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let mut mu = DVector::zeros(points[0].len());
    for (p, &w) in points.iter().zip(weights) {
        mu.axpy(w, p, 1.0);
    }
    mu
}

pub(crate) fn weighted_cross_cov(
    a: &[DVector<f64>],
    mean_a: &DVector<f64>,
    b: &[DVector<f64>],
    mean_b: &DVector<f64>,
    weights: &[f64],
) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(mean_a.len(), mean_b.len());
    for ((pa, pb), &w) in a.iter().zip(b).zip(weights) {
        let da = pa - mean_a;
        let db = pb - mean_b;
        c.ger(w, &da, &db, 1.0);
    }
    c
}

/// Symmetric square root `U sqrt(S) U^T` from the SVD `P = U S V^T`.
///
/// For a symmetric matrix each singular value equals the magnitude of an
/// eigenvalue whose sign is `sign(u_i . v_i)`; negative eigenvalues beyond
/// `-1e-10 ||P||` are rejected.
pub fn covariance_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = cov.nrows();
    let norm = cov.amax();
    let svd = cov.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut scaled = u.clone();
    for i in 0..n {
        let s = svd.singular_values[i];
        let sign = u.column(i).dot(&v_t.row(i).transpose());
        if sign < 0.0 && s > 1e-10 * norm {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: -s });
        }
        scaled.column_mut(i).scale_mut(s.sqrt());
    }
    Ok(&scaled * u.transpose())
}

/// Sigma points `mu`, `mu ± sqrt(n + lambda) s_j` for the columns `s_j` of the
/// symmetric square root of the covariance.
pub fn sigma_points(belief: &GaussianBelief, scaling: &UnscentedScaling) -> Result<SigmaEnsemble> {
    let n = belief.dim();
    let (w0, wi) = scaling.weights(n)?;
    let spread = (n as f64 + scaling.lambda(n)).sqrt();
    let root = covariance_sqrt(&belief.cov)?;
    let mut points = Vec::with_capacity(2 * n + 1);
    let mut weights = Vec::with_capacity(2 * n + 1);
    points.push(belief.mean.clone());
    weights.push(w0);
    for j in 0..n {
        let col = root.column(j) * spread;
        points.push(&belief.mean + &col);
        points.push(&belief.mean - &col);
        weights.push(wi);
        weights.push(wi);
    }
    Ok(SigmaEnsemble { points, weights })
}

/// Symmetrizes and raises eigenvalues below `floor` to `floor`.
pub fn condition_covariance(cov: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (i, l) in clamped.iter().enumerate() {
        scaled.column_mut(i).scale_mut(*l);
    }
    let out = &scaled * q.transpose();
    Ok((&out + out.transpose()) * 0.5)
}
