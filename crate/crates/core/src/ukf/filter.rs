use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::sigma::{
    condition_covariance, sigma_points, weighted_cross_cov, weighted_mean, GaussianBelief,
    UnscentedScaling,
};
use crate::error::{Error, Result};

/// The state-transition and observation maps seen by the filter.
///
/// `propagate` advances a single ensemble member from sample `k` (time `t`)
/// to sample `k + 1`.
pub trait FilterModel {
    fn dim(&self) -> usize;
    fn obs_dim(&self) -> usize;
    fn propagate(&self, k: usize, t: f64, x: &[f64]) -> Vec<f64>;
    fn observe(&self, k: usize, t: f64, x: &[f64], y: &mut [f64]);
    fn process_noise(&self) -> &DMatrix<f64>;
    fn obs_noise(&self) -> &DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfConfig {
    pub scaling: UnscentedScaling,
    /// Eigenvalue floor applied after every covariance update.
    pub eigen_floor: f64,
}

impl Default for UkfConfig {
    fn default() -> Self {
        Self {
            scaling: UnscentedScaling::default(),
            eigen_floor: 1e-12,
        }
    }
}

/// Prior and posterior of one filter step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub prior: GaussianBelief,
    pub posterior: GaussianBelief,
}

/// Prediction half of the filter step: pushes the sigma points of `belief`
/// through the dynamics, then adds process noise.
pub fn ukf_predict(
    belief: &GaussianBelief,
    model: &dyn FilterModel,
    k: usize,
    t: f64,
    cfg: &UkfConfig,
) -> Result<GaussianBelief> {
    let n = model.dim();
    if belief.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: belief.dim(),
            context: "belief vs filter model",
        });
    }
    let ens = sigma_points(belief, &cfg.scaling)?;
    let diverged = || Error::FilterDiverged {
        step: k + 1,
        last_mean: belief.mean.iter().copied().collect(),
    };
    let mut moved = Vec::with_capacity(ens.len());
    for p in &ens.points {
        let next = model.propagate(k, t, p.as_slice());
        if next.iter().any(|v| !v.is_finite()) {
            return Err(diverged());
        }
        moved.push(DVector::from_vec(next));
    }
    let mean = weighted_mean(&moved, &ens.weights);
    let cov = weighted_cross_cov(&moved, &mean, &moved, &mean, &ens.weights) + model.process_noise();
    let cov = condition_covariance(&cov, cfg.eigen_floor).map_err(|_| diverged())?;
    Ok(GaussianBelief { mean, cov })
}

/// Update half: fresh sigma points of the prior are observed, then
/// `K = Pxy Py^-1`, `P+ = P- - K Py K^T`, `x+ = x- + K (y - y-)`.
pub fn ukf_update(
    prior: &GaussianBelief,
    model: &dyn FilterModel,
    obs: &[f64],
    k: usize,
    t: f64,
    cfg: &UkfConfig,
) -> Result<GaussianBelief> {
    let m = model.obs_dim();
    if obs.len() != m {
        return Err(Error::Dimension {
            expected: m,
            actual: obs.len(),
            context: "observation",
        });
    }
    let ens = sigma_points(prior, &cfg.scaling)?;
    let mut ys = Vec::with_capacity(ens.len());
    let mut buf = vec![0.0; m];
    for p in &ens.points {
        model.observe(k, t, p.as_slice(), &mut buf);
        ys.push(DVector::from_column_slice(&buf));
    }
    let y_mean = weighted_mean(&ys, &ens.weights);
    let p_y = weighted_cross_cov(&ys, &y_mean, &ys, &y_mean, &ens.weights) + model.obs_noise();
    let p_xy = weighted_cross_cov(&ens.points, &prior.mean, &ys, &y_mean, &ens.weights);
    let gain = solve_gain(&p_xy, &p_y)?;
    let innovation = DVector::from_column_slice(obs) - y_mean;
    let mean = &prior.mean + &gain * innovation;
    let cov = &prior.cov - &gain * &p_y * gain.transpose();
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::FilterDiverged {
            step: k,
            last_mean: prior.mean.iter().copied().collect(),
        });
    }
    let cov = condition_covariance(&cov, cfg.eigen_floor)?;
    Ok(GaussianBelief { mean, cov })
}

/// `Pxy Py^-1`, via Cholesky of the symmetric innovation covariance.
fn solve_gain(p_xy: &DMatrix<f64>, p_y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if p_y.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let sym = (p_y + p_y.transpose()) * 0.5;
    // K^T = Py^-1 Pyx
    let rhs = p_xy.transpose();
    let kt = match sym.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => sym.lu().solve(&rhs).ok_or(Error::SingularInnovation)?,
    };
    if kt.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    Ok(kt.transpose())
}

/// One full predict/update cycle from sample `k` to `k + 1`, assimilating
/// the observation `obs` taken at `t_next`.
pub fn ukf_step(
    belief: &GaussianBelief,
    model: &dyn FilterModel,
    obs: &[f64],
    k: usize,
    t: f64,
    t_next: f64,
    cfg: &UkfConfig,
) -> Result<StepResult> {
    let prior = ukf_predict(belief, model, k, t, cfg)?;
    let posterior = ukf_update(&prior, model, obs, k + 1, t_next, cfg)?;
    Ok(StepResult { prior, posterior })
}
