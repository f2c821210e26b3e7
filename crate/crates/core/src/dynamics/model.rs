use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Whether [`Dynamics::eval`] returns a time derivative or the next state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    Continuous,
    Discrete,
}

/// Right-hand side of a dynamical system `x(k+1) = f(t, x, p)` or `dx/dt = f(t, x, p)`.
///
/// Implementations also report which states and parameters each equation
/// reads. Hybrid models use this to decide which parameters survive when
/// equations are replaced and which removed variables are still needed.
pub trait Dynamics: Send + Sync + fmt::Debug {
    fn state_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn time_mode(&self) -> TimeMode;

    /// Evaluates all equations. `out` has length `state_dim()`.
    fn eval(&self, t: f64, x: &[f64], p: &[f64], out: &mut [f64]);

    fn state_names(&self) -> Vec<String>;
    fn param_names(&self) -> Vec<String>;

    /// State indices appearing on the right-hand side of equation `eq`.
    fn equation_states(&self, eq: usize) -> Vec<usize>;
    /// Parameter indices appearing in equation `eq`.
    fn equation_params(&self, eq: usize) -> Vec<usize>;
}

/// Observation function signature for general (non-projection) observations.
pub type ObservationFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Maps a state to its observation vector.
#[derive(Clone)]
pub enum Observation {
    /// Observations are these state coordinates, in order.
    Coordinates(Vec<usize>),
    /// Arbitrary observation map of the given output dimension.
    Map { dim: usize, f: Arc<ObservationFn> },
}

impl fmt::Debug for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Coordinates(c) => f.debug_tuple("Coordinates").field(c).finish(),
            Observation::Map { dim, .. } => f.debug_struct("Map").field("dim", dim).finish(),
        }
    }
}

impl Observation {
    pub fn dim(&self) -> usize {
        match self {
            Observation::Coordinates(c) => c.len(),
            Observation::Map { dim, .. } => *dim,
        }
    }

    pub fn apply(&self, t: f64, x: &[f64], p: &[f64], out: &mut [f64]) {
        match self {
            Observation::Coordinates(c) => {
                for (o, &i) in out.iter_mut().zip(c) {
                    *o = x[i];
                }
            }
            Observation::Map { f, .. } => f(t, x, p, out),
        }
    }

    pub fn coordinates(&self) -> Option<&[usize]> {
        match self {
            Observation::Coordinates(c) => Some(c),
            Observation::Map { .. } => None,
        }
    }
}

/// A dynamical system together with its parameter values, observation map
/// and noise covariances.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    dynamics: Arc<dyn Dynamics>,
    params: Vec<f64>,
    observation: Observation,
    process_noise: DMatrix<f64>,
    obs_noise: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Builds a model, checking dimensions, that `Q` is symmetric PSD and
    /// that `R` is symmetric positive definite.
    pub fn new(
        dynamics: Arc<dyn Dynamics>,
        params: Vec<f64>,
        observation: Observation,
        process_noise: DMatrix<f64>,
        obs_noise: DMatrix<f64>,
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        let m = observation.dim();
        if params.len() != dynamics.param_dim() {
            return Err(Error::Dimension {
                expected: dynamics.param_dim(),
                actual: params.len(),
                context: "parameter vector",
            });
        }
        if let Observation::Coordinates(c) = &observation {
            if let Some(&bad) = c.iter().find(|&&i| i >= n) {
                return Err(Error::Invariant(format!(
                    "observed coordinate {bad} out of range for state dimension {n}"
                )));
            }
            if m > n {
                return Err(Error::Invariant(format!(
                    "{m} coordinate observations exceed state dimension {n}"
                )));
            }
        }
        if process_noise.shape() != (n, n) {
            return Err(Error::Dimension {
                expected: n,
                actual: process_noise.nrows(),
                context: "process noise covariance",
            });
        }
        if obs_noise.shape() != (m, m) {
            return Err(Error::Dimension {
                expected: m,
                actual: obs_noise.nrows(),
                context: "observation noise covariance",
            });
        }
        let q_min = min_eigenvalue(&process_noise)?;
        if q_min < -1e-12 * process_noise.amax().max(1.0) {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: q_min });
        }
        let r_min = min_eigenvalue(&obs_noise)?;
        if r_min <= 0.0 {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: r_min });
        }
        Ok(Self {
            dynamics,
            params,
            observation,
            process_noise,
            obs_noise,
        })
    }

    /// Fully observed coordinates with isotropic observation noise and
    /// diagonal process noise.
    pub fn observed_coordinates(
        dynamics: Arc<dyn Dynamics>,
        params: Vec<f64>,
        observed: Vec<usize>,
        process_var: f64,
        obs_var: f64,
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        let m = observed.len();
        Self::new(
            dynamics,
            params,
            Observation::Coordinates(observed),
            DMatrix::from_diagonal_element(n, n, process_var),
            DMatrix::from_diagonal_element(m, m, obs_var),
        )
    }

    pub fn dynamics(&self) -> &Arc<dyn Dynamics> {
        &self.dynamics
    }
    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }
    pub fn param_dim(&self) -> usize {
        self.dynamics.param_dim()
    }
    pub fn obs_dim(&self) -> usize {
        self.observation.dim()
    }
    pub fn time_mode(&self) -> TimeMode {
        self.dynamics.time_mode()
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn observation(&self) -> &Observation {
        &self.observation
    }
    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }
    pub fn obs_noise(&self) -> &DMatrix<f64> {
        &self.obs_noise
    }

    /// Same model with different parameter values.
    pub fn with_params(&self, params: Vec<f64>) -> Result<Self> {
        if params.len() != self.param_dim() {
            return Err(Error::Dimension {
                expected: self.param_dim(),
                actual: params.len(),
                context: "parameter vector",
            });
        }
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    pub fn observe(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.obs_dim()];
        self.observation.apply(t, x, &self.params, &mut y);
        y
    }
}

/// Smallest eigenvalue of the symmetric part of `m`.
fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * m.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Invariant(format!(
            "covariance not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}
