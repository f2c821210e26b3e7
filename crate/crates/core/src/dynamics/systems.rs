use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hindmarsh_rose::{HRNetworkParams, HindmarshRoseNetwork};
use super::integrate::{simulate_dynamics, Method};
use super::lorenz::{Lorenz63, LorenzParams};
use super::lpa::{LPAParams, Lpa};
use super::model::{Dynamics, StateSpaceModel, TimeMode};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemId {
    Lorenz63,
    HrNetwork,
    Lpa,
}

impl SystemId {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemId::Lorenz63 => "lorenz63",
            SystemId::HrNetwork => "hr_network",
            SystemId::Lpa => "lpa",
        }
    }
}

impl std::fmt::Display for SystemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SystemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lorenz63" => Ok(SystemId::Lorenz63),
            "hr_network" => Ok(SystemId::HrNetwork),
            "lpa" => Ok(SystemId::Lpa),
            other => Err(Error::Domain(format!("unknown system `{other}`"))),
        }
    }
}

/// A benchmark system with concrete ("true") parameters and the set of
/// directly observed state coordinates.
#[derive(Debug, Clone)]
pub struct SystemInstance {
    pub id: SystemId,
    pub dynamics: Arc<dyn Dynamics>,
    pub params: Vec<f64>,
    pub observed: Vec<usize>,
}

impl SystemInstance {
    pub fn lorenz(params: LorenzParams) -> Self {
        Self {
            id: SystemId::Lorenz63,
            dynamics: Arc::new(Lorenz63),
            params: params.to_vec(),
            observed: vec![0, 1, 2],
        }
    }

    /// Only the membrane potentials `x_i` are observed.
    pub fn hr_network(params: &HRNetworkParams) -> Result<Self> {
        params.validate()?;
        let m = params.neurons();
        Ok(Self {
            id: SystemId::HrNetwork,
            dynamics: Arc::new(HindmarshRoseNetwork::new(m)),
            params: params.to_vec(),
            observed: (0..m).map(HindmarshRoseNetwork::x_index).collect(),
        })
    }

    pub fn lpa(params: LPAParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            id: SystemId::Lpa,
            dynamics: Arc::new(Lpa),
            params: params.to_vec(),
            observed: vec![0, 1, 2],
        })
    }

    pub fn state_names(&self) -> Vec<String> {
        self.dynamics.state_names()
    }

    /// State-space model with the true parameters and coordinate observations.
    pub fn model(&self, process_var: f64, obs_var: f64) -> Result<StateSpaceModel> {
        StateSpaceModel::observed_coordinates(
            self.dynamics.clone(),
            self.params.clone(),
            self.observed.clone(),
            process_var,
            obs_var,
        )
    }

    /// Draws a starting point for [`SystemInstance::generate`]; a transient
    /// is discarded afterwards so the sample lands on the attractor.
    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self.id {
            SystemId::Lorenz63 => vec![
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
                rng.random_range(5.0..40.0),
            ],
            SystemId::HrNetwork => {
                let m = self.dynamics.state_dim() / 3;
                (0..m)
                    .flat_map(|_| {
                        [
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-8.0..0.0),
                            rng.random_range(0.0..0.3),
                        ]
                    })
                    .collect()
            }
            // Standard laboratory starting culture.
            SystemId::Lpa => vec![250.0, 5.0, 100.0],
        }
    }

    /// Noise-free trajectory of `n_points` samples at spacing `h`, after
    /// discarding `transient` samples from `x0`. Continuous systems are
    /// integrated with step `h / substeps` and subsampled; discrete maps
    /// ignore `substeps`.
    pub fn generate(
        &self,
        x0: &[f64],
        h: f64,
        n_points: usize,
        transient: usize,
        method: Method,
        substeps: usize,
    ) -> Result<Trajectory> {
        if n_points == 0 {
            return Err(Error::Domain("trajectory needs at least one point".into()));
        }
        let sub = match self.dynamics.time_mode() {
            TimeMode::Continuous => substeps.max(1),
            TimeMode::Discrete => 1,
        };
        let f = self.dynamics.as_ref();
        let total = (transient + n_points - 1) * sub;
        let fine = simulate_dynamics(f, &self.params, x0, 0.0, h / sub as f64, total, method)?;
        let states = fine
            .into_iter()
            .skip(transient * sub)
            .step_by(sub)
            .collect();
        Trajectory::from_states(self.state_names(), 0.0, h, states)
    }
}
