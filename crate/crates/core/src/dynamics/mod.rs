//! Model interfaces, the benchmark systems, fixed-step integration and
//! synthetic data generation.

mod hindmarsh_rose;
mod integrate;
pub mod lorenz;
pub mod lpa;
mod model;
mod noise;
mod systems;
mod trajectory;

pub use hindmarsh_rose::{hindmarsh_rose_rhs, HRNetworkParams, HindmarshRoseNetwork};
pub use integrate::{
    advance, forecast_substeps, integrate, integrate_dynamics, rk4_step, rk4_step_driven, simulate, simulate_dynamics, Method,
};
pub use lorenz::{lorenz63_rhs, Lorenz63, LorenzParams};
pub use lpa::{lpa_step, LPAParams, Lpa};
pub use model::{Dynamics, Observation, ObservationFn, StateSpaceModel, TimeMode};
pub use noise::{add_observation_noise, add_observation_noise_with};
pub use systems::{SystemId, SystemInstance};
pub use trajectory::{fmt_f64, Trajectory};

