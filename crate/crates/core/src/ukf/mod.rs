//! Unscented Kalman filtering with SVD square roots, joint state and
//! parameter estimation by state augmentation, and parametric forecasts.

mod filter;
mod joint;
mod sigma;

pub use filter::{ukf_predict, ukf_step, ukf_update, FilterModel, StepResult, UkfConfig};
pub use joint::{
    augment, forecast_parametric, initial_belief, joint_estimate, write_history_csv, JointConfig,
    JointEstimate, JointFilter,
};
pub use sigma::{
    condition_covariance, covariance_sqrt, sigma_points, GaussianBelief, SigmaEnsemble,
    UnscentedScaling,
};
