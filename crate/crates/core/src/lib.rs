//! Forecasting nonlinear dynamical systems three ways: a fully mechanistic
//! (parametric) pipeline built on joint unscented Kalman filtering, a
//! nonparametric delay-coordinate pipeline, and a hybrid that advances some
//! state variables with delay-coordinate prediction inside the mechanistic
//! filter.

pub mod dynamics;
pub mod error;
pub mod eval;
pub mod hybrid;
pub mod io;
pub mod takens;
pub mod ukf;

pub use error::{Error, Result};
