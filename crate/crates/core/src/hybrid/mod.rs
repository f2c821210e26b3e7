//! Hybrid models: mechanistic equations for some variables, locally
//! constant delay-coordinate advancement for the rest.

mod fit;
mod model;
#[cfg(test)]
mod tests;

pub use fit::{forecast_hybrid, hybrid_initial_belief, hybrid_ukf_fit, HybridFit};
pub use model::{
    hybrid_advance, make_hybrid_model, DelayConfig, EmbeddedVar, Hold, HybridConfig, HybridModel, HybridState,
};
