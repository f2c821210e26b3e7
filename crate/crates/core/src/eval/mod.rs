//! Forecast scoring, parameter-uncertainty sampling and the Monte Carlo
//! experiment harness.

mod config;
mod experiment;
mod gridsearch;
mod report;
mod srmse;
#[cfg(test)]
mod tests;

pub use config::{
    ExperimentConfig, ExperimentSection, FilterSection, ForecastMethod, HrSection, HybridSection, LpaSection,
    NonparametricSection,
};
pub use experiment::{
    derive_seed, realization_series, realization_system, run_experiment, run_experiment_scaled, run_on_datasets, synthetic_realization,
    RealizationData, MAX_FAILURE_FRACTION,
};
pub use gridsearch::{grid_search_embedding, EmbeddingGrid, GridCell, GridSearchResult};
pub use report::{CellSummary, ForecastReport, ParamRow, SrmseRow};
pub use srmse::{sample_initial_params, sample_initial_params_with, srmse, std_dev, SrmseAccumulator};
