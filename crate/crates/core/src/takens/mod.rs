//! Delay-coordinate embedding, nearest-neighbor search, locally constant
//! prediction and the Kalman-Takens denoiser.

mod kalman_takens;
mod knn;
mod library;

pub use kalman_takens::{kalman_takens_filter, KalmanTakensConfig, KalmanTakensOutput};
pub(crate) use kalman_takens::advance_window;
pub use knn::{direct_predict, knn, knn_with, Eligibility, NeighborSet, Weighting, INVERSE_DISTANCE_EPS};
pub use library::{build_delay_library, min_series_len, DelayLibrary};
