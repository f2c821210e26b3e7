use std::cell::Cell;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::knn::{knn_with, Eligibility, Weighting};
use super::library::DelayLibrary;
use crate::error::{Error, Result};
use crate::ukf::{ukf_step, FilterModel, GaussianBelief, UkfConfig};

/// Settings for the delay-coordinate denoiser. `q` is the per-entry
/// process variance and `r` the observation variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanTakensConfig {
    pub d: usize,
    pub tau: usize,
    pub kappa: usize,
    #[serde(default)]
    pub weighting: Weighting,
    pub q: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTakensOutput {
    pub filtered: Vec<f64>,
    /// Steps where at least one ensemble member fell back to persistence.
    pub warnings: usize,
}

/// Locally constant one-step advance of a lag window
/// `[x(k), x(k-1), ..., x(k-d*tau)]`.
///
/// The predicted value is pushed to the front and every lag shifts back one
/// slot. When no neighbors are available the leading value persists and
/// `fallback` is set.
pub(crate) fn advance_window(
    lib: &DelayLibrary,
    window: &[f64],
    kappa: usize,
    eligibility: Eligibility,
    weighting: Weighting,
    fallback: &Cell<bool>,
    out: &mut [f64],
) {
    let query = lib.query_from_window(window);
    let next = match knn_with(lib, &query, kappa, eligibility, weighting) {
        Ok(nb) => nb.predict(lib, 1),
        Err(_) => {
            fallback.set(true);
            window[0]
        }
    };
    out[0] = next;
    out[1..window.len()].copy_from_slice(&window[..window.len() - 1]);
}

struct DelayFilter<'a> {
    lib: &'a DelayLibrary,
    kappa: usize,
    weighting: Weighting,
    q: &'a DMatrix<f64>,
    r: &'a DMatrix<f64>,
    fallback: Cell<bool>,
}

impl FilterModel for DelayFilter<'_> {
    fn dim(&self) -> usize {
        self.q.nrows()
    }
    fn obs_dim(&self) -> usize {
        1
    }
    fn propagate(&self, k: usize, _t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        let elig = Eligibility::excluding(1, k, self.lib.window());
        advance_window(self.lib, x, self.kappa, elig, self.weighting, &self.fallback, &mut out);
        out
    }
    fn observe(&self, _k: usize, _t: f64, x: &[f64], y: &mut [f64]) {
        y[0] = x[0];
    }
    fn process_noise(&self) -> &DMatrix<f64> {
        self.q
    }
    fn obs_noise(&self) -> &DMatrix<f64> {
        self.r
    }
}

/// Model-free denoising of a scalar series in one forward pass.
///
/// The filter state is the lag window ending at the current sample. Its
/// leading entry is advanced by a one-step neighbor prediction from a
/// library that starts as the raw series; each filtered value overwrites its
/// raw sample once the filter has passed it. Neighbors within `d*tau`
/// samples of the current time are excluded. Samples before the first full
/// window take their estimate from the last window that contains them.
pub fn kalman_takens_filter(series: &[f64], cfg: &KalmanTakensConfig) -> Result<KalmanTakensOutput> {
    if !(cfg.q >= 0.0 && cfg.r > 0.0) {
        return Err(Error::Domain("Kalman-Takens needs q >= 0 and r > 0".into()));
    }
    let mut lib = DelayLibrary::new(series.to_vec(), cfg.d, cfg.tau)?;
    let w = lib.window();
    let n = w + 1;
    let q = DMatrix::from_diagonal_element(n, n, cfg.q);
    let r = DMatrix::from_element(1, 1, cfg.r);
    let ukf = UkfConfig::default();
    let mut filtered = series.to_vec();
    let start: Vec<f64> = (0..n).map(|j| series[w - j]).collect();
    let mut belief = GaussianBelief::diagonal(start, &vec![cfg.r; n])?;
    let mut warnings = 0;
    for k in w..series.len() - 1 {
        let model = DelayFilter {
            lib: &lib,
            kappa: cfg.kappa,
            weighting: cfg.weighting,
            q: &q,
            r: &r,
            fallback: Cell::new(false),
        };
        let step = ukf_step(&belief, &model, &[series[k + 1]], k, k as f64, (k + 1) as f64, &ukf)?;
        if model.fallback.get() {
            warnings += 1;
        }
        belief = step.posterior;
        filtered[k + 1] = belief.mean[0];
        lib.set_sample(k + 1, belief.mean[0]);
        if k + 1 < 2 * w {
            // the oldest slot leaves the window after this step
            filtered[k + 1 - w] = belief.mean[w];
        }
    }
    Ok(KalmanTakensOutput { filtered, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{add_observation_noise, LorenzParams, Method, SystemInstance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn rms(a: &[f64], b: &[f64]) -> f64 {
        (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }

    #[test]
    fn clean_periodic_series_is_untouched() {
        let s: Vec<f64> = (0..400).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 25.0).sin()).collect();
        let cfg = KalmanTakensConfig {
            d: 3,
            tau: 1,
            kappa: 3,
            weighting: Weighting::Uniform,
            q: 1e-4,
            r: 0.01,
        };
        let out = kalman_takens_filter(&s, &cfg).unwrap();
        let scale = rms(&s, &vec![0.0; s.len()]);
        assert!(rms(&out.filtered, &s) < 0.01 * scale, "{}", rms(&out.filtered, &s));
        assert_eq!(out.warnings, 0);
    }

    #[test]
    fn constant_plus_noise_shrinks_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let s: Vec<f64> = (0..400).map(|_| 5.0 + noise.sample(&mut rng)).collect();
        let cfg = KalmanTakensConfig {
            d: 2,
            tau: 1,
            kappa: 10,
            weighting: Weighting::Uniform,
            q: 0.01,
            r: 1.0,
        };
        let out = kalman_takens_filter(&s, &cfg).unwrap();
        let tail = &out.filtered[50..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64;
        assert!(var < 1.0, "{var}");
    }

    #[test]
    fn reduces_lorenz_noise() {
        let sys = SystemInstance::lorenz(LorenzParams::default());
        let truth = sys.generate(&[1.0, 1.0, 20.0], 0.05, 501, 200, Method::Am4, 10).unwrap();
        let noisy = add_observation_noise(&truth, 4.0, 11).unwrap();
        let cfg = KalmanTakensConfig {
            d: 9,
            tau: 1,
            kappa: 20,
            weighting: Weighting::Uniform,
            q: 4.0,
            r: 4.0,
        };
        let out = kalman_takens_filter(&noisy.column(0), &cfg).unwrap();
        let raw = rms(&noisy.column(0), &truth.column(0));
        let filt = rms(&out.filtered, &truth.column(0));
        assert!(filt < raw, "filtered {filt} raw {raw}");
    }

    #[test]
    fn rejects_bad_variances() {
        let cfg = KalmanTakensConfig {
            d: 1,
            tau: 1,
            kappa: 1,
            weighting: Weighting::Uniform,
            q: 0.0,
            r: 0.0,
        };
        assert!(kalman_takens_filter(&[1.0; 10], &cfg).is_err());
    }
}
