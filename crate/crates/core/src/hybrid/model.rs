use std::cell::Cell;
use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, rk4_step_driven, StateSpaceModel, TimeMode, Trajectory};
use crate::error::{Error, Result};
use crate::takens::{
    advance_window, kalman_takens_filter, DelayLibrary, Eligibility, KalmanTakensConfig, Weighting,
};

/// Delay-embedding hyperparameters for one replaced variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayConfig {
    pub d: usize,
    pub tau: usize,
    pub kappa: usize,
    #[serde(default)]
    pub weighting: Weighting,
}

impl DelayConfig {
    /// Lag-window length `d*tau + 1`.
    pub fn window_len(&self) -> usize {
        self.d * self.tau + 1
    }
}

/// How replaced variables enter the mechanistic integrator step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Held at their value at the start of the step.
    ZeroOrder,
    /// Moved linearly from the current to the predicted next value.
    #[default]
    Linear,
}

impl std::str::FromStr for Hold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_order" => Ok(Self::ZeroOrder),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Parse(format!("unknown hold `{other}`"))),
        }
    }
}

/// How to build a hybrid model from a base model.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridConfig {
    /// Base-state indices advanced without mechanistic equations.
    pub replaced: Vec<usize>,
    pub delay: DelayConfig,
    /// Denoise library series with the Kalman-Takens filter first.
    pub denoise: bool,
    /// Process variance on the leading lag of each delay block, as a
    /// multiple of that channel's observation variance.
    pub delay_process_factor: f64,
    pub hold: Hold,
}

impl HybridConfig {
    pub fn new(replaced: Vec<usize>, delay: DelayConfig) -> Self {
        Self {
            replaced,
            delay,
            denoise: true,
            delay_process_factor: 0.1,
            hold: Hold::default(),
        }
    }
}

/// A replaced variable that is observed and carried as a lag window.
#[derive(Debug, Clone)]
pub struct EmbeddedVar {
    pub var: usize,
    pub channel: usize,
    pub offset: usize,
    pub delay: DelayConfig,
    pub library: DelayLibrary,
}

/// A mechanistic model in which some variables are advanced by locally
/// constant delay-coordinate prediction.
///
/// Hybrid state layout: retained base variables in index order, then one
/// lag window `[x(k), x(k-1), ..., x(k-d*tau)]` per embedded variable.
/// Replaced variables without an observation channel are dropped.
#[derive(Debug, Clone)]
pub struct HybridModel {
    base: StateSpaceModel,
    replaced: Vec<usize>,
    retained: Vec<usize>,
    embedded: Vec<EmbeddedVar>,
    dropped: Vec<usize>,
    retained_params: Vec<usize>,
    active: Vec<bool>,
    obs_positions: Vec<usize>,
    q: DMatrix<f64>,
    hold: Hold,
    denoise_warnings: usize,
}

/// Values of the hybrid state outside the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub mechanistic: Vec<f64>,
    /// One lag window per embedded variable.
    pub delays: Vec<Vec<f64>>,
}

/// Builds a hybrid model. `training` holds the observations (one column per
/// observation channel of `model`) used to build the delay libraries.
pub fn make_hybrid_model(model: &StateSpaceModel, cfg: &HybridConfig, training: &Trajectory) -> Result<HybridModel> {
    let n = model.state_dim();
    let coords = model
        .observation()
        .coordinates()
        .ok_or_else(|| Error::Domain("hybrid models need coordinate observations".into()))?
        .to_vec();
    if training.dim() != coords.len() {
        return Err(Error::Dimension {
            expected: coords.len(),
            actual: training.dim(),
            context: "hybrid training columns",
        });
    }
    let replaced: BTreeSet<usize> = cfg.replaced.iter().copied().collect();
    if replaced.len() != cfg.replaced.len() {
        return Err(Error::Invariant("replaced variable listed twice".into()));
    }
    if let Some(&i) = replaced.iter().find(|&&i| i >= n) {
        return Err(Error::Invariant(format!("replaced index {i} out of range ({n} states)")));
    }
    let dynamics = model.dynamics();
    let retained: Vec<usize> = (0..n).filter(|i| !replaced.contains(i)).collect();
    let needed: BTreeSet<usize> = retained.iter().flat_map(|&e| dynamics.equation_states(e)).collect();

    let mut embedded = Vec::new();
    let mut dropped = Vec::new();
    let mut offset = retained.len();
    let mut q_diag: Vec<f64> = retained.iter().map(|&i| model.process_noise()[(i, i)]).collect();
    let mut denoise_warnings = 0;
    for &var in &replaced {
        match coords.iter().position(|&c| c == var) {
            Some(channel) => {
                let obs_var = model.obs_noise()[(channel, channel)];
                let raw = training.column(channel);
                let series = if cfg.denoise {
                    let kt = KalmanTakensConfig {
                        d: cfg.delay.d,
                        tau: cfg.delay.tau,
                        kappa: cfg.delay.kappa,
                        weighting: cfg.delay.weighting,
                        q: obs_var,
                        r: obs_var,
                    };
                    let out = kalman_takens_filter(&raw, &kt)?;
                    denoise_warnings += out.warnings;
                    out.filtered
                } else {
                    raw
                };
                let library = DelayLibrary::new(series, cfg.delay.d, cfg.delay.tau)?;
                let w = cfg.delay.window_len();
                q_diag.push(cfg.delay_process_factor * obs_var);
                q_diag.extend(std::iter::repeat_n(0.0, w - 1));
                embedded.push(EmbeddedVar {
                    var,
                    channel,
                    offset,
                    delay: cfg.delay,
                    library,
                });
                offset += w;
            }
            None if needed.contains(&var) => {
                return Err(Error::Unobserved { index: var });
            }
            None => dropped.push(var),
        }
    }

    let retained_params: Vec<usize> = retained
        .iter()
        .flat_map(|&e| dynamics.equation_params(e))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let obs_positions = coords
        .iter()
        .map(|c| match retained.iter().position(|r| r == c) {
            Some(p) => p,
            None => embedded.iter().find(|e| e.var == *c).expect("observed replaced").offset,
        })
        .collect();

    let mut q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(q_diag));
    for (a, &i) in retained.iter().enumerate() {
        for (b, &j) in retained.iter().enumerate() {
            q[(a, b)] = model.process_noise()[(i, j)];
        }
    }
    let active = (0..n).map(|i| !replaced.contains(&i)).collect();
    Ok(HybridModel {
        base: model.clone(),
        replaced: replaced.into_iter().collect(),
        retained,
        embedded,
        dropped,
        retained_params,
        active,
        obs_positions,
        q,
        hold: cfg.hold,
        denoise_warnings,
    })
}

impl HybridModel {
    pub fn base(&self) -> &StateSpaceModel {
        &self.base
    }
    pub fn replaced(&self) -> &[usize] {
        &self.replaced
    }
    /// Base-state indices of the mechanistic block.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }
    pub fn embedded(&self) -> &[EmbeddedVar] {
        &self.embedded
    }
    /// Replaced variables carried nowhere in the hybrid state.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }
    /// Parameters read by at least one retained equation.
    pub fn retained_params(&self) -> &[usize] {
        &self.retained_params
    }
    /// Hybrid-state dimension without any parameter block.
    pub fn state_dim(&self) -> usize {
        self.retained.len() + self.embedded.iter().map(|e| e.delay.window_len()).sum::<usize>()
    }
    /// Position in the hybrid state of each base observation channel.
    pub fn obs_positions(&self) -> &[usize] {
        &self.obs_positions
    }
    /// Process covariance over the hybrid state.
    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn hold(&self) -> Hold {
        self.hold
    }
    /// Fallback steps recorded while denoising the libraries.
    pub fn denoise_warnings(&self) -> usize {
        self.denoise_warnings
    }
    /// First observation index at which every lag window is full.
    pub fn start_index(&self) -> usize {
        self.embedded.iter().map(|e| e.delay.window_len() - 1).max().unwrap_or(0)
    }
    /// Base variables reported by hybrid forecasts, in index order.
    pub fn output_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.retained.iter().copied().chain(self.embedded.iter().map(|e| e.var)).collect();
        v.sort_unstable();
        v
    }

    pub fn pack(&self, s: &HybridState) -> Vec<f64> {
        let mut v = s.mechanistic.clone();
        for w in &s.delays {
            v.extend_from_slice(w);
        }
        v
    }

    pub fn unpack(&self, v: &[f64]) -> HybridState {
        let r = self.retained.len();
        HybridState {
            mechanistic: v[..r].to_vec(),
            delays: self
                .embedded
                .iter()
                .map(|e| v[e.offset..e.offset + e.delay.window_len()].to_vec())
                .collect(),
        }
    }

    /// Base-state vector seen by the retained equations. Dropped variables are zero.
    pub(crate) fn base_state(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.base.state_dim()];
        for (p, &i) in self.retained.iter().enumerate() {
            full[i] = x[p];
        }
        for e in &self.embedded {
            full[e.var] = x[e.offset];
        }
        full
    }

    /// One-step advance of a packed hybrid state (no parameter block).
    ///
    /// `k` is the sample index of `x` in the library series. While filtering,
    /// neighbors within one lag window of `k` are excluded.
    pub(crate) fn advance_packed(
        &self,
        k: usize,
        t: f64,
        x: &[f64],
        params: &[f64],
        h: f64,
        filtering: bool,
        fallback: &Cell<bool>,
    ) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for e in &self.embedded {
            let w = e.delay.window_len();
            let elig = if filtering {
                Eligibility::excluding(1, k, e.library.window())
            } else {
                Eligibility::future(1)
            };
            advance_window(
                &e.library,
                &x[e.offset..e.offset + w],
                e.delay.kappa,
                elig,
                e.delay.weighting,
                fallback,
                &mut out[e.offset..e.offset + w],
            );
        }
        let full = self.base_state(x);
        let ends: Vec<(usize, f64)> = self.embedded.iter().map(|e| (e.var, out[e.offset])).collect();
        let next = self.step_mechanistic(t, &full, params, h, &ends);
        for (p, &i) in self.retained.iter().enumerate() {
            out[p] = next[i];
        }
        out
    }
}

impl HybridModel {
    /// One integrator step of the retained equations on a base-state vector.
    /// `ends` gives each embedded variable's value at the end of the step.
    pub(crate) fn step_mechanistic(
        &self,
        t: f64,
        full: &[f64],
        params: &[f64],
        h: f64,
        ends: &[(usize, f64)],
    ) -> Vec<f64> {
        let f = self.base.dynamics().as_ref();
        match (f.time_mode(), self.hold) {
            (TimeMode::Continuous, Hold::Linear) if !ends.is_empty() => {
                let mut rates = vec![0.0; full.len()];
                for &(i, end) in ends {
                    rates[i] = (end - full[i]) / h;
                }
                rk4_step_driven(f, t, full, params, h, &self.active, &rates)
            }
            _ => advance(f, t, full, params, h, Some(&self.active)),
        }
    }
}

/// Advances a hybrid state by one sample: replaced variables by a one-step
/// neighbor prediction from their current lag windows, retained variables by
/// one integrator step with replaced values held constant over the step.
/// Returns the new state and whether any window fell back to persistence.
pub fn hybrid_advance(
    state: &HybridState,
    hm: &HybridModel,
    params: &[f64],
    t: f64,
    h: f64,
) -> Result<(HybridState, bool)> {
    if state.mechanistic.len() != hm.retained.len() || state.delays.len() != hm.embedded.len() {
        return Err(Error::Dimension {
            expected: hm.state_dim(),
            actual: state.mechanistic.len() + state.delays.iter().map(Vec::len).sum::<usize>(),
            context: "hybrid state",
        });
    }
    let fallback = Cell::new(false);
    let x = hm.pack(state);
    let next = hm.advance_packed(0, t, &x, params, h, false, &fallback);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationDiverged { step: 1 });
    }
    Ok((hm.unpack(&next), fallback.get()))
}
