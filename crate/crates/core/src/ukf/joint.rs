use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::filter::{ukf_step, FilterModel, UkfConfig};
use super::sigma::GaussianBelief;
use crate::dynamics::{advance, fmt_f64, forecast_substeps, StateSpaceModel, Trajectory};
use crate::error::{Error, Result};

/// Which parameters are appended to the filter state, with their initial
/// guesses, initial variances and per-step random-walk variances.
#[derive(Debug, Clone, PartialEq)]
pub struct JointConfig {
    pub estimated: Vec<usize>,
    pub initial_guess: Vec<f64>,
    pub initial_var: Vec<f64>,
    pub process_var: Vec<f64>,
}

impl JointConfig {
    /// Random-walk variance defaults to `1e-4` of each initial variance.
    pub fn new(estimated: Vec<usize>, initial_guess: Vec<f64>, initial_var: Vec<f64>) -> Self {
        let process_var = initial_var.iter().map(|v| 1e-4 * v).collect();
        Self {
            estimated,
            initial_guess,
            initial_var,
            process_var,
        }
    }

    /// Nothing estimated.
    pub fn none() -> Self {
        Self::new(vec![], vec![], vec![])
    }

    pub fn len(&self) -> usize {
        self.estimated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimated.is_empty()
    }

    pub fn validate(&self, param_dim: usize) -> Result<()> {
        let l = self.estimated.len();
        if self.initial_guess.len() != l || self.initial_var.len() != l || self.process_var.len() != l {
            return Err(Error::Dimension {
                expected: l,
                actual: self.initial_guess.len(),
                context: "joint configuration vectors",
            });
        }
        let mut seen = vec![false; param_dim];
        for &i in &self.estimated {
            if i >= param_dim {
                return Err(Error::Invariant(format!(
                    "estimated parameter index {i} out of range ({param_dim} parameters)"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invariant(format!("parameter index {i} listed twice")));
            }
        }
        if self
            .initial_var
            .iter()
            .chain(&self.process_var)
            .any(|v| !(*v >= 0.0 && v.is_finite()))
        {
            return Err(Error::Domain("parameter variances must be nonnegative".into()));
        }
        Ok(())
    }

    /// Keeps only the entries whose parameter index satisfies `keep`.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> Self {
        let sel: Vec<usize> = (0..self.len()).filter(|&j| keep(self.estimated[j])).collect();
        let pick = |v: &[f64]| sel.iter().map(|&j| v[j]).collect::<Vec<_>>();
        Self {
            estimated: sel.iter().map(|&j| self.estimated[j]).collect(),
            initial_guess: pick(&self.initial_guess),
            initial_var: pick(&self.initial_var),
            process_var: pick(&self.process_var),
        }
    }
}

/// Initial filter belief: observed coordinates start at the first
/// observation with the observation-noise variance; unobserved ones start
/// at zero with `prior_var`.
pub fn initial_belief(model: &StateSpaceModel, first_obs: &[f64], prior_var: f64) -> Result<GaussianBelief> {
    let coords = model.observation().coordinates().ok_or_else(|| {
        Error::Domain("initial belief policy needs coordinate observations".into())
    })?;
    if first_obs.len() != coords.len() {
        return Err(Error::Dimension {
            expected: coords.len(),
            actual: first_obs.len(),
            context: "first observation",
        });
    }
    let n = model.state_dim();
    let mut mean = vec![0.0; n];
    let mut var = vec![prior_var; n];
    for (j, &i) in coords.iter().enumerate() {
        mean[i] = first_obs[j];
        var[i] = model.obs_noise()[(j, j)];
    }
    GaussianBelief::diagonal(mean, &var)
}

/// Filter view of a model with the estimated parameters appended to the state.
pub struct JointFilter<'a> {
    model: &'a StateSpaceModel,
    estimated: &'a [usize],
    h: f64,
    q: DMatrix<f64>,
}

impl<'a> JointFilter<'a> {
    pub fn new(model: &'a StateSpaceModel, joint: &'a JointConfig, h: f64) -> Self {
        let n = model.state_dim();
        let l = joint.len();
        let mut q = DMatrix::zeros(n + l, n + l);
        q.view_mut((0, 0), (n, n)).copy_from(model.process_noise());
        for (j, v) in joint.process_var.iter().enumerate() {
            q[(n + j, n + j)] = *v;
        }
        Self {
            model,
            estimated: &joint.estimated,
            h,
            q,
        }
    }

    fn params(&self, x: &[f64]) -> Vec<f64> {
        let n = self.model.state_dim();
        let mut p = self.model.params().to_vec();
        for (j, &i) in self.estimated.iter().enumerate() {
            p[i] = x[n + j];
        }
        p
    }
}

impl FilterModel for JointFilter<'_> {
    fn dim(&self) -> usize {
        self.model.state_dim() + self.estimated.len()
    }
    fn obs_dim(&self) -> usize {
        self.model.obs_dim()
    }
    fn propagate(&self, _k: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.model.state_dim();
        let p = self.params(x);
        let mut next = advance(self.model.dynamics().as_ref(), t, &x[..n], &p, self.h, None);
        next.extend_from_slice(&x[n..]);
        next
    }
    fn observe(&self, _k: usize, t: f64, x: &[f64], y: &mut [f64]) {
        let n = self.model.state_dim();
        let p = self.params(x);
        self.model.observation().apply(t, &x[..n], &p, y);
    }
    fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }
    fn obs_noise(&self) -> &DMatrix<f64> {
        self.model.obs_noise()
    }
}

/// Outcome of a joint state-parameter filtering run.
#[derive(Debug, Clone)]
pub struct JointEstimate {
    /// Full parameter vector: model values with estimated entries replaced by posterior means.
    pub params: Vec<f64>,
    /// Posterior means of the estimated parameters, in `JointConfig::estimated` order.
    pub param_mean: Vec<f64>,
    pub param_var: Vec<f64>,
    /// Belief over the model state at the last observation.
    pub state: GaussianBelief,
    /// Posterior over the augmented state after each observation.
    pub history: Vec<GaussianBelief>,
}

/// Stacks a state belief with independent parameter priors.
pub fn augment(state: &GaussianBelief, joint: &JointConfig) -> GaussianBelief {
    let n = state.dim();
    let l = joint.len();
    let mut mean = DVector::zeros(n + l);
    mean.rows_mut(0, n).copy_from(&state.mean);
    let mut cov = DMatrix::zeros(n + l, n + l);
    cov.view_mut((0, 0), (n, n)).copy_from(&state.cov);
    for j in 0..l {
        mean[n + j] = joint.initial_guess[j];
        cov[(n + j, n + j)] = joint.initial_var[j];
    }
    GaussianBelief { mean, cov }
}

/// Runs the unscented filter over the augmented state. `init` is the belief
/// about the state at the first observation, which it is assumed to already
/// include; each later observation is assimilated after one prediction step.
pub fn joint_estimate(
    model: &StateSpaceModel,
    observations: &Trajectory,
    joint: &JointConfig,
    init: &GaussianBelief,
    cfg: &UkfConfig,
) -> Result<JointEstimate> {
    joint.validate(model.param_dim())?;
    if observations.dim() != model.obs_dim() {
        return Err(Error::Dimension {
            expected: model.obs_dim(),
            actual: observations.dim(),
            context: "observation columns",
        });
    }
    if init.dim() != model.state_dim() {
        return Err(Error::Dimension {
            expected: model.state_dim(),
            actual: init.dim(),
            context: "initial state belief",
        });
    }
    let filter = JointFilter::new(model, joint, observations.step());
    let mut belief = augment(init, joint);
    let mut history = Vec::with_capacity(observations.len());
    history.push(belief.clone());
    let times = observations.times();
    for k in 0..observations.len().saturating_sub(1) {
        let step = ukf_step(&belief, &filter, observations.state(k + 1), k, times[k], times[k + 1], cfg)?;
        belief = step.posterior;
        history.push(belief.clone());
    }
    let n = model.state_dim();
    let param_mean: Vec<f64> = (0..joint.len()).map(|j| belief.mean[n + j]).collect();
    let param_var: Vec<f64> = (0..joint.len()).map(|j| belief.cov[(n + j, n + j)]).collect();
    let mut params = model.params().to_vec();
    for (j, &i) in joint.estimated.iter().enumerate() {
        params[i] = param_mean[j];
    }
    let state = belief.marginal(&(0..n).collect::<Vec<_>>());
    Ok(JointEstimate {
        params,
        param_mean,
        param_var,
        state,
        history,
    })
}

/// Forward solve with fixed parameters: `horizon_steps + 1` samples starting
/// with `state` at time `t0`. Continuous models use RK4 with step `h`.
pub fn forecast_parametric(
    model: &StateSpaceModel,
    state: &[f64],
    params: &[f64],
    horizon_steps: usize,
    h: f64,
    t0: f64,
    substeps: usize,
) -> Result<Trajectory> {
    if state.iter().chain(params).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite forecast initial state or parameters".into()));
    }
    let f = model.dynamics().as_ref();
    let sub = forecast_substeps(f.time_mode(), substeps);
    let hs = h / sub as f64;
    let mut states = Vec::with_capacity(horizon_steps + 1);
    states.push(state.to_vec());
    for k in 0..horizon_steps {
        let mut x = states[k].clone();
        for j in 0..sub {
            x = advance(f, t0 + k as f64 * h + j as f64 * hs, &x, params, hs, None);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: k + 1 });
        }
        states.push(x);
    }
    Trajectory::from_states(model.dynamics().state_names(), t0, h, states)
}

/// Writes `k,t,<means...>,<variances...>`.
pub fn write_history_csv<W: Write>(
    history: &[GaussianBelief],
    times: &[f64],
    names: &[String],
    mut w: W,
) -> Result<()> {
    write!(w, "k,t")?;
    for n in names {
        write!(w, ",{n}")?;
    }
    for n in names {
        write!(w, ",var_{n}")?;
    }
    writeln!(w)?;
    for (k, (b, t)) in history.iter().zip(times).enumerate() {
        write!(w, "{k},{}", fmt_f64(*t))?;
        for v in b.mean.iter() {
            write!(w, ",{}", fmt_f64(*v))?;
        }
        for v in b.cov.diagonal().iter() {
            write!(w, ",{}", fmt_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
