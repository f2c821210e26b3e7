use std::cell::Cell;

use nalgebra::DMatrix;

use super::model::{Hold, HybridModel, HybridState};
use crate::dynamics::{forecast_substeps, Trajectory};
use crate::error::{Error, Result};
use crate::takens::{knn_with, Eligibility};
use crate::ukf::{augment, ukf_step, FilterModel, GaussianBelief, JointConfig, UkfConfig};

/// Filter view of a hybrid model with estimated parameters appended.
struct HybridFilter<'a> {
    hm: &'a HybridModel,
    estimated: &'a [usize],
    h: f64,
    q: DMatrix<f64>,
    fallback: Cell<bool>,
}

impl<'a> HybridFilter<'a> {
    fn new(hm: &'a HybridModel, joint: &'a JointConfig, h: f64) -> Self {
        let n = hm.state_dim();
        let l = joint.len();
        let mut q = DMatrix::zeros(n + l, n + l);
        q.view_mut((0, 0), (n, n)).copy_from(hm.process_noise());
        for (j, v) in joint.process_var.iter().enumerate() {
            q[(n + j, n + j)] = *v;
        }
        Self {
            hm,
            estimated: &joint.estimated,
            h,
            q,
            fallback: Cell::new(false),
        }
    }

    fn params(&self, x: &[f64]) -> Vec<f64> {
        let n = self.hm.state_dim();
        let mut p = self.hm.base().params().to_vec();
        for (j, &i) in self.estimated.iter().enumerate() {
            p[i] = x[n + j];
        }
        p
    }
}

impl FilterModel for HybridFilter<'_> {
    fn dim(&self) -> usize {
        self.hm.state_dim() + self.estimated.len()
    }
    fn obs_dim(&self) -> usize {
        self.hm.obs_positions().len()
    }
    fn propagate(&self, k: usize, t: f64, x: &[f64]) -> Vec<f64> {
        let n = self.hm.state_dim();
        let p = self.params(x);
        let mut next = self.hm.advance_packed(k, t, &x[..n], &p, self.h, true, &self.fallback);
        next.extend_from_slice(&x[n..]);
        next
    }
    fn observe(&self, _k: usize, _t: f64, x: &[f64], y: &mut [f64]) {
        for (yj, &pos) in y.iter_mut().zip(self.hm.obs_positions()) {
            *yj = x[pos];
        }
    }
    fn process_noise(&self) -> &DMatrix<f64> {
        &self.q
    }
    fn obs_noise(&self) -> &DMatrix<f64> {
        self.hm.base().obs_noise()
    }
}

/// Initial hybrid-state belief at [`HybridModel::start_index`]. Observed
/// retained variables and every lag take their observed value with the
/// observation variance; unobserved retained variables start at zero with
/// `prior_var`.
pub fn hybrid_initial_belief(hm: &HybridModel, observations: &Trajectory, prior_var: f64) -> Result<GaussianBelief> {
    let k0 = hm.start_index();
    if observations.len() <= k0 {
        return Err(Error::SeriesTooShort {
            len: observations.len(),
            min: k0 + 1,
        });
    }
    let base = hm.base();
    let coords = base.observation().coordinates().expect("coordinate observations");
    let r = base.obs_noise();
    let n = hm.state_dim();
    let mut mean = vec![0.0; n];
    let mut var = vec![prior_var; n];
    for (p, &i) in hm.retained().iter().enumerate() {
        if let Some(j) = coords.iter().position(|&c| c == i) {
            mean[p] = observations.state(k0)[j];
            var[p] = r[(j, j)];
        }
    }
    for e in hm.embedded() {
        for lag in 0..e.delay.window_len() {
            mean[e.offset + lag] = observations.state(k0 - lag)[e.channel];
            var[e.offset + lag] = r[(e.channel, e.channel)];
        }
    }
    GaussianBelief::diagonal(mean, &var)
}

/// Outcome of filtering with a hybrid model.
#[derive(Debug, Clone)]
pub struct HybridFit {
    /// Full base parameter vector with estimated entries replaced.
    pub params: Vec<f64>,
    /// Parameter indices actually estimated (requested and retained).
    pub estimated: Vec<usize>,
    pub param_mean: Vec<f64>,
    pub param_var: Vec<f64>,
    /// Belief over the hybrid state at the last observation.
    pub state: GaussianBelief,
    /// Steps where some ensemble member fell back to persistence.
    pub warnings: usize,
}

/// Joint unscented filtering over the hybrid state. Only requested
/// parameters that appear in a retained equation are estimated. `init` is
/// the hybrid-state belief at observation [`HybridModel::start_index`].
pub fn hybrid_ukf_fit(
    hm: &HybridModel,
    observations: &Trajectory,
    joint: &JointConfig,
    init: &GaussianBelief,
    cfg: &UkfConfig,
) -> Result<HybridFit> {
    let base = hm.base();
    joint.validate(base.param_dim())?;
    if observations.dim() != base.obs_dim() {
        return Err(Error::Dimension {
            expected: base.obs_dim(),
            actual: observations.dim(),
            context: "observation columns",
        });
    }
    if init.dim() != hm.state_dim() {
        return Err(Error::Dimension {
            expected: hm.state_dim(),
            actual: init.dim(),
            context: "initial hybrid belief",
        });
    }
    let reduced = joint.restrict(|i| hm.retained_params().contains(&i));
    let filter = HybridFilter::new(hm, &reduced, observations.step());
    let mut belief = augment(init, &reduced);
    let times = observations.times();
    let mut warnings = 0;
    for k in hm.start_index()..observations.len().saturating_sub(1) {
        filter.fallback.set(false);
        let step = ukf_step(&belief, &filter, observations.state(k + 1), k, times[k], times[k + 1], cfg)?;
        if filter.fallback.get() {
            warnings += 1;
        }
        belief = step.posterior;
    }
    let n = hm.state_dim();
    let param_mean: Vec<f64> = (0..reduced.len()).map(|j| belief.mean[n + j]).collect();
    let param_var: Vec<f64> = (0..reduced.len()).map(|j| belief.cov[(n + j, n + j)]).collect();
    let mut params = base.params().to_vec();
    for (j, &i) in reduced.estimated.iter().enumerate() {
        params[i] = param_mean[j];
    }
    Ok(HybridFit {
        params,
        estimated: reduced.estimated.clone(),
        param_mean,
        param_var,
        state: belief.marginal(&(0..n).collect::<Vec<_>>()),
        warnings,
    })
}

/// Hybrid forecast of `horizon_steps` samples from `state` at time `t0`.
///
/// Each replaced variable uses one neighbor set found from its lag window at
/// `t0` and reads the neighbors' futures directly; retained variables are
/// integrated with the replaced values entering per the model's hold. The trajectory
/// covers [`HybridModel::output_vars`]. The count is the number of replaced
/// variables that fell back to persistence.
pub fn forecast_hybrid(
    hm: &HybridModel,
    state: &HybridState,
    params: &[f64],
    horizon_steps: usize,
    h: f64,
    t0: f64,
    substeps: usize,
) -> Result<(Trajectory, usize)> {
    let x = hm.pack(state);
    if x.len() != hm.state_dim() {
        return Err(Error::Dimension {
            expected: hm.state_dim(),
            actual: x.len(),
            context: "hybrid state",
        });
    }
    if x.iter().chain(params).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite forecast initial state or parameters".into()));
    }
    let mut warnings = 0;
    // replaced[e][i] is the value of embedded variable e after i steps
    let replaced: Vec<Vec<f64>> = hm
        .embedded()
        .iter()
        .zip(&state.delays)
        .map(|(e, w)| {
            let mut vals = vec![w[0]];
            let q = e.library.query_from_window(w);
            match knn_with(&e.library, &q, e.delay.kappa, Eligibility::future(horizon_steps), e.delay.weighting) {
                Ok(nb) => vals.extend((1..=horizon_steps).map(|i| nb.predict(&e.library, i))),
                Err(_) => {
                    warnings += 1;
                    vals.resize(horizon_steps + 1, w[0]);
                }
            }
            vals
        })
        .collect();

    let dynamics = hm.base().dynamics();
    let out_vars = hm.output_vars();
    let mut full = hm.base_state(&x);
    let mut states = Vec::with_capacity(horizon_steps + 1);
    states.push(out_vars.iter().map(|&i| full[i]).collect::<Vec<_>>());
    let sub = forecast_substeps(dynamics.time_mode(), substeps);
    let hs = h / sub as f64;
    for k in 0..horizon_steps {
        for j in 0..sub {
            let t = t0 + k as f64 * h + j as f64 * hs;
            // replaced values along the sample interval at the end of this substep
            let at = |v: &[f64]| match hm.hold() {
                Hold::Linear => v[k] + (j + 1) as f64 / sub as f64 * (v[k + 1] - v[k]),
                Hold::ZeroOrder => v[k],
            };
            let ends: Vec<(usize, f64)> = hm.embedded().iter().zip(&replaced).map(|(e, v)| (e.var, at(v))).collect();
            let mut next = hm.step_mechanistic(t, &full, params, hs, &ends);
            for &(i, v) in &ends {
                next[i] = v;
            }
            full = next;
        }
        for (e, vals) in hm.embedded().iter().zip(&replaced) {
            full[e.var] = vals[k + 1];
        }
        if full.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: k + 1 });
        }
        states.push(out_vars.iter().map(|&i| full[i]).collect());
    }
    let names = dynamics.state_names();
    let out_names = out_vars.iter().map(|&i| names[i].clone()).collect();
    Ok((Trajectory::from_states(out_names, t0, h, states)?, warnings))
}
