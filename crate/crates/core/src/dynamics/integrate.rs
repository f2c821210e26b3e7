//! Fixed-step integrators: classical RK4 and an Adams-Bashforth/Adams-Moulton
//! fourth-order predictor-corrector (PECE) bootstrapped with RK4.

use serde::{Deserialize, Serialize};

use super::model::{Dynamics, StateSpaceModel, TimeMode};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Am4,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "am4" => Ok(Method::Am4),
            other => Err(Error::Domain(format!("unknown integration method `{other}`"))),
        }
    }
}

/// One RK4 step. When `active` is given, components whose flag is false
/// have their derivative forced to zero, so they are held constant over
/// the step while still feeding the active equations.
pub fn rk4_step(
    f: &dyn Dynamics,
    t: f64,
    x: &[f64],
    p: &[f64],
    h: f64,
    active: Option<&[bool]>,
) -> Vec<f64> {
    rk4_core(f, t, x, p, h, active.map(|a| (a, None)))
}

/// RK4 step in which each inactive component `i` moves at the constant
/// rate `rates[i]`, i.e. follows a straight line across the step.
pub fn rk4_step_driven(
    f: &dyn Dynamics,
    t: f64,
    x: &[f64],
    p: &[f64],
    h: f64,
    active: &[bool],
    rates: &[f64],
) -> Vec<f64> {
    rk4_core(f, t, x, p, h, Some((active, Some(rates))))
}

fn rk4_core(
    f: &dyn Dynamics,
    t: f64,
    x: &[f64],
    p: &[f64],
    h: f64,
    inactive: Option<(&[bool], Option<&[f64]>)>,
) -> Vec<f64> {
    let n = x.len();
    let mask = |k: &mut [f64]| {
        if let Some((a, rates)) = inactive {
            for (i, (v, &on)) in k.iter_mut().zip(a).enumerate() {
                if !on {
                    *v = rates.map_or(0.0, |r| r[i]);
                }
            }
        }
    };
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];

    f.eval(t, x, p, &mut k1);
    mask(&mut k1);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f.eval(t + 0.5 * h, &tmp, p, &mut k2);
    mask(&mut k2);
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f.eval(t + 0.5 * h, &tmp, p, &mut k3);
    mask(&mut k3);
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f.eval(t + h, &tmp, p, &mut k4);
    mask(&mut k4);
    for i in 0..n {
        tmp[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    tmp
}

/// Advances one sample interval: an RK4 step for continuous systems, one
/// application of the map for discrete ones. `active` has the same meaning
/// as in [`rk4_step`]; inactive components of a discrete map keep their value.
pub fn advance(
    f: &dyn Dynamics,
    t: f64,
    x: &[f64],
    p: &[f64],
    h: f64,
    active: Option<&[bool]>,
) -> Vec<f64> {
    match f.time_mode() {
        TimeMode::Continuous => rk4_step(f, t, x, p, h, active),
        TimeMode::Discrete => {
            let mut out = vec![0.0; x.len()];
            f.eval(t, x, p, &mut out);
            if let Some(a) = active {
                for i in 0..x.len() {
                    if !a[i] {
                        out[i] = x[i];
                    }
                }
            }
            out
        }
    }
}

/// Integrator substeps per sample for a forecast; discrete maps always take one.
pub fn forecast_substeps(mode: TimeMode, substeps: usize) -> usize {
    match mode {
        TimeMode::Continuous => substeps.max(1),
        TimeMode::Discrete => 1,
    }
}

/// Integrates `f` for `n_steps` steps of size `h`, returning `n_steps + 1` states.
pub fn integrate_dynamics(
    f: &dyn Dynamics,
    p: &[f64],
    x0: &[f64],
    t0: f64,
    h: f64,
    n_steps: usize,
    method: Method,
) -> Result<Vec<Vec<f64>>> {
    if f.time_mode() != TimeMode::Continuous {
        return Err(Error::Domain("integrate requires a continuous-time model".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    if x0.len() != f.state_dim() {
        return Err(Error::Dimension {
            expected: f.state_dim(),
            actual: x0.len(),
            context: "initial state",
        });
    }
    let n = x0.len();
    let check = |x: &[f64], step: usize| -> Result<()> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::IntegrationDiverged { step })
        }
    };
    check(x0, 0)?;
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(x0.to_vec());
    match method {
        Method::Rk4 => {
            for k in 0..n_steps {
                let t = t0 + k as f64 * h;
                let next = rk4_step(f, t, &out[k], p, h, None);
                check(&next, k + 1)?;
                out.push(next);
            }
        }
        Method::Am4 => {
            // derivative history, most recent last
            let mut hist: Vec<Vec<f64>> = Vec::with_capacity(n_steps + 1);
            let eval = |t: f64, x: &[f64]| {
                let mut d = vec![0.0; n];
                f.eval(t, x, p, &mut d);
                d
            };
            hist.push(eval(t0, x0));
            for k in 0..n_steps {
                let t = t0 + k as f64 * h;
                let t1 = t0 + (k + 1) as f64 * h;
                let next = if k < 3 {
                    rk4_step(f, t, &out[k], p, h, None)
                } else {
                    let y = &out[k];
                    let (f0, f1, f2, f3) = (&hist[k], &hist[k - 1], &hist[k - 2], &hist[k - 3]);
                    let pred: Vec<f64> = (0..n)
                        .map(|i| {
                            y[i] + h / 24.0
                                * (55.0 * f0[i] - 59.0 * f1[i] + 37.0 * f2[i] - 9.0 * f3[i])
                        })
                        .collect();
                    let fp = eval(t1, &pred);
                    (0..n)
                        .map(|i| {
                            y[i] + h / 24.0 * (9.0 * fp[i] + 19.0 * f0[i] - 5.0 * f1[i] + f2[i])
                        })
                        .collect()
                };
                check(&next, k + 1)?;
                hist.push(eval(t1, &next));
                out.push(next);
            }
        }
    }
    Ok(out)
}

/// Integrates a continuous-time model with its own parameters.
pub fn integrate(
    model: &StateSpaceModel,
    x0: &[f64],
    h: f64,
    n_steps: usize,
    method: Method,
) -> Result<Trajectory> {
    let states = integrate_dynamics(model.dynamics().as_ref(), model.params(), x0, 0.0, h, n_steps, method)?;
    Trajectory::from_states(model.dynamics().state_names(), 0.0, h, states)
}

/// Iterates a discrete map or integrates a continuous system from `t0`.
pub fn simulate_dynamics(
    f: &dyn Dynamics,
    p: &[f64],
    x0: &[f64],
    t0: f64,
    h: f64,
    n_steps: usize,
    method: Method,
) -> Result<Vec<Vec<f64>>> {
    match f.time_mode() {
        TimeMode::Continuous => integrate_dynamics(f, p, x0, t0, h, n_steps, method),
        TimeMode::Discrete => {
            let mut out = Vec::with_capacity(n_steps + 1);
            out.push(x0.to_vec());
            for k in 0..n_steps {
                let next = advance(f, t0 + k as f64 * h, &out[k], p, h, None);
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::IntegrationDiverged { step: k + 1 });
                }
                out.push(next);
            }
            Ok(out)
        }
    }
}

/// [`simulate_dynamics`] wrapped into a [`Trajectory`].
pub fn simulate(
    model: &StateSpaceModel,
    x0: &[f64],
    h: f64,
    n_steps: usize,
    method: Method,
) -> Result<Trajectory> {
    let states = simulate_dynamics(model.dynamics().as_ref(), model.params(), x0, 0.0, h, n_steps, method)?;
    Trajectory::from_states(model.dynamics().state_names(), 0.0, h, states)
}
