//! Larvae-pupae-adult map for *Tribolium* flour beetles. One step is two weeks.

use serde::{Deserialize, Serialize};

use super::model::{Dynamics, TimeMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LPAParams {
    pub b: f64,
    pub c_el: f64,
    pub c_ea: f64,
    pub c_pa: f64,
    pub mu_l: f64,
    pub mu_a: f64,
}

impl LPAParams {
    /// Published fit with experimentally fixed adult mortality and the
    /// given recruitment coefficient `c_pa`.
    pub fn published(c_pa: f64) -> Self {
        Self {
            b: 6.598,
            c_el: 1.209e-2,
            c_ea: 1.155e-2,
            c_pa,
            mu_l: 0.2055,
            mu_a: 0.96,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.b, self.c_el, self.c_ea, self.c_pa, self.mu_l, self.mu_a];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("LPA parameters must be nonnegative: {self:?}")));
        }
        if self.mu_l > 1.0 || self.mu_a > 1.0 {
            return Err(Error::Domain(format!("LPA mortalities must lie in [0, 1]: {self:?}")));
        }
        Ok(())
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.b, self.c_el, self.c_ea, self.c_pa, self.mu_l, self.mu_a]
    }
}

pub const B: usize = 0;
pub const C_EL: usize = 1;
pub const C_EA: usize = 2;
pub const C_PA: usize = 3;
pub const MU_L: usize = 4;
pub const MU_A: usize = 5;

#[inline]
fn map(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (l, pu, a) = (x[0], x[1], x[2]);
    out[0] = p[B] * a * (-p[C_EL] * l - p[C_EA] * a).exp();
    out[1] = l * (1.0 - p[MU_L]);
    out[2] = pu * (-p[C_PA] * a).exp() + a * (1.0 - p[MU_A]);
}

/// One two-week step of `(L, P, A)`.
pub fn lpa_step(pop: [f64; 3], params: LPAParams) -> Result<[f64; 3]> {
    params.validate()?;
    if pop.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain(format!("populations must be nonnegative: {pop:?}")));
    }
    let mut out = [0.0; 3];
    map(&pop, &params.to_vec(), &mut out);
    Ok(out)
}

/// State order `[L, P, A]`; parameter order `[b, c_el, c_ea, c_pa, mu_l, mu_a]`.
///
/// The filter-facing [`Dynamics::eval`] does not reject negative values,
/// since sigma points of a noisy population estimate can dip below zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lpa;

impl Dynamics for Lpa {
    fn state_dim(&self) -> usize {
        3
    }
    fn param_dim(&self) -> usize {
        6
    }
    fn time_mode(&self) -> TimeMode {
        TimeMode::Discrete
    }
    fn eval(&self, _t: f64, x: &[f64], p: &[f64], out: &mut [f64]) {
        map(x, p, out);
    }
    fn state_names(&self) -> Vec<String> {
        vec!["L".into(), "P".into(), "A".into()]
    }
    fn param_names(&self) -> Vec<String> {
        ["b", "c_el", "c_ea", "c_pa", "mu_l", "mu_a"]
            .into_iter()
            .map(String::from)
            .collect()
    }
    fn equation_states(&self, eq: usize) -> Vec<usize> {
        match eq {
            0 => vec![0, 2],
            1 => vec![0],
            2 => vec![1, 2],
            _ => vec![],
        }
    }
    fn equation_params(&self, eq: usize) -> Vec<usize> {
        match eq {
            0 => vec![B, C_EL, C_EA],
            1 => vec![MU_L],
            2 => vec![C_PA, MU_A],
            _ => vec![],
        }
    }
}
