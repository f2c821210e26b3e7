//! Lorenz-63 convection model.

use serde::{Deserialize, Serialize};

use super::model::{Dynamics, TimeMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

impl LorenzParams {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.sigma, self.rho, self.beta]
    }
}

/// Parameter order: `[sigma, rho, beta]`; state order `[x, y, z]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lorenz63;

pub const SIGMA: usize = 0;
pub const RHO: usize = 1;
pub const BETA: usize = 2;

#[inline]
fn rhs(x: &[f64], p: &[f64], out: &mut [f64]) {
    let (sigma, rho, beta) = (p[SIGMA], p[RHO], p[BETA]);
    out[0] = sigma * (x[1] - x[0]);
    out[1] = x[0] * (rho - x[2]) - x[1];
    out[2] = x[0] * x[1] - beta * x[2];
}

/// `(σ(y−x), x(ρ−z)−y, xy−βz)`.
pub fn lorenz63_rhs(state: [f64; 3], params: LorenzParams) -> Result<[f64; 3]> {
    let p = params.to_vec();
    if state.iter().chain(&p).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite Lorenz-63 input".into()));
    }
    let mut out = [0.0; 3];
    rhs(&state, &p, &mut out);
    Ok(out)
}

impl Dynamics for Lorenz63 {
    fn state_dim(&self) -> usize {
        3
    }
    fn param_dim(&self) -> usize {
        3
    }
    fn time_mode(&self) -> TimeMode {
        TimeMode::Continuous
    }
    fn eval(&self, _t: f64, x: &[f64], p: &[f64], out: &mut [f64]) {
        rhs(x, p, out);
    }
    fn state_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "z".into()]
    }
    fn param_names(&self) -> Vec<String> {
        vec!["sigma".into(), "rho".into(), "beta".into()]
    }
    fn equation_states(&self, eq: usize) -> Vec<usize> {
        match eq {
            0 => vec![0, 1],
            1 | 2 => vec![0, 1, 2],
            _ => vec![],
        }
    }
    fn equation_params(&self, eq: usize) -> Vec<usize> {
        match eq {
            0 => vec![SIGMA],
            1 => vec![RHO],
            2 => vec![BETA],
            _ => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_fixed() {
        assert_eq!(lorenz63_rhs([0.0; 3], LorenzParams::default()).unwrap(), [0.0; 3]);
    }

    #[test]
    fn unit_state() {
        let d = lorenz63_rhs([1.0; 3], LorenzParams::default()).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 26.0);
        assert!((d[2] - (-5.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn nontrivial_fixed_point() {
        // x = y = sqrt(beta (rho - 1)), z = rho - 1
        let r = 72f64.sqrt();
        let d = lorenz63_rhs([r, r, 27.0], LorenzParams::default()).unwrap();
        for v in d {
            assert!(v.abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn rejects_nan() {
        assert!(matches!(
            lorenz63_rhs([f64::NAN, 0.0, 0.0], LorenzParams::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        let p = LorenzParams::default();
        let s = toml::to_string(&p).unwrap();
        let back: LorenzParams = toml::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.beta.to_bits(), (8.0f64 / 3.0).to_bits());
    }
}
