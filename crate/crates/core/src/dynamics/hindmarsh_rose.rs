//! Networks of Hindmarsh-Rose neurons with sigmoidal synaptic coupling.
//!
//! The fast recovery variable uses the standard damped form
//! `dy/dt = 1 - c x^2 - y`; without the `-y` term the system runs away
//! instead of bursting every ~6 time units.
//!
//! State packing is neuron-major: `(x_1, y_1, z_1, ..., x_M, y_M, z_M)`.
//! Parameter packing is `(a_1, b_1, c_1, ..., a_M, b_M, c_M)` followed by
//! the `M^2 - M` off-diagonal coupling weights `beta[i][m]` in row-major
//! order (the diagonal is structurally absent).

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::model::{Dynamics, TimeMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HRNetworkParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// `coupling[i][m]` weights the input from neuron `m` into neuron `i`.
    pub coupling: Vec<Vec<f64>>,
}

impl HRNetworkParams {
    /// Uncoupled network with `a = 1, b = 3, c = 5`.
    pub fn uncoupled(m: usize) -> Self {
        Self {
            a: vec![1.0; m],
            b: vec![3.0; m],
            c: vec![5.0; m],
            coupling: vec![vec![0.0; m]; m],
        }
    }

    /// Standard neurons with `connections` distinct directed links drawn
    /// uniformly from the off-diagonal slots, weights uniform on `weight_range`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        connections: usize,
        weight_range: (f64, f64),
        rng: &mut R,
    ) -> Result<Self> {
        let slots = m * m.saturating_sub(1);
        if connections > slots {
            return Err(Error::Domain(format!(
                "{connections} connections requested but a {m}-neuron network has {slots} slots"
            )));
        }
        if !(weight_range.0 <= weight_range.1) {
            return Err(Error::Domain(format!("bad weight range {weight_range:?}")));
        }
        let mut p = Self::uncoupled(m);
        let weights = Uniform::new_inclusive(weight_range.0, weight_range.1)
            .map_err(|e| Error::Domain(e.to_string()))?;
        let mut chosen = sample(rng, slots, connections).into_vec();
        chosen.sort_unstable();
        for slot in chosen {
            let (i, m_) = off_diagonal_slot(m, slot);
            p.coupling[i][m_] = weights.sample(rng);
        }
        Ok(p)
    }

    pub fn neurons(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.neurons();
        if self.b.len() != m || self.c.len() != m || self.coupling.len() != m {
            return Err(Error::Invariant("inconsistent neuron count".into()));
        }
        for (i, row) in self.coupling.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Invariant(format!("coupling row {i} has length {}", row.len())));
            }
            if row[i] != 0.0 {
                return Err(Error::Invariant(format!(
                    "self connection beta[{i}][{i}] = {} is not allowed",
                    row[i]
                )));
            }
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let m = self.neurons();
        let mut v = Vec::with_capacity(3 * m + m * m);
        for i in 0..m {
            v.extend([self.a[i], self.b[i], self.c[i]]);
        }
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    v.push(self.coupling[i][j]);
                }
            }
        }
        v
    }

    pub fn from_vec(m: usize, v: &[f64]) -> Result<Self> {
        let n = HindmarshRoseNetwork::new(m).param_dim();
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: v.len(),
                context: "Hindmarsh-Rose parameter vector",
            });
        }
        let mut p = Self::uncoupled(m);
        for i in 0..m {
            p.a[i] = v[3 * i];
            p.b[i] = v[3 * i + 1];
            p.c[i] = v[3 * i + 2];
        }
        for slot in 0..m * (m - 1) {
            let (i, j) = off_diagonal_slot(m, slot);
            p.coupling[i][j] = v[3 * m + slot];
        }
        Ok(p)
    }
}

/// Row-major position of off-diagonal slot `slot` in an `m x m` matrix.
fn off_diagonal_slot(m: usize, slot: usize) -> (usize, usize) {
    let i = slot / (m - 1);
    let r = slot % (m - 1);
    (i, if r >= i { r + 1 } else { r })
}

#[derive(Debug, Clone, Copy)]
pub struct HindmarshRoseNetwork {
    neurons: usize,
}

impl HindmarshRoseNetwork {
    pub fn new(neurons: usize) -> Self {
        assert!(neurons >= 1, "network needs at least one neuron");
        Self { neurons }
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn x_index(neuron: usize) -> usize {
        3 * neuron
    }

    pub fn a_index(neuron: usize) -> usize {
        3 * neuron
    }
    pub fn b_index(neuron: usize) -> usize {
        3 * neuron + 1
    }
    pub fn c_index(neuron: usize) -> usize {
        3 * neuron + 2
    }
    /// Parameter index of `beta[i][m]`, `i != m`.
    pub fn coupling_index(&self, i: usize, m: usize) -> usize {
        assert_ne!(i, m);
        let r = if m > i { m - 1 } else { m };
        3 * self.neurons + i * (self.neurons - 1) + r
    }
}

#[inline]
fn synapse(x: f64) -> f64 {
    x / (1.0 + 9.0 * (-10.0 * x).exp())
}

fn rhs(m: usize, x: &[f64], p: &[f64], out: &mut [f64]) {
    let beta0 = 3 * m;
    for i in 0..m {
        let (xi, yi, zi) = (x[3 * i], x[3 * i + 1], x[3 * i + 2]);
        let (a, b, c) = (p[3 * i], p[3 * i + 1], p[3 * i + 2]);
        let mut input = 0.0;
        let row = beta0 + i * (m - 1);
        let mut slot = 0;
        for j in 0..m {
            if j == i {
                continue;
            }
            input += p[row + slot] * synapse(x[3 * j]);
            slot += 1;
        }
        out[3 * i] = yi - a * xi * xi * xi + b * xi * xi - zi + 1.2 + input;
        out[3 * i + 1] = 1.0 - c * xi * xi - yi;
        out[3 * i + 2] = 5e-5 * (4.0 * (xi + 1.6) - zi);
    }
}

/// Derivatives of a packed network state.
pub fn hindmarsh_rose_rhs(state: &[f64], params: &HRNetworkParams) -> Result<Vec<f64>> {
    params.validate()?;
    let m = params.neurons();
    if state.len() != 3 * m {
        return Err(Error::Dimension {
            expected: 3 * m,
            actual: state.len(),
            context: "Hindmarsh-Rose state",
        });
    }
    let mut out = vec![0.0; 3 * m];
    rhs(m, state, &params.to_vec(), &mut out);
    Ok(out)
}

impl Dynamics for HindmarshRoseNetwork {
    fn state_dim(&self) -> usize {
        3 * self.neurons
    }
    fn param_dim(&self) -> usize {
        3 * self.neurons + self.neurons * (self.neurons - 1)
    }
    fn time_mode(&self) -> TimeMode {
        TimeMode::Continuous
    }
    fn eval(&self, _t: f64, x: &[f64], p: &[f64], out: &mut [f64]) {
        rhs(self.neurons, x, p, out);
    }
    fn state_names(&self) -> Vec<String> {
        (1..=self.neurons)
            .flat_map(|i| [format!("x{i}"), format!("y{i}"), format!("z{i}")])
            .collect()
    }
    fn param_names(&self) -> Vec<String> {
        let m = self.neurons;
        let mut v: Vec<String> = (1..=m)
            .flat_map(|i| [format!("a{i}"), format!("b{i}"), format!("c{i}")])
            .collect();
        for i in 1..=m {
            for j in 1..=m {
                if i != j {
                    v.push(format!("beta{i}{j}"));
                }
            }
        }
        v
    }
    fn equation_states(&self, eq: usize) -> Vec<usize> {
        let i = eq / 3;
        match eq % 3 {
            0 => {
                let mut v = vec![3 * i, 3 * i + 1, 3 * i + 2];
                v.extend((0..self.neurons).filter(|&j| j != i).map(|j| 3 * j));
                v.sort_unstable();
                v
            }
            1 => vec![3 * i, 3 * i + 1],
            _ => vec![3 * i, 3 * i + 2],
        }
    }
    fn equation_params(&self, eq: usize) -> Vec<usize> {
        let i = eq / 3;
        match eq % 3 {
            0 => {
                let mut v = vec![Self::a_index(i), Self::b_index(i)];
                v.extend(
                    (0..self.neurons)
                        .filter(|&j| j != i)
                        .map(|j| self.coupling_index(i, j)),
                );
                v
            }
            1 => vec![Self::c_index(i)],
            _ => vec![],
        }
    }
}
