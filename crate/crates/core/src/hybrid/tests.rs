use std::sync::Arc;

use super::*;
use crate::dynamics::{
    add_observation_noise, rk4_step, Dynamics, HRNetworkParams, LorenzParams, Method, StateSpaceModel,
    SystemInstance, TimeMode, Trajectory,
};
use crate::error::Error;
use crate::takens::Weighting;
use crate::ukf::{forecast_parametric, initial_belief, joint_estimate, JointConfig, UkfConfig, UnscentedScaling};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn delay(d: usize, kappa: usize) -> DelayConfig {
    DelayConfig {
        d,
        tau: 1,
        kappa,
        weighting: Weighting::Uniform,
    }
}

fn lorenz_data(n: usize, noise: f64, seed: u64) -> (StateSpaceModel, Trajectory, Trajectory) {
    let sys = SystemInstance::lorenz(LorenzParams::default());
    let truth = sys.generate(&[1.0, 1.0, 20.0], 0.05, n, 300, Method::Am4, 10).unwrap();
    let obs = add_observation_noise(&truth, noise, seed).unwrap();
    (sys.model(1e-6, noise.max(1e-6)).unwrap(), truth, obs)
}

fn raw(replaced: Vec<usize>, d: usize, kappa: usize) -> HybridConfig {
    let mut cfg = HybridConfig::new(replaced, delay(d, kappa));
    cfg.denoise = false;
    cfg
}

#[test]
fn lorenz_replace_y_drops_rho() {
    let (model, _, obs) = lorenz_data(100, 4.0, 1);
    let hm = make_hybrid_model(&model, &raw(vec![1], 9, 20), &obs).unwrap();
    assert_eq!(hm.retained(), &[0, 2]);
    assert_eq!(hm.retained_params(), &[0, 2]);
    assert_eq!(hm.state_dim(), 2 + 10);
    assert_eq!(hm.start_index(), 9);
    assert_eq!(hm.obs_positions(), &[0, 2, 1]);
    assert_eq!(hm.output_vars(), vec![0, 1, 2]);
}

#[test]
fn hr_neuron_three_keeps_its_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = HRNetworkParams::random(3, 5, (0.1, 0.5), &mut rng).unwrap();
    let sys = SystemInstance::hr_network(&p).unwrap();
    let truth = sys.generate(&sys.sample_initial_state(&mut rng), 0.08, 200, 100, Method::Am4, 10).unwrap();
    let model = sys.model(1e-6, 0.2).unwrap();
    let obs = add_observation_noise(&truth.project(&[0, 3, 6]).unwrap(), 0.2, 3).unwrap();
    let hm = make_hybrid_model(&model, &raw(vec![0, 1, 2, 3, 4, 5], 9, 10), &obs).unwrap();
    assert_eq!(hm.retained(), &[6, 7, 8]);
    assert_eq!(hm.dropped(), &[1, 2, 4, 5]);
    // a3, b3, c3, beta31, beta32
    assert_eq!(hm.retained_params(), &[6, 7, 8, 13, 14]);
    let names = sys.dynamics.param_names();
    let kept: Vec<&str> = hm.retained_params().iter().map(|&i| names[i].as_str()).collect();
    assert_eq!(kept, ["a3", "b3", "c3", "beta31", "beta32"]);
    assert_eq!(hm.state_dim(), 3 + 2 * 10);
}

#[test]
fn unobserved_replacement_is_rejected() {
    let sys = SystemInstance::lorenz(LorenzParams::default());
    let model = StateSpaceModel::observed_coordinates(sys.dynamics.clone(), sys.params.clone(), vec![0, 2], 1e-6, 4.0)
        .unwrap();
    let truth = sys.generate(&[1.0, 1.0, 20.0], 0.05, 50, 0, Method::Rk4, 1).unwrap();
    let obs = truth.project(&[0, 2]).unwrap();
    let err = make_hybrid_model(&model, &raw(vec![1], 2, 3), &obs).unwrap_err();
    assert!(matches!(err, Error::Unobserved { index: 1 }));
    assert!(err.to_string().contains("observed"));
}

#[test]
fn empty_replacement_is_the_parametric_pipeline() {
    let (model, _, obs) = lorenz_data(200, 4.0, 5);
    let hm = make_hybrid_model(&model, &HybridConfig::new(vec![], delay(9, 20)), &obs).unwrap();
    assert_eq!(hm.state_dim(), 3);
    let joint = JointConfig::new(vec![0, 1, 2], vec![7.0, 31.0, 3.0], vec![4.0, 9.0, 1.0]);
    let cfg = UkfConfig::default();

    let init = initial_belief(&model, obs.state(0), 10.0).unwrap();
    let para = joint_estimate(&model, &obs, &joint, &init, &cfg).unwrap();
    let hinit = hybrid_initial_belief(&hm, &obs, 10.0).unwrap();
    assert_eq!(hinit, init);
    let hyb = hybrid_ukf_fit(&hm, &obs, &joint, &hinit, &cfg).unwrap();
    assert_eq!(hyb.params, para.params);
    assert_eq!(hyb.param_var, para.param_var);
    assert_eq!(hyb.state, para.state);

    let t0 = *obs.times().last().unwrap();
    let pf = forecast_parametric(&model, para.state.mean.as_slice(), &para.params, 20, 0.05, t0, 1).unwrap();
    let (hf, warn) = forecast_hybrid(&hm, &hm.unpack(hyb.state.mean.as_slice()), &hyb.params, 20, 0.05, t0, 1).unwrap();
    assert_eq!(warn, 0);
    assert_eq!(hf, pf);
}

#[test]
fn empty_replacement_advance_is_one_rk4_step() {
    let (model, _, obs) = lorenz_data(50, 0.0, 0);
    let hm = make_hybrid_model(&model, &raw(vec![], 2, 2), &obs).unwrap();
    let x = vec![1.5, -2.0, 24.0];
    let (next, fb) = hybrid_advance(&hm.unpack(&x), &hm, model.params(), 0.0, 0.05).unwrap();
    assert!(!fb);
    let oracle = rk4_step(model.dynamics().as_ref(), 0.0, &x, model.params(), 0.05, None);
    assert_eq!(next.mechanistic, oracle);
}

/// Uses an exact noise-free library at step `h` and returns the one-step
/// error of the hybrid advance against the full-model RK4 step.
fn exact_library_error(h: f64, hold: Hold) -> (f64, f64) {
    let sys = SystemInstance::lorenz(LorenzParams::default());
    let n = (10.0 / h) as usize;
    let truth = sys.generate(&[1.0, 1.0, 20.0], h, n, (2.0 / h) as usize, Method::Rk4, 4).unwrap();
    let model = sys.model(1e-6, 1.0).unwrap();
    let mut cfg = raw(vec![1], 3, 1);
    cfg.hold = hold;
    let hm = make_hybrid_model(&model, &cfg, &truth).unwrap();
    let k = n / 2;
    let mut v = vec![truth.state(k)[0], truth.state(k)[2]];
    v.extend((0..4).map(|j| truth.state(k - j)[1]));
    let (next, _) = hybrid_advance(&hm.unpack(&v), &hm, model.params(), 0.0, h).unwrap();
    let full = rk4_step(model.dynamics().as_ref(), 0.0, truth.state(k), model.params(), h, None);
    let y_err = (next.delays[0][0] - truth.state(k + 1)[1]).abs();
    let mech_err = (next.mechanistic[0] - full[0]).abs().max((next.mechanistic[1] - full[2]).abs());
    (y_err, mech_err)
}

fn exact_library_order(hold: Hold) -> f64 {
    let (y1, m1) = exact_library_error(0.01, hold);
    let (y2, m2) = exact_library_error(0.005, hold);
    assert_eq!(y1, 0.0);
    assert_eq!(y2, 0.0);
    assert!(m1 < 0.05, "{m1}");
    (m1 / m2).log2()
}

#[test]
fn exact_library_reproduces_next_state() {
    // local error order 2 when the replaced value is held, 3 when interpolated
    let zoh = exact_library_order(Hold::ZeroOrder);
    assert!((1.5..=2.5).contains(&zoh), "zero-order hold order {zoh}");
    let lin = exact_library_order(Hold::Linear);
    assert!((2.5..=3.5).contains(&lin), "linear hold order {lin}");
}

/// Lorenz with the y equation frozen.
#[derive(Debug)]
struct FrozenY;

impl Dynamics for FrozenY {
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
        out[0] = p[0] * (x[1] - x[0]);
        out[1] = 0.0;
        out[2] = x[0] * x[1] - p[2] * x[2];
    }
    fn state_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "z".into()]
    }
    fn param_names(&self) -> Vec<String> {
        vec!["sigma".into(), "rho".into(), "beta".into()]
    }
    fn equation_states(&self, _eq: usize) -> Vec<usize> {
        vec![0, 1, 2]
    }
    fn equation_params(&self, eq: usize) -> Vec<usize> {
        vec![eq]
    }
}

#[test]
fn constant_replaced_series_is_a_frozen_input() {
    let (model, _, _) = lorenz_data(10, 1.0, 0);
    let c = 3.25;
    let series: Vec<Vec<f64>> = (0..60).map(|k| vec![k as f64, c, 0.0]).collect();
    let obs = Trajectory::from_states(vec!["x".into(), "y".into(), "z".into()], 0.0, 0.05, series).unwrap();
    let hm = make_hybrid_model(&model, &raw(vec![1], 2, 4), &obs).unwrap();
    let s0 = HybridState {
        mechanistic: vec![1.0, 20.0],
        delays: vec![vec![c; 3]],
    };
    let (s1, _) = hybrid_advance(&s0, &hm, model.params(), 0.0, 0.05).unwrap();
    let (s2, _) = hybrid_advance(&s1, &hm, model.params(), 0.05, 0.05).unwrap();
    assert_eq!(s2.delays[0], vec![c; 3]);
    let f = Arc::new(FrozenY);
    let p = model.params();
    let r1 = rk4_step(f.as_ref(), 0.0, &[1.0, c, 20.0], p, 0.05, None);
    let r2 = rk4_step(f.as_ref(), 0.05, &r1, p, 0.05, None);
    assert_eq!(s2.mechanistic, vec![r2[0], r2[2]]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn delay_block_shifts_exactly(
        window in prop::collection::vec(-20.0f64..20.0, 6),
        x in -20.0f64..20.0,
        z in 5.0f64..45.0,
    ) {
        let (model, _, obs) = lorenz_data(200, 4.0, 9);
        let hm = make_hybrid_model(&model, &raw(vec![1], 5, 7), &obs).unwrap();
        let s = HybridState {
            mechanistic: vec![x, z],
            delays: vec![window.clone()],
        };
        let (next, _) = hybrid_advance(&s, &hm, model.params(), 0.0, 0.05).unwrap();
        prop_assert_eq!(&next.delays[0][1..], &window[..5]);
    }
}

#[test]
fn single_neighbor_forecast_is_verbatim() {
    let (model, _, obs) = lorenz_data(300, 4.0, 4);
    let hm = make_hybrid_model(&model, &raw(vec![1], 4, 1), &obs).unwrap();
    let y = obs.column(1);
    let window: Vec<f64> = (0..5).map(|j| y[150 - j] + 0.01).collect();
    let s = HybridState {
        mechanistic: vec![1.0, 20.0],
        delays: vec![window.clone()],
    };
    let horizon = 12;
    let lib = &hm.embedded()[0].library;
    let nb = crate::takens::knn(lib, &window, 1, horizon).unwrap();
    let (traj, warn) = forecast_hybrid(&hm, &s, model.params(), horizon, 0.05, 0.0, 1).unwrap();
    assert_eq!(warn, 0);
    let fy = traj.column(1);
    for i in 1..=horizon {
        assert_eq!(fy[i], y[nb.indices[0] + i]);
    }
    let (traj0, _) = forecast_hybrid(&hm, &s, model.params(), 0, 0.05, 0.0, 1).unwrap();
    assert_eq!(traj0.len(), 1);
    assert_eq!(traj0.state(0), &[1.0, window[0], 20.0]);
}

#[test]
fn initial_belief_layout() {
    let (model, _, obs) = lorenz_data(50, 4.0, 2);
    let hm = make_hybrid_model(&model, &raw(vec![1], 3, 2), &obs).unwrap();
    let b = hybrid_initial_belief(&hm, &obs, 10.0).unwrap();
    assert_eq!(b.mean[0], obs.state(3)[0]);
    assert_eq!(b.mean[1], obs.state(3)[1 + 1]);
    for lag in 0..4 {
        assert_eq!(b.mean[2 + lag], obs.state(3 - lag)[1]);
    }
    assert!(b.variances().iter().all(|&v| v == 4.0));
}

#[test]
fn lorenz_hybrid_fit_is_near_truth_with_small_noise() {
    let (model, _, obs) = lorenz_data(500, 0.25, 8);
    let mut cfg = raw(vec![1], 9, 3);
    cfg.delay_process_factor = 1.0;
    let hm = make_hybrid_model(&model, &cfg, &obs).unwrap();
    let joint = JointConfig::new(vec![0, 1, 2], vec![12.0, 30.0, 3.2], vec![4.0, 9.0, 0.25]);
    let init = hybrid_initial_belief(&hm, &obs, 10.0).unwrap();
    let ukf = UkfConfig {
        scaling: UnscentedScaling { lambda: Some(2.0) },
        ..UkfConfig::default()
    };
    let fit = hybrid_ukf_fit(&hm, &obs, &joint, &init, &ukf).unwrap();
    assert_eq!(fit.estimated, vec![0, 2]);
    assert!((fit.params[0] - 10.0).abs() < 1.5, "sigma {}", fit.params[0]);
    assert!((fit.params[2] - 8.0 / 3.0).abs() < 0.4, "beta {}", fit.params[2]);
    assert_eq!(fit.params[1], 28.0);
}
