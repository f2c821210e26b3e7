use super::*;
use crate::dynamics::Trajectory;
use crate::error::Error;

const LORENZ: &str = r#"
[experiment]
system = "lorenz63"
training_samples = 300
forecast_samples = 10
h_time_units = 0.05
noise_variance = 4.0
uncertainty_pct = [0.0, 80.0]
realizations = 2
methods = ["parametric", "nonparametric", "hybrid"]
master_seed = 11
transient_samples = 200

[nonparametric]
d = 5
tau_samples = 1
kappa = 10

[hybrid]
replaced = ["y"]
d = 5
tau_samples = 1
kappa = 3
denoise = false

[lorenz63]
sigma = 10.0
rho = 28.0
beta = 2.6666666666666665
"#;

const LPA: &str = r#"
[experiment]
system = "lpa"
training_samples = 37
forecast_samples = 4
h_time_units = 2.0
noise_variance = 25.0
uncertainty_pct = [50.0, 80.0]
realizations = 21
methods = ["parametric", "nonparametric", "hybrid"]
master_seed = 3
estimated_params = ["b", "c_el", "c_ea", "mu_l"]

[nonparametric]
d = 2
tau_samples = 1
kappa = 5

[hybrid]
replaced = ["L"]
d = 2
tau_samples = 1
kappa = 5

[lpa]
b = 6.598
c_el = 0.01209
c_ea = 0.01155
mu_l = 0.2055
mu_a = 0.96
c_pa_values = [0.0, 0.05, 0.10, 0.25, 0.35, 0.50, 1.0]
replicates = 3
initial_state = [250.0, 5.0, 100.0]
"#;

fn lorenz() -> ExperimentConfig {
    ExperimentConfig::from_toml(LORENZ).unwrap()
}

fn parametric_only(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.experiment.methods = vec![ForecastMethod::Parametric];
    cfg
}

fn short_mean(rep: &ForecastReport, method: ForecastMethod, u: Option<f64>, steps: usize) -> f64 {
    let mut total = 0.0;
    for v in ["x", "y", "z"] {
        let c = rep.curve(method, u, v).unwrap();
        total += c[..steps].iter().sum::<f64>();
    }
    total / (3 * steps) as f64
}

#[test]
fn reports_are_deterministic() {
    let cfg = lorenz();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.realizations, 2);
    assert!(a.cells.iter().all(|c| c.failed == 0));
}

#[test]
fn perfect_model_and_data_forecast_well() {
    let mut cfg = parametric_only(lorenz());
    cfg.experiment.noise_variance = 0.0;
    cfg.experiment.uncertainty_pct = vec![0.0];
    cfg.experiment.training_samples = 500;
    cfg.experiment.forecast_samples = 20;
    let rep = run_experiment_scaled(&cfg, 1).unwrap();
    for v in ["x", "y", "z"] {
        let c = rep.curve(ForecastMethod::Parametric, Some(0.0), v).unwrap();
        assert_eq!(c.len(), 20);
        assert!(c.iter().all(|&e| e < 0.05), "{v}: {c:?}");
    }
}

#[test]
fn train_mean_forecaster_scores_near_one() {
    let mut cfg = lorenz();
    cfg.experiment.forecast_samples = 200;
    let mut acc = SrmseAccumulator::new(1);
    for r in 0..200 {
        let data = synthetic_realization(&cfg, r).unwrap();
        let train = data.train.column(0);
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        // far end of the forecast window, decorrelated from the training tail
        let truth = [data.future.column(0)[199]];
        acc.push(&srmse(&[mean], &truth, std_dev(&train)).unwrap());
    }
    let score = acc.mean()[0];
    assert!((score - 1.0).abs() < 0.1, "{score}");
}

#[test]
fn parameter_knowledge_helps_short_term() {
    let mut cfg = parametric_only(lorenz());
    cfg.experiment.training_samples = 500;
    // frozen exact parameters with near-zero state noise let the covariance collapse
    cfg.filter.state_process_variance = 1e-2;
    let rep = run_experiment_scaled(&cfg, 50).unwrap();
    let exact = short_mean(&rep, ForecastMethod::Parametric, Some(0.0), 5);
    let vague = short_mean(&rep, ForecastMethod::Parametric, Some(80.0), 5);
    assert!(exact <= vague, "{exact} > {vague}");
}

#[test]
fn lpa_design_has_three_replicates_per_rate() {
    let cfg = ExperimentConfig::from_toml(LPA).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for r in 0..cfg.experiment.realizations {
        let sys = realization_system(&cfg, r).unwrap();
        let names = sys.dynamics.param_names();
        let c_pa = sys.params[names.iter().position(|n| n == "c_pa").unwrap()];
        *counts.entry((c_pa * 100.0).round() as i64).or_insert(0) += 1;
        let data = synthetic_realization(&cfg, r).unwrap();
        assert_eq!(data.train.len(), 37);
        assert_eq!(data.future.len(), 4);
    }
    let expected: Vec<(i64, i32)> = [0, 5, 10, 25, 35, 50, 100].into_iter().map(|c| (c, 3)).collect();
    assert_eq!(counts.into_iter().collect::<Vec<_>>(), expected);
}

#[test]
fn empty_method_list_is_rejected() {
    let mut cfg = lorenz();
    cfg.experiment.methods.clear();
    match run_experiment(&cfg) {
        Err(Error::Config(msgs)) => assert!(msgs.iter().any(|m| m.starts_with("experiment.methods")), "{msgs:?}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}

/// Realizations whose training data blow up every filter after `bad` of them.
fn datasets(cfg: &ExperimentConfig, n: usize, bad: usize) -> Vec<RealizationData> {
    (0..n)
        .map(|r| {
            let mut d = synthetic_realization(cfg, r).unwrap();
            if r < bad {
                let mut states = d.train.states().to_vec();
                states[100] = vec![1e200; 3];
                d.train = Trajectory::new(
                    d.train.names().to_vec(),
                    d.train.times().to_vec(),
                    states,
                    d.train.step(),
                )
                .unwrap();
            }
            d
        })
        .collect()
}

#[test]
fn failed_realizations_are_counted_up_to_the_limit() {
    let mut cfg = parametric_only(lorenz());
    cfg.experiment.uncertainty_pct = vec![20.0];
    let rep = run_on_datasets(&cfg, &datasets(&cfg, 10, 2)).unwrap();
    let cell = &rep.cells[0];
    assert_eq!((cell.succeeded, cell.failed), (8, 2));
    assert!(cell.first_error.is_some());
    assert_eq!(rep.params.iter().map(|p| p.count).max(), Some(8));

    match run_on_datasets(&cfg, &datasets(&cfg, 10, 3)) {
        Err(Error::TooManyFailures { failed: 3, total: 10, .. }) => {}
        other => panic!("expected too many failures, got {other:?}"),
    }
}
