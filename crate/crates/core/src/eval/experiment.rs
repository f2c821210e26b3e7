use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ForecastMethod, HybridSection, NonparametricSection};
use super::report::{CellSummary, ForecastReport, ParamRow, SrmseRow};
use super::srmse::{sample_initial_params_with, srmse, std_dev, SrmseAccumulator};
use crate::dynamics::{add_observation_noise_with, HRNetworkParams, StateSpaceModel, SystemId, SystemInstance, Trajectory};
use crate::error::{Error, Result};
use crate::hybrid::{
    forecast_hybrid, hybrid_initial_belief, hybrid_ukf_fit, make_hybrid_model, DelayConfig, HybridConfig, HybridModel,
};
use crate::takens::{build_delay_library, direct_predict, kalman_takens_filter, KalmanTakensConfig};
use crate::ukf::{forecast_parametric, initial_belief, joint_estimate, JointConfig, UkfConfig, UnscentedScaling};

/// Largest tolerated fraction of failed realizations in any cell.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

/// Smallest observation variance given to the filters.
const MIN_OBS_VARIANCE: f64 = 1e-8;

const STREAM_SYSTEM: u64 = 1;
const STREAM_INITIAL: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_PARAMS: u64 = 100;

/// Seed for random stream `stream` of realization `r`: the final mix of
/// SplitMix64 applied to a combination of the three inputs.
pub fn derive_seed(master: u64, r: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(r.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One realization's inputs: the true system, the training observations
/// (one column per observed variable) and the evaluation truth over the
/// same columns for the forecast window.
#[derive(Debug, Clone)]
pub struct RealizationData {
    pub system: SystemInstance,
    pub train: Trajectory,
    pub future: Trajectory,
}

/// Builds the true system of realization `r`.
pub fn realization_system(cfg: &ExperimentConfig, r: usize) -> Result<SystemInstance> {
    let seed = derive_seed(cfg.experiment.master_seed, r as u64, STREAM_SYSTEM);
    let mut sys = match cfg.experiment.system {
        SystemId::Lorenz63 => SystemInstance::lorenz(cfg.lorenz63.unwrap_or_default()),
        SystemId::HrNetwork => {
            let hr = cfg.hr_network.as_ref().ok_or_else(|| Error::Config(vec!["hr_network: missing".into()]))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = HRNetworkParams::random(hr.neurons, hr.connections, (hr.weight_min, hr.weight_max), &mut rng)?;
            let mut sys = SystemInstance::hr_network(&p)?;
            if !hr.observed.is_empty() {
                sys.observed = names_to_indices(&sys.state_names(), &hr.observed, "hr_network.observed")?;
            }
            sys
        }
        SystemId::Lpa => {
            let l = cfg.lpa.as_ref().ok_or_else(|| Error::Config(vec!["lpa: missing".into()]))?;
            SystemInstance::lpa(l.params(l.c_pa_for(r)))?
        }
    };
    sys.observed.sort_unstable();
    Ok(sys)
}

/// Noise-free and noisy observed coordinates of realization `r` over
/// `n_points` samples, with the true system.
pub fn realization_series(
    cfg: &ExperimentConfig,
    r: usize,
    n_points: usize,
) -> Result<(SystemInstance, Trajectory, Trajectory)> {
    let e = &cfg.experiment;
    let system = realization_system(cfg, r)?;
    let x0 = match (&cfg.lpa, e.system) {
        (Some(l), SystemId::Lpa) => l.initial_state.to_vec(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(e.master_seed, r as u64, STREAM_INITIAL));
            system.sample_initial_state(&mut rng)
        }
    };
    let truth = system.generate(&x0, e.h_time_units, n_points, e.transient_samples, e.generator, e.integration_substeps)?;
    let truth = truth.project(&system.observed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(e.master_seed, r as u64, STREAM_NOISE));
    let noisy = add_observation_noise_with(&truth, e.noise_variance, &mut rng)?;
    Ok((system, truth, noisy))
}

/// Generates the synthetic truth and noisy training data of realization `r`.
pub fn synthetic_realization(cfg: &ExperimentConfig, r: usize) -> Result<RealizationData> {
    let e = &cfg.experiment;
    let n = e.training_samples + e.forecast_samples;
    let (system, truth, noisy) = realization_series(cfg, r, n)?;
    Ok(RealizationData {
        system,
        train: noisy.slice(0..e.training_samples),
        future: truth.slice(e.training_samples..n),
    })
}

fn names_to_indices(all: &[String], wanted: &[String], key: &str) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            all.iter()
                .position(|n| n == w)
                .ok_or_else(|| Error::Config(vec![format!("{key}: unknown name `{w}`")]))
        })
        .collect()
}

/// Score and parameter estimates of one method at one uncertainty level in
/// one realization.
#[derive(Debug, Clone)]
struct CellOutcome {
    /// Normalized errors per reported variable.
    errors: Vec<Vec<f64>>,
    /// Estimated parameter values keyed by parameter index.
    params: BTreeMap<usize, f64>,
    warnings: usize,
}

type CellKey = (ForecastMethod, Option<usize>);

struct Prepared<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a RealizationData,
    model: StateSpaceModel,
    /// Column of each reported variable in the observations.
    report_cols: Vec<usize>,
    train_std: Vec<f64>,
    estimated: Vec<usize>,
    ukf: UkfConfig,
    obs_var: f64,
}

fn prepare<'a>(cfg: &'a ExperimentConfig, data: &'a RealizationData) -> Result<Prepared<'a>> {
    let e = &cfg.experiment;
    let obs_var = e.noise_variance.max(MIN_OBS_VARIANCE);
    let model = data.system.model(cfg.filter.state_process_variance, obs_var)?;
    let obs_names = data.train.names().to_vec();
    let report_cols = if e.report_variables.is_empty() {
        (0..obs_names.len()).collect()
    } else {
        names_to_indices(&obs_names, &e.report_variables, "experiment.report_variables")?
    };
    let train_std = report_cols.iter().map(|&c| std_dev(&data.train.column(c))).collect();
    let estimated = if e.estimated_params.is_empty() {
        (0..model.param_dim()).collect()
    } else {
        names_to_indices(&model.dynamics().param_names(), &e.estimated_params, "experiment.estimated_params")?
    };
    let ukf = UkfConfig {
        scaling: UnscentedScaling { lambda: cfg.filter.lambda },
        ..UkfConfig::default()
    };
    Ok(Prepared {
        cfg,
        data,
        model,
        report_cols,
        train_std,
        estimated,
        ukf,
        obs_var,
    })
}

impl Prepared<'_> {
    fn score(&self, column_of: impl Fn(usize) -> Option<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
        self.report_cols
            .iter()
            .zip(&self.train_std)
            .map(|(&c, &sd)| {
                let pred = column_of(c).ok_or_else(|| Error::Domain("forecast lacks a reported variable".into()))?;
                if pred.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite);
                }
                srmse(&pred, &self.data.future.column(c), sd)
            })
            .collect()
    }

    fn last_time(&self) -> f64 {
        *self.data.train.times().last().expect("nonempty training data")
    }

    fn joint(&self, r: usize, level: usize) -> Result<JointConfig> {
        let u = self.cfg.experiment.uncertainty_pct[level] / 100.0;
        let truth: Vec<f64> = self.estimated.iter().map(|&i| self.model.params()[i]).collect();
        let seed = derive_seed(self.cfg.experiment.master_seed, r as u64, STREAM_PARAMS + level as u64);
        let guess = sample_initial_params_with(&truth, u, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let var: Vec<f64> = truth.iter().map(|p| (u * p).powi(2)).collect();
        let mut joint = JointConfig::new(self.estimated.clone(), guess, var);
        joint.process_var = joint.initial_var.iter().map(|v| v * self.cfg.filter.param_process_factor).collect();
        Ok(joint)
    }

    fn parametric(&self, joint: &JointConfig) -> Result<CellOutcome> {
        let train = &self.data.train;
        let init = initial_belief(&self.model, train.state(0), self.cfg.filter.prior_variance)?;
        let est = joint_estimate(&self.model, train, joint, &init, &self.ukf)?;
        let e = &self.cfg.experiment;
        let fc = forecast_parametric(
            &self.model,
            est.state.mean.as_slice(),
            &est.params,
            e.forecast_samples,
            e.h_time_units,
            self.last_time(),
            e.integration_substeps,
        )?;
        let coords = &self.data.system.observed;
        let errors = self.score(|c| Some(fc.column(coords[c])[1..].to_vec()))?;
        Ok(CellOutcome {
            errors,
            params: joint.estimated.iter().zip(&est.param_mean).map(|(&i, &v)| (i, v)).collect(),
            warnings: 0,
        })
    }

    fn nonparametric(&self, np: &NonparametricSection) -> Result<CellOutcome> {
        let mut warnings = 0;
        let horizon = self.cfg.experiment.forecast_samples;
        let mut preds = BTreeMap::new();
        for &c in &self.report_cols {
            let raw = self.data.train.column(c);
            let series = if np.denoise {
                let kt = KalmanTakensConfig {
                    d: np.d,
                    tau: np.tau_samples,
                    kappa: np.kappa,
                    weighting: np.weighting,
                    q: self.obs_var,
                    r: self.obs_var,
                };
                let out = kalman_takens_filter(&raw, &kt)?;
                warnings += out.warnings;
                out.filtered
            } else {
                raw
            };
            let lib = build_delay_library(&series, np.d, np.tau_samples)?;
            let query = lib.vector(lib.last_time());
            preds.insert(c, direct_predict(&lib, &query, np.kappa, horizon, np.weighting)?);
        }
        Ok(CellOutcome {
            errors: self.score(|c| preds.get(&c).cloned())?,
            params: BTreeMap::new(),
            warnings,
        })
    }

    fn hybrid_model(&self, hy: &HybridSection) -> Result<HybridModel> {
        let names = self.model.dynamics().state_names();
        let replaced = names_to_indices(&names, &hy.replaced, "hybrid.replaced")?;
        let cfg = HybridConfig {
            replaced,
            delay: DelayConfig {
                d: hy.d,
                tau: hy.tau_samples,
                kappa: hy.kappa,
                weighting: hy.weighting,
            },
            denoise: hy.denoise,
            delay_process_factor: hy.delay_process_factor,
            hold: hy.hold,
        };
        make_hybrid_model(&self.model, &cfg, &self.data.train)
    }

    fn hybrid(&self, hm: &HybridModel, joint: &JointConfig) -> Result<CellOutcome> {
        let train = &self.data.train;
        let init = hybrid_initial_belief(hm, train, self.cfg.filter.prior_variance)?;
        let fit = hybrid_ukf_fit(hm, train, joint, &init, &self.ukf)?;
        let e = &self.cfg.experiment;
        let (fc, fw) = forecast_hybrid(
            hm,
            &hm.unpack(fit.state.mean.as_slice()),
            &fit.params,
            e.forecast_samples,
            e.h_time_units,
            self.last_time(),
            e.integration_substeps,
        )?;
        let out_vars = hm.output_vars();
        let coords = &self.data.system.observed;
        let errors = self.score(|c| {
            let pos = out_vars.iter().position(|&v| v == coords[c])?;
            Some(fc.column(pos)[1..].to_vec())
        })?;
        Ok(CellOutcome {
            errors,
            params: fit.estimated.iter().zip(&fit.param_mean).map(|(&i, &v)| (i, v)).collect(),
            warnings: fit.warnings + fw + hm.denoise_warnings(),
        })
    }
}

struct RealizationResult {
    cells: BTreeMap<CellKey, std::result::Result<CellOutcome, String>>,
    report_names: Vec<String>,
    param_names: Vec<String>,
}

fn run_realization(cfg: &ExperimentConfig, r: usize, data: &RealizationData) -> Result<RealizationResult> {
    let p = prepare(cfg, data)?;
    let e = &cfg.experiment;
    let mut cells = BTreeMap::new();
    let keep = |o: Result<CellOutcome>| o.map_err(|err| err.to_string());
    if e.methods.contains(&ForecastMethod::Nonparametric) {
        let np = cfg.nonparametric.as_ref().expect("validated");
        cells.insert((ForecastMethod::Nonparametric, None), keep(p.nonparametric(np)));
    }
    let hybrid = if e.methods.contains(&ForecastMethod::Hybrid) {
        Some(p.hybrid_model(cfg.hybrid.as_ref().expect("validated")).map_err(|err| err.to_string()))
    } else {
        None
    };
    for level in 0..e.uncertainty_pct.len() {
        let joint = p.joint(r, level)?;
        if e.methods.contains(&ForecastMethod::Parametric) {
            cells.insert((ForecastMethod::Parametric, Some(level)), keep(p.parametric(&joint)));
        }
        if let Some(hm) = &hybrid {
            let outcome = match hm {
                Ok(hm) => keep(p.hybrid(hm, &joint)),
                Err(msg) => Err(msg.clone()),
            };
            cells.insert((ForecastMethod::Hybrid, Some(level)), outcome);
        }
    }
    Ok(RealizationResult {
        cells,
        report_names: p.report_cols.iter().map(|&c| data.train.names()[c].clone()).collect(),
        param_names: p.model.dynamics().param_names(),
    })
}

/// Runs every realization of a synthetic experiment and aggregates the
/// report. Realizations run in parallel; the result depends only on the
/// configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ForecastReport> {
    run_experiment_scaled(cfg, cfg.experiment.realizations)
}

/// [`run_experiment`] with an explicit realization count.
pub fn run_experiment_scaled(cfg: &ExperimentConfig, realizations: usize) -> Result<ForecastReport> {
    cfg.validate()?;
    let results = in_pool(cfg.experiment.jobs, || {
        (0..realizations)
            .into_par_iter()
            .map(|r| synthetic_realization(cfg, r).and_then(|d| run_realization(cfg, r, &d)))
            .collect::<Vec<_>>()
    })?;
    aggregate(cfg, results)
}

/// Runs the methods on supplied datasets, one realization each.
pub fn run_on_datasets(cfg: &ExperimentConfig, data: &[RealizationData]) -> Result<ForecastReport> {
    cfg.validate()?;
    let results = in_pool(cfg.experiment.jobs, || {
        data.par_iter()
            .enumerate()
            .map(|(r, d)| run_realization(cfg, r, d))
            .collect::<Vec<_>>()
    })?;
    aggregate(cfg, results)
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Domain(e.to_string()))?;
    Ok(pool.install(f))
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn aggregate(cfg: &ExperimentConfig, results: Vec<Result<RealizationResult>>) -> Result<ForecastReport> {
    let e = &cfg.experiment;
    let total = results.len();
    let results: Vec<RealizationResult> = results.into_iter().collect::<Result<_>>()?;
    let Some(first) = results.first() else {
        return Err(Error::Domain("no realizations".into()));
    };
    let report_names = first.report_names.clone();
    let param_names = first.param_names.clone();
    let horizon = e.forecast_samples;

    let keys: Vec<CellKey> = first.cells.keys().copied().collect();
    let mut rows = Vec::new();
    let mut params = Vec::new();
    let mut cells = Vec::new();
    for key in keys {
        let (method, level) = key;
        let mut acc = vec![SrmseAccumulator::new(horizon); report_names.len()];
        let mut estimates: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut failed = 0;
        let mut warnings = 0;
        let mut first_error = None;
        for res in &results {
            match &res.cells[&key] {
                Ok(o) => {
                    for (a, err) in acc.iter_mut().zip(&o.errors) {
                        a.push(err);
                    }
                    for (&i, &v) in &o.params {
                        estimates.entry(i).or_default().push(v);
                    }
                    warnings += o.warnings;
                }
                Err(msg) => {
                    failed += 1;
                    first_error.get_or_insert_with(|| msg.clone());
                }
            }
        }
        let label = level.map(|l| format!("{}", e.uncertainty_pct[l])).unwrap_or_else(|| "NA".into());
        if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
            return Err(Error::TooManyFailures {
                failed,
                total,
                cell: format!(
                    "{method} at uncertainty {label}: {}",
                    first_error.unwrap_or_default()
                ),
            });
        }
        // nonparametric rows repeat at every uncertainty level
        let levels: Vec<Option<f64>> = match level {
            Some(l) => vec![Some(e.uncertainty_pct[l])],
            None if e.uncertainty_pct.is_empty() => vec![None],
            None => e.uncertainty_pct.iter().copied().map(Some).collect(),
        };
        for u in &levels {
            for (v, a) in report_names.iter().zip(&acc) {
                for (i, (m, s)) in a.mean().into_iter().zip(a.stderr()).enumerate() {
                    rows.push(SrmseRow {
                        method,
                        uncertainty_pct: *u,
                        variable: v.clone(),
                        horizon_step: i + 1,
                        srmse_mean: m,
                        srmse_stderr: s,
                    });
                }
            }
        }
        for (&i, vals) in &estimates {
            params.push(ParamRow {
                method,
                uncertainty_pct: level.map(|l| e.uncertainty_pct[l]),
                param: param_names[i].clone(),
                mean: vals.iter().sum::<f64>() / vals.len() as f64,
                std: sample_std(vals),
                count: vals.len(),
            });
        }
        cells.push(CellSummary {
            method,
            uncertainty_pct: level.map(|l| e.uncertainty_pct[l]),
            succeeded: total - failed,
            failed,
            warnings,
            first_error,
        });
    }
    Ok(ForecastReport {
        realizations: total,
        horizon,
        h: e.h_time_units,
        rows,
        params,
        cells,
    })
}
