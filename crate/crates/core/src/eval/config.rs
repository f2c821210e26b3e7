use serde::{Deserialize, Serialize};

use crate::dynamics::{LPAParams, LorenzParams, Method, SystemId};
use crate::error::{Error, Result};
use crate::hybrid::Hold;
use crate::takens::Weighting;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMethod {
    Parametric,
    Nonparametric,
    Hybrid,
}

impl ForecastMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Parametric => "parametric",
            Self::Nonparametric => "nonparametric",
            Self::Hybrid => "hybrid",
        }
    }

    /// Whether the method starts from uncertain parameters.
    pub fn uses_params(self) -> bool {
        self != Self::Nonparametric
    }
}

impl std::fmt::Display for ForecastMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ForecastMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parametric" => Ok(Self::Parametric),
            "nonparametric" => Ok(Self::Nonparametric),
            "hybrid" => Ok(Self::Hybrid),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// Run-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub system: SystemId,
    /// Samples of training data, `T`.
    pub training_samples: usize,
    /// Samples forecast beyond the training data, `T_F`.
    pub forecast_samples: usize,
    pub h_time_units: f64,
    pub noise_variance: f64,
    pub uncertainty_pct: Vec<f64>,
    pub realizations: usize,
    /// Realization count used by the paper-scale preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations_paper: Option<usize>,
    pub methods: Vec<ForecastMethod>,
    pub master_seed: u64,
    /// Worker threads; 0 uses all available.
    #[serde(default)]
    pub jobs: usize,
    /// Samples discarded before the training window.
    #[serde(default)]
    pub transient_samples: usize,
    /// Integrator steps per sample when generating continuous-time data.
    #[serde(default = "default_substeps")]
    pub integration_substeps: usize,
    #[serde(default = "default_generator")]
    pub generator: Method,
    /// Variables scored in the report; all observed variables when empty.
    #[serde(default)]
    pub report_variables: Vec<String>,
    /// Parameters estimated by the filters; all when empty.
    #[serde(default)]
    pub estimated_params: Vec<String>,
}

fn default_substeps() -> usize {
    10
}

fn default_generator() -> Method {
    Method::Am4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    /// Prior variance of unobserved state variables.
    #[serde(default = "default_prior")]
    pub prior_variance: f64,
    /// Diagonal process-noise variance of the state.
    #[serde(default = "default_state_q")]
    pub state_process_variance: f64,
    /// Parameter random-walk variance as a multiple of its initial variance.
    #[serde(default = "default_param_factor")]
    pub param_process_factor: f64,
    /// Unscented spread; `3 - n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

fn default_prior() -> f64 {
    10.0
}
fn default_state_q() -> f64 {
    1e-6
}
fn default_param_factor() -> f64 {
    1e-4
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            prior_variance: default_prior(),
            state_process_variance: default_state_q(),
            param_process_factor: default_param_factor(),
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonparametricSection {
    pub d: usize,
    pub tau_samples: usize,
    pub kappa: usize,
    #[serde(default)]
    pub weighting: Weighting,
    /// Kalman-Takens denoising of the training series.
    #[serde(default = "yes")]
    pub denoise: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSection {
    /// Names of the state variables advanced nonparametrically.
    pub replaced: Vec<String>,
    pub d: usize,
    pub tau_samples: usize,
    pub kappa: usize,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default = "yes")]
    pub denoise: bool,
    #[serde(default = "default_delay_factor")]
    pub delay_process_factor: f64,
    #[serde(default)]
    pub hold: Hold,
}

fn default_delay_factor() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrSection {
    pub neurons: usize,
    pub connections: usize,
    pub weight_min: f64,
    pub weight_max: f64,
    /// Observed variable names; the membrane potentials when empty.
    #[serde(default)]
    pub observed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpaSection {
    pub b: f64,
    pub c_el: f64,
    pub c_ea: f64,
    pub mu_l: f64,
    pub mu_a: f64,
    /// Recruitment values cycled over realizations; each is used
    /// `replicates` times in a row.
    pub c_pa_values: Vec<f64>,
    pub replicates: usize,
    pub initial_state: [f64; 3],
}

impl LpaSection {
    pub fn params(&self, c_pa: f64) -> LPAParams {
        LPAParams {
            b: self.b,
            c_el: self.c_el,
            c_ea: self.c_ea,
            c_pa,
            mu_l: self.mu_l,
            mu_a: self.mu_a,
        }
    }

    /// Recruitment value of realization `r`.
    pub fn c_pa_for(&self, r: usize) -> f64 {
        self.c_pa_values[(r / self.replicates) % self.c_pa_values.len()]
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonparametric: Option<NonparametricSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid: Option<HybridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lorenz63: Option<LorenzParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hr_network: Option<HrSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpa: Option<LpaSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Checks every constraint and reports all offending keys at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let e = &self.experiment;
        let mut check = |ok: bool, key: &str, why: &str| {
            if !ok {
                bad.push(format!("{key}: {why}"));
            }
        };
        check(e.training_samples > 0, "experiment.training_samples", "must be positive");
        check(e.forecast_samples > 0, "experiment.forecast_samples", "must be positive");
        check(e.realizations > 0, "experiment.realizations", "must be positive");
        check(e.realizations_paper != Some(0), "experiment.realizations_paper", "must be positive");
        check(e.h_time_units > 0.0 && e.h_time_units.is_finite(), "experiment.h_time_units", "must be positive");
        check(e.noise_variance >= 0.0 && e.noise_variance.is_finite(), "experiment.noise_variance", "must be nonnegative");
        check(!e.methods.is_empty(), "experiment.methods", "must list at least one method");
        check(e.integration_substeps > 0, "experiment.integration_substeps", "must be positive");
        check(
            e.uncertainty_pct.iter().all(|u| *u >= 0.0 && u.is_finite()),
            "experiment.uncertainty_pct",
            "entries must be nonnegative",
        );
        let params_needed = e.methods.iter().any(|m| m.uses_params());
        check(
            !params_needed || !e.uncertainty_pct.is_empty(),
            "experiment.uncertainty_pct",
            "parametric and hybrid methods need at least one level",
        );
        let mut unique = e.methods.clone();
        unique.sort();
        unique.dedup();
        check(unique.len() == e.methods.len(), "experiment.methods", "duplicate method");
        let f = &self.filter;
        check(f.prior_variance > 0.0, "filter.prior_variance", "must be positive");
        check(f.state_process_variance >= 0.0, "filter.state_process_variance", "must be nonnegative");
        check(f.param_process_factor >= 0.0, "filter.param_process_factor", "must be nonnegative");
        if e.methods.contains(&ForecastMethod::Nonparametric) {
            match &self.nonparametric {
                None => check(false, "nonparametric", "section required by the method list"),
                Some(n) => {
                    check(n.kappa > 0, "nonparametric.kappa", "must be positive");
                    check(n.tau_samples > 0, "nonparametric.tau_samples", "must be positive");
                }
            }
        }
        if e.methods.contains(&ForecastMethod::Hybrid) {
            match &self.hybrid {
                None => check(false, "hybrid", "section required by the method list"),
                Some(hy) => {
                    check(hy.kappa > 0, "hybrid.kappa", "must be positive");
                    check(hy.tau_samples > 0, "hybrid.tau_samples", "must be positive");
                    check(hy.delay_process_factor >= 0.0, "hybrid.delay_process_factor", "must be nonnegative");
                }
            }
        }
        match e.system {
            SystemId::Lorenz63 => {}
            SystemId::HrNetwork => match &self.hr_network {
                None => check(false, "hr_network", "section required for system hr_network"),
                Some(hr) => {
                    check(hr.neurons > 0, "hr_network.neurons", "must be positive");
                    check(
                        hr.connections <= hr.neurons * hr.neurons.saturating_sub(1),
                        "hr_network.connections",
                        "exceeds the number of off-diagonal slots",
                    );
                    check(
                        hr.weight_min <= hr.weight_max,
                        "hr_network.weight_min",
                        "must not exceed weight_max",
                    );
                }
            },
            SystemId::Lpa => match &self.lpa {
                None => check(false, "lpa", "section required for system lpa"),
                Some(l) => {
                    check(!l.c_pa_values.is_empty(), "lpa.c_pa_values", "must be nonempty");
                    check(l.replicates > 0, "lpa.replicates", "must be positive");
                    check(
                        l.c_pa_values.iter().all(|&c| l.params(c).validate().is_ok()),
                        "lpa",
                        "invalid LPA parameters",
                    );
                    check(l.initial_state.iter().all(|v| *v >= 0.0), "lpa.initial_state", "must be nonnegative");
                }
            },
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Realization count for the given preset.
    pub fn realizations_for(&self, paper_scale: bool) -> usize {
        if paper_scale {
            self.experiment.realizations_paper.unwrap_or(self.experiment.realizations)
        } else {
            self.experiment.realizations
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const LORENZ: &str = r#"
[experiment]
system = "lorenz63"
training_samples = 500
forecast_samples = 20
h_time_units = 0.05
noise_variance = 4.0
uncertainty_pct = [20.0, 50.0, 80.0]
realizations = 50
realizations_paper = 500
methods = ["parametric", "nonparametric", "hybrid"]
master_seed = 7

[nonparametric]
d = 9
tau_samples = 1
kappa = 20

[hybrid]
replaced = ["y"]
d = 9
tau_samples = 1
kappa = 20

[lorenz63]
sigma = 10.0
rho = 28.0
beta = 2.6666666666666665
"#;

    #[test]
    fn round_trip_is_identity() {
        let cfg = ExperimentConfig::from_toml(LORENZ).unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(cfg.lorenz63.unwrap().beta, 8.0 / 3.0);
        assert_eq!(cfg.realizations_for(true), 500);
    }

    proptest! {
        #[test]
        fn round_trip_holds_for_random_values(
            train in 1usize..5000,
            horizon in 1usize..200,
            h in 1e-3f64..10.0,
            noise in 0.0f64..100.0,
            levels in prop::collection::vec(0.0f64..100.0, 1..5),
            seed in any::<u64>(),
            kappa in 1usize..50,
            factor in 0.0f64..10.0,
        ) {
            let mut cfg = ExperimentConfig::from_toml(LORENZ).unwrap();
            let e = &mut cfg.experiment;
            e.training_samples = train;
            e.forecast_samples = horizon;
            e.h_time_units = h;
            e.noise_variance = noise;
            e.uncertainty_pct = levels;
            e.master_seed = seed;
            let hy = cfg.hybrid.as_mut().unwrap();
            hy.kappa = kappa;
            hy.delay_process_factor = factor;
            prop_assume!(cfg.validate().is_ok());
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }

    #[test]
    fn validation_lists_every_bad_key() {
        let text = LORENZ
            .replace("methods = [\"parametric\", \"nonparametric\", \"hybrid\"]", "methods = []")
            .replace("realizations = 50", "realizations = 0")
            .replace("kappa = 20\n\n[hybrid]", "kappa = 0\n\n[hybrid]");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config(keys)) => {
                let joined = keys.join("\n");
                assert!(joined.contains("experiment.methods"), "{joined}");
                assert!(joined.contains("experiment.realizations"), "{joined}");
                // nonparametric not requested, so its kappa is not checked
                assert!(!joined.contains("nonparametric.kappa"), "{joined}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = LORENZ.replace("master_seed = 7", "master_seed = 7\nmaster_sead = 8");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config(keys)) => assert!(keys[0].contains("master_sead"), "{keys:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_system_section_is_reported() {
        let text = LORENZ.replace("system = \"lorenz63\"", "system = \"hr_network\"");
        match ExperimentConfig::from_toml(&text) {
            Err(Error::Config(keys)) => assert!(keys.iter().any(|k| k.starts_with("hr_network")), "{keys:?}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
