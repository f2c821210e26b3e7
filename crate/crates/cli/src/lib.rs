//! Command implementations behind the `hybridcast` binary.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use hybridcast::dynamics::{SystemId, Trajectory};
use hybridcast::eval::{grid_search_embedding, realization_series, run_experiment_scaled, EmbeddingGrid, ExperimentConfig};
use hybridcast::io::CsvTable;
use hybridcast::takens::Weighting;
use hybridcast::{Error, Result};
use serde::{Deserialize, Serialize};

/// Configurations shipped with the binary, by file name.
pub const BUNDLED: [(&str, &str); 3] = [
    ("lorenz_fig2.cfg", include_str!("../configs/lorenz_fig2.cfg")),
    ("hr_fig3.cfg", include_str!("../configs/hr_fig3.cfg")),
    ("beetle_fig5.cfg", include_str!("../configs/beetle_fig5.cfg")),
];

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Process exit status for an error: 2 validation, 3 numerical divergence, 4 I/O.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 4,
        Error::IntegrationDiverged { .. }
        | Error::FilterDiverged { .. }
        | Error::TooManyFailures { .. }
        | Error::NonFinite
        | Error::NotPositiveSemidefinite { .. }
        | Error::SingularInnovation => 3,
        _ => 2,
    }
}

/// The bundled configuration named `name`, with or without `.cfg`.
pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name || n.strip_suffix(".cfg") == Some(name))
        .map(|(_, text)| *text)
}

/// Default bundled configuration for a system.
pub fn bundled_for(system: SystemId) -> &'static str {
    let name = match system {
        SystemId::Lorenz63 => "lorenz_fig2.cfg",
        SystemId::HrNetwork => "hr_fig3.cfg",
        SystemId::Lpa => "beetle_fig5.cfg",
    };
    bundled(name).expect("bundled config exists")
}

/// Reads a configuration from a file, falling back to a bundled name.
pub fn load_config(spec: &str) -> Result<ExperimentConfig> {
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentConfig::from_toml(&fs::read_to_string(path)?);
    }
    match bundled(spec) {
        Some(text) => ExperimentConfig::from_toml(text),
        None => Err(Error::Io(format!("config `{spec}` is neither a file nor a bundled name"))),
    }
}

/// Realization count preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Scale {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Parse(format!("unknown scale `{other}`"))),
        }
    }
}

/// Record of one command invocation. `config` is the fully resolved
/// configuration, so running it again reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub output_dir: String,
    pub started: String,
    pub finished: String,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let m: Self = toml::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {}", e.message())))?;
        m.config.validate()?;
        Ok(m)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Options of `generate`. Unset fields keep the configuration's values.
#[derive(Debug, Clone, Default)]
pub struct GenerateArgs {
    pub system: Option<SystemId>,
    pub config: Option<String>,
    /// Number of sampling intervals; the files hold `samples + 1` rows.
    pub samples: Option<usize>,
    pub h: Option<f64>,
    pub noise_variance: Option<f64>,
    pub seed: Option<u64>,
    pub realization: usize,
    pub out: PathBuf,
}

pub const TRUTH_FILE: &str = "truth.csv";
pub const OBSERVATIONS_FILE: &str = "observations.csv";

/// Writes noise-free and noisy observed coordinates of one realization.
pub fn cmd_generate(args: &GenerateArgs) -> Result<RunManifest> {
    let started = now();
    let (mut cfg, config_path) = match (&args.config, args.system) {
        (Some(c), _) => (load_config(c)?, c.clone()),
        (None, Some(s)) => (ExperimentConfig::from_toml(bundled_for(s))?, format!("bundled:{s}")),
        (None, None) => return Err(Error::Config(vec!["generate: need a system or a config".into()])),
    };
    if let (Some(s), true) = (args.system, args.config.is_some()) {
        if s != cfg.experiment.system {
            return Err(Error::Config(vec![format!(
                "experiment.system: config describes {} but {s} was requested",
                cfg.experiment.system
            )]));
        }
    }
    let e = &mut cfg.experiment;
    if let Some(n) = args.samples {
        e.training_samples = n;
    }
    if let Some(h) = args.h {
        e.h_time_units = h;
    }
    if let Some(v) = args.noise_variance {
        e.noise_variance = v;
    }
    if let Some(s) = args.seed {
        e.master_seed = s;
    }
    cfg.validate()?;
    let (_, truth, noisy) = realization_series(&cfg, args.realization, cfg.experiment.training_samples + 1)?;
    create_dir(&args.out)?;
    write_file(&args.out.join(TRUTH_FILE), |w| truth.write_csv(w))?;
    write_file(&args.out.join(OBSERVATIONS_FILE), |w| noisy.write_csv(w))?;
    let manifest = RunManifest {
        command: "generate".into(),
        config_path,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.experiment.master_seed,
        output_dir: args.out.display().to_string(),
        started,
        finished: now(),
        config: cfg,
    };
    manifest.write(&args.out)?;
    Ok(manifest)
}

/// Options of `run`.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<String>,
    /// Replays the resolved configuration of an earlier run.
    pub manifest: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub scale: Scale,
    pub out: PathBuf,
}

pub const SRMSE_FILE: &str = "srmse.csv";
pub const PARAMS_FILE: &str = "params.csv";
pub const CELLS_FILE: &str = "cells.csv";

/// Runs a Monte Carlo experiment and writes the report and manifest.
pub fn cmd_run(args: &RunArgs) -> Result<RunManifest> {
    let started = now();
    let (mut cfg, config_path) = match (&args.config, &args.manifest) {
        (Some(_), Some(_)) => return Err(Error::Config(vec!["run: give a config or a manifest, not both".into()])),
        (Some(c), None) => {
            let mut cfg = load_config(c)?;
            cfg.experiment.realizations = cfg.realizations_for(args.scale == Scale::Paper);
            (cfg, c.clone())
        }
        (None, Some(m)) => {
            let prev = RunManifest::read(m)?;
            (prev.config, prev.config_path)
        }
        (None, None) => return Err(Error::Config(vec!["run: need a config or a manifest".into()])),
    };
    if let Some(s) = args.seed {
        cfg.experiment.master_seed = s;
    }
    if let Some(j) = args.jobs {
        cfg.experiment.jobs = j;
    }
    let report = run_experiment_scaled(&cfg, cfg.experiment.realizations)?;
    create_dir(&args.out)?;
    write_file(&args.out.join(SRMSE_FILE), |w| report.write_srmse_csv(w))?;
    write_file(&args.out.join(PARAMS_FILE), |w| report.write_params_csv(w))?;
    write_file(&args.out.join(CELLS_FILE), |w| report.write_cells_csv(w))?;
    let manifest = RunManifest {
        command: "run".into(),
        config_path,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.experiment.master_seed,
        output_dir: args.out.display().to_string(),
        started,
        finished: now(),
        config: cfg,
    };
    manifest.write(&args.out)?;
    Ok(manifest)
}

/// Column layout of an input CSV.
#[derive(Debug, Clone)]
pub struct Schema {
    pub time_column: String,
    pub columns: Vec<String>,
}

/// A dataset read from CSV, optionally split into training and evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Trajectory,
    pub eval: Option<Trajectory>,
}

pub fn read_dataset(path: &Path, schema: &Schema) -> Result<Trajectory> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let table = CsvTable::read(BufReader::new(file))?;
    let cols: Vec<&str> = schema.columns.iter().map(String::as_str).collect();
    table.to_trajectory(&schema.time_column, &cols)
}

/// Splits after the first `train` samples; `None` keeps everything for training.
pub fn split_dataset(data: Trajectory, train: Option<usize>) -> Result<Dataset> {
    match train {
        None => Ok(Dataset { train: data, eval: None }),
        Some(n) if n == 0 || n >= data.len() => Err(Error::Domain(format!(
            "training length {n} must be between 1 and {} for {} rows",
            data.len() - 1,
            data.len()
        ))),
        Some(n) => Ok(Dataset {
            train: data.slice(0..n),
            eval: Some(data.slice(n..data.len())),
        }),
    }
}

pub const TRAIN_FILE: &str = "train.csv";
pub const EVAL_FILE: &str = "eval.csv";

/// Validates a CSV against a schema and writes the training and evaluation splits.
pub fn cmd_ingest(csv: &Path, schema: &Schema, train: Option<usize>, out: &Path) -> Result<Dataset> {
    let ds = split_dataset(read_dataset(csv, schema)?, train)?;
    create_dir(out)?;
    write_file(&out.join(TRAIN_FILE), |w| ds.train.write_csv(w))?;
    if let Some(eval) = &ds.eval {
        write_file(&out.join(EVAL_FILE), |w| eval.write_csv(w))?;
    }
    Ok(ds)
}

/// Options of `gridsearch`.
#[derive(Debug, Clone)]
pub struct GridArgs {
    pub csv: PathBuf,
    pub time_column: String,
    pub column: String,
    pub grid: EmbeddingGrid,
    pub horizon: usize,
    pub tail: usize,
    pub weighting: Weighting,
    pub out: Option<PathBuf>,
}

pub const GRID_FILE: &str = "gridsearch.csv";

/// Scores every embedding in the grid on one column and reports the best.
pub fn cmd_gridsearch(args: &GridArgs) -> Result<hybridcast::eval::GridSearchResult> {
    let schema = Schema {
        time_column: args.time_column.clone(),
        columns: vec![args.column.clone()],
    };
    let series = read_dataset(&args.csv, &schema)?.column(0);
    let result = grid_search_embedding(&series, &args.grid, args.horizon, args.tail, args.weighting)?;
    if let Some(out) = &args.out {
        create_dir(out)?;
        write_file(&out.join(GRID_FILE), |w| {
            writeln!(w, "d,tau,kappa,score")?;
            for c in &result.evaluated {
                writeln!(w, "{},{},{},{}", c.d, c.tau, c.kappa, hybridcast::dynamics::fmt_f64(c.score))?;
            }
            Ok(())
        })?;
    }
    Ok(result)
}
