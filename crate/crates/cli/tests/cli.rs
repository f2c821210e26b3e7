use std::fs;
use std::path::Path;
use std::process::Command;

use hybridcast::dynamics::{SystemId, Trajectory};
use hybridcast::eval::ExperimentConfig;
use hybridcast::Error;
use hybridcast_cli::*;

fn rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn read_traj(path: &Path) -> Trajectory {
    Trajectory::read_csv(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap()
}

fn generate(system: SystemId, samples: Option<usize>, var: Option<f64>, out: &Path) -> RunManifest {
    cmd_generate(&GenerateArgs {
        system: Some(system),
        samples,
        noise_variance: var,
        seed: Some(7),
        out: out.to_path_buf(),
        ..Default::default()
    })
    .unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hybridcast"))
}

#[test]
fn lorenz_defaults_give_501_rows() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(SystemId::Lorenz63, None, None, dir.path());
    assert_eq!(m.config.experiment.h_time_units, 0.05);
    assert_eq!(m.config.experiment.noise_variance, 4.0);
    for f in [TRUTH_FILE, OBSERVATIONS_FILE] {
        let r = rows(&dir.path().join(f));
        assert_eq!(r.len(), 502, "{f}");
        assert_eq!(r[0], "t,x,y,z");
    }
    let truth = read_traj(&dir.path().join(TRUTH_FILE));
    let obs = read_traj(&dir.path().join(OBSERVATIONS_FILE));
    assert_eq!(truth.times(), obs.times());
    assert!((truth.times()[500] - 25.0).abs() < 1e-12);
    assert_ne!(truth, obs);
}

#[test]
fn zero_noise_observations_equal_truth() {
    let dir = tempfile::tempdir().unwrap();
    generate(SystemId::Lorenz63, Some(100), Some(0.0), dir.path());
    let truth = fs::read(dir.path().join(TRUTH_FILE)).unwrap();
    let obs = fs::read(dir.path().join(OBSERVATIONS_FILE)).unwrap();
    assert_eq!(truth, obs);
}

#[test]
fn hr_network_gives_3001_rows_of_three_potentials() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(SystemId::HrNetwork, Some(3000), Some(0.2), dir.path());
    assert_eq!(m.config.experiment.h_time_units, 0.08);
    let r = rows(&dir.path().join(OBSERVATIONS_FILE));
    assert_eq!(r.len(), 3002);
    assert_eq!(r[0], "t,x1,x2,x3");
}

#[test]
fn generated_data_ingests_losslessly() {
    let dir = tempfile::tempdir().unwrap();
    generate(SystemId::Lorenz63, Some(50), None, dir.path());
    let schema = Schema {
        time_column: "t".into(),
        columns: vec!["x".into(), "y".into(), "z".into()],
    };
    let out = dir.path().join("ingested");
    let ds = cmd_ingest(&dir.path().join(OBSERVATIONS_FILE), &schema, None, &out).unwrap();
    assert_eq!(ds.train, read_traj(&dir.path().join(OBSERVATIONS_FILE)));
    assert_eq!(
        fs::read(out.join(TRAIN_FILE)).unwrap(),
        fs::read(dir.path().join(OBSERVATIONS_FILE)).unwrap()
    );
}

#[test]
fn beetle_style_file_splits_37_4() {
    let dir = tempfile::tempdir().unwrap();
    generate(SystemId::Lpa, Some(40), None, dir.path());
    let schema = Schema {
        time_column: "t".into(),
        columns: vec!["L".into(), "P".into(), "A".into()],
    };
    let out = dir.path().join("split");
    let ds = cmd_ingest(&dir.path().join(OBSERVATIONS_FILE), &schema, Some(37), &out).unwrap();
    assert_eq!(ds.train.len(), 37);
    assert_eq!(ds.eval.as_ref().unwrap().len(), 4);
    assert_eq!(rows(&out.join(TRAIN_FILE)).len(), 38);
    assert_eq!(rows(&out.join(EVAL_FILE)).len(), 5);
    assert_eq!(ds.eval.unwrap().times()[0], 74.0);
}

#[test]
fn schema_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.csv");
    fs::write(&path, "t\n0\n1\n2\n").unwrap();
    let schema = Schema {
        time_column: "t".into(),
        columns: vec!["L".into()],
    };
    match cmd_ingest(&path, &schema, None, dir.path()) {
        Err(Error::Parse(m)) => assert!(m.contains("schema mismatch"), "{m}"),
        other => panic!("expected a schema error, got {other:?}"),
    }
}

#[test]
fn missing_value_names_its_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.csv");
    fs::write(&path, "t,L\n0,1\n2,\n4,3\n").unwrap();
    let schema = Schema {
        time_column: "t".into(),
        columns: vec!["L".into()],
    };
    match cmd_ingest(&path, &schema, None, dir.path()) {
        Err(Error::Parse(m)) => assert!(m.contains("row 2"), "{m}"),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn decreasing_time_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("back.csv");
    fs::write(&path, "t,L\n0,1\n2,2\n1,3\n").unwrap();
    let schema = Schema {
        time_column: "t".into(),
        columns: vec!["L".into()],
    };
    assert!(cmd_ingest(&path, &schema, None, dir.path()).is_err());
}

#[test]
fn bundled_configs_round_trip() {
    for (name, text) in BUNDLED {
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

fn small_lorenz(dir: &Path) -> String {
    let mut cfg = load_config("lorenz_fig2").unwrap();
    cfg.experiment.realizations = 2;
    let path = dir.join("lorenz.cfg");
    fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn lorenz_report_layout_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let m = cmd_run(&RunArgs {
        config: Some(small_lorenz(dir.path())),
        out: first.clone(),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(m.config.experiment.realizations, 2);

    let srmse = rows(&first.join(SRMSE_FILE));
    assert_eq!(srmse[0], "method,uncertainty,variable,horizon_step,srmse_mean,srmse_stderr");
    let mut combos = std::collections::BTreeSet::new();
    for r in &srmse[1..] {
        let f: Vec<&str> = r.split(',').collect();
        combos.insert((f[0].to_string(), f[1].to_string(), f[2].to_string()));
    }
    assert_eq!(combos.len(), 27);
    assert_eq!(srmse.len() - 1, 27 * 20);

    let replay = dir.path().join("replay");
    cmd_run(&RunArgs {
        manifest: Some(first.join(MANIFEST_FILE)),
        out: replay.clone(),
        ..Default::default()
    })
    .unwrap();
    for f in [SRMSE_FILE, PARAMS_FILE, CELLS_FILE] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(replay.join(f)).unwrap(), "{f}");
    }
    let again = RunManifest::read(&replay.join(MANIFEST_FILE)).unwrap();
    assert_eq!(again.config, m.config);
}

#[test]
fn beetle_report_aggregates_21_datasets() {
    let dir = tempfile::tempdir().unwrap();
    cmd_run(&RunArgs {
        config: Some("beetle_fig5".into()),
        out: dir.path().to_path_buf(),
        ..Default::default()
    })
    .unwrap();
    for r in &rows(&dir.path().join(CELLS_FILE))[1..] {
        let f: Vec<usize> = r.split(',').skip(2).take(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f[0] + f[1], 21, "{r}");
    }
    let srmse = rows(&dir.path().join(SRMSE_FILE));
    assert!(srmse[1..].iter().all(|r| {
        let se: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
        se.is_finite() && se >= 0.0
    }));
}

#[test]
fn empty_method_list_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    let text = bundled("lorenz_fig2")
        .unwrap()
        .replace(r#"methods = ["parametric", "nonparametric", "hybrid"]"#, "methods = []");
    fs::write(&path, text).unwrap();
    let out = bin().args(["run", "--config"]).arg(&path).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.methods"));
}

#[test]
fn missing_config_exits_with_io_code() {
    let out = bin().args(["run", "--config", "/nonexistent/x.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn divergence_errors_map_to_code_3() {
    assert_eq!(exit_code(&Error::IntegrationDiverged { step: 1 }), 3);
    assert_eq!(
        exit_code(&Error::TooManyFailures {
            failed: 3,
            total: 10,
            cell: "hybrid".into()
        }),
        3
    );
    assert_eq!(exit_code(&Error::Config(vec![])), 2);
    assert_eq!(exit_code(&Error::Io(String::new())), 4);
}

#[test]
fn generate_binary_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["generate", "--system", "lorenz63", "--samples", "20", "--seed", "3", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(rows(&dir.path().join(TRUTH_FILE)).len(), 22);
    assert!(dir.path().join(MANIFEST_FILE).exists());
}

#[test]
fn gridsearch_prefers_a_working_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sine.csv");
    let mut text = String::from("t,s\n");
    for i in 0..300 {
        text.push_str(&format!("{i},{}\n", (i as f64 * std::f64::consts::PI / 8.0).sin()));
    }
    fs::write(&path, text).unwrap();
    let r = cmd_gridsearch(&GridArgs {
        csv: path,
        time_column: "t".into(),
        column: "s".into(),
        grid: hybridcast::eval::EmbeddingGrid {
            d: vec![1, 2, 3],
            tau: vec![1],
            kappa: vec![1, 3],
        },
        horizon: 5,
        tail: 50,
        weighting: hybridcast::takens::Weighting::Uniform,
        out: Some(dir.path().to_path_buf()),
    })
    .unwrap();
    assert!(r.best.score < 1e-9, "{:?}", r.best);
    assert_eq!(rows(&dir.path().join(GRID_FILE)).len(), 7);
}
