use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use robust_frontier::reward_models::model_reward_stats;
use robust_frontier::{empirical_optimize, robust_optimize, Frontier64 as Frontier};
use robust_frontier_cli::experiments;
use robust_frontier_cli::ingest::{ingest_csv, ColumnRef, IngestOptions, Schema, Table};
use robust_frontier_cli::{execute, CliError, Command, Config, ExperimentKind, Invocation};

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn invocation(out: &Path, sets: &[&str]) -> Invocation {
    Invocation {
        config: None,
        seed: Some(11),
        out: out.to_path_buf(),
        overrides: sets.iter().map(|s| s.to_string()).collect(),
    }
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn rerun_identical(command: Command, sets: &[&str]) {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    execute(&command, &invocation(&a, sets)).unwrap();
    execute(&command, &invocation(&b, sets)).unwrap();
    let (da, db) = (read_dir(&a), read_dir(&b));
    assert!(da.len() >= 2);
    assert_eq!(da, db);
}

#[test]
fn toy_suite_reruns_byte_identical() {
    rerun_identical(Command::RunSuite(ExperimentKind::Toy), &["K=100", "k=20"]);
}

#[test]
fn portfolio_suite_reruns_byte_identical() {
    let path = format!("returns_path={}", data("synthetic_10_industry.csv"));
    rerun_identical(Command::RunSuite(ExperimentKind::Portfolio), &[&path, "k=10", "radius_replicates=200"]);
}

#[test]
fn logistic_suite_reruns_byte_identical() {
    let path = format!("data_path={}", data("wdbc.csv"));
    rerun_identical(Command::RunSuite(ExperimentKind::Logistic), &[&path, "k=5"]);
}

#[test]
fn newsvendor_suite_reruns_byte_identical() {
    rerun_identical(
        Command::RunSuite(ExperimentKind::Newsvendor),
        &["sizes=10,20", "K=20", "k=10", "true_sample=2000", "reference_sample=500", "delta_grid=0,0.001,0.01"],
    );
}

#[test]
fn frontier_commands_write_meta_with_config() {
    let tmp = tempfile::tempdir().unwrap();
    execute(&Command::FrontierBootstrap, &invocation(tmp.path(), &["experiment=toy", "k=10"])).unwrap();
    let f = Frontier::read(&tmp.path().join("bootstrap_frontier.csv")).unwrap();
    assert_eq!(f.meta.k, 10);
    assert_eq!(f.meta.extra["config.seed"], "11");
    assert_eq!(f.meta.extra["command"], "frontier-bootstrap");

    execute(&Command::FrontierOos, &invocation(tmp.path(), &["experiment=toy", "K=10", "n=5"])).unwrap();
    let f = Frontier::read(&tmp.path().join("oos_frontier.csv")).unwrap();
    assert_eq!((f.meta.k, f.meta.n), (10, 5));

    // Calibrating a frontier from disk.
    let sets = [
        "experiment=toy".to_string(),
        "rule=tradeoff".into(),
        "lambda=0.5".into(),
        format!("frontier_path={}", tmp.path().join("bootstrap_frontier.csv").display()),
    ];
    let sets: Vec<&str> = sets.iter().map(String::as_str).collect();
    execute(&Command::Calibrate, &invocation(&tmp.path().join("cal"), &sets)).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("cal/summary.json")).unwrap()).unwrap();
    let delta = summary["delta"].as_f64().unwrap();
    assert!(experiments::TOY_GRID.contains(&delta));
}

#[test]
fn single_asset_portfolio_frontier_is_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let path = format!("returns_path={}", data("synthetic_10_industry.csv"));
    let sets = [path.as_str(), "columns=1", "k=10", "radius=chi_square"];
    execute(&Command::RunSuite(ExperimentKind::Portfolio), &invocation(tmp.path(), &sets)).unwrap();
    for name in ["bootstrap_frontier.csv", "oos_window_1.csv", "oos_average.csv"] {
        let f = Frontier::read(&tmp.path().join(name)).unwrap();
        let first = f.points()[0];
        for p in f.points() {
            assert_eq!((p.mu, p.sigma2), (first.mu, first.sigma2), "{name}");
        }
    }
}

#[test]
fn wdbc_subset_has_all_rows() {
    let opts = IngestOptions {
        columns: Some(ColumnRef::parse_list("2,24,25").unwrap()),
        percent_to_decimal: false,
    };
    let schema = Schema::Labeled {
        label_column: "diagnosis".into(),
        positive_label: Some("M".into()),
        id_column: Some("id".into()),
    };
    let Table::Labeled(t) = ingest_csv(Path::new(&data("wdbc.csv")), &schema, &opts).unwrap() else {
        panic!("labeled table expected");
    };
    assert_eq!(t.rows.len(), 569);
    assert_eq!(t.covariates, ["mean_texture", "worst_area", "worst_smoothness"]);
    assert!(t.labels.iter().all(|&y| y == 1.0 || y == -1.0));
}

#[test]
fn logistic_zero_delta_is_maximum_likelihood() {
    let mut config = Config::default();
    config.set("data_path", data("wdbc.csv"));
    let l = experiments::logistic(&config).unwrap();
    let opts = experiments::robust_options(&config).unwrap();
    let phi = experiments::phi(&config).unwrap();
    let mle = empirical_optimize(&l.model, &l.train, &opts.solver).unwrap();
    let at_zero = robust_optimize(&l.model, &l.train, 0.0, &phi, &opts).unwrap();
    assert_eq!(at_zero.x, mle);

    let test = robust_frontier::true_frontier(&l.model, &l.train, &l.test, &phi, &[0.0, 0.2], &opts).unwrap();
    let (mean, var) = model_reward_stats(&l.model, &mle, &l.test);
    assert_eq!((test.points()[0].mu, test.points()[0].sigma2), (mean, var));
}

fn labeled_file(dir: &Path, labels: &[&str]) -> PathBuf {
    let mut text = String::from("label,x\n");
    for (i, l) in labels.iter().enumerate() {
        text.push_str(&format!("{l},{}\n", i as f64 * 0.5 - 1.0));
    }
    let path = dir.join("labeled.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn single_class_training_half_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let path = labeled_file(tmp.path(), &["B", "B", "B", "M", "B", "M"]);
    let mut config = Config::default();
    config.set("data_path", path.display());
    config.set("label_column", "label");
    config.set("id_column", "");
    config.set("covariates", "x");
    let err = experiments::logistic(&config).err().unwrap();
    assert!(matches!(err, CliError::Data(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
}

fn binary(args: &[&str]) -> (i32, String) {
    let out = Process::new(env!("CARGO_BIN_EXE_robust-frontier")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out").display().to_string();
    let returns = format!("returns_path={}", data("synthetic_10_industry.csv"));

    let (code, _) = binary(&["run-suite", "toy", "--out", &out, "--set", "K=10", "--set", "k=5"]);
    assert_eq!(code, 0);

    let (code, err) = binary(&["run-suite", "bogus", "--out", &out]);
    assert_eq!(code, 2, "{err}");
    let (code, err) = binary(&["run-suite", "toy", "--out", &out, "--set", "delta_grid=0.1,0"]);
    assert_eq!(code, 2, "{err}");
    let (code, err) = binary(&["run-suite", "portfolio", "--out", &out, "--set", &returns, "--set", "train_end=299912"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("299912"), "{err}");
    let (code, err) = binary(&["frontier-bootstrap", "--config", "/nonexistent/config", "--out", &out]);
    assert_eq!(code, 2, "{err}");

    let (code, err) = binary(&["run-suite", "portfolio", "--out", &out, "--set", "returns_path=/nonexistent.csv"]);
    assert_eq!(code, 3, "{err}");
    let bad = tmp.path().join("blank.csv");
    std::fs::write(&bad, "date,a\n196001,0.1\n196002,\n").unwrap();
    let (code, err) = binary(&["run-suite", "portfolio", "--out", &out, "--set", &format!("returns_path={}", bad.display())]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("row") && err.contains('a'), "{err}");

    let (code, err) = binary(&[
        "calibrate", "--out", &out, "--set", "experiment=toy", "--set", "rule=satisficing", "--set", "target=0",
    ]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn config_file_and_seed_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("toy.cfg");
    std::fs::write(&cfg, "# toy run\nexperiment = toy\nk = 8\nseed = 5\n").unwrap();
    let cfg_s = cfg.display().to_string();
    let a = tmp.path().join("a").display().to_string();
    let b = tmp.path().join("b").display().to_string();
    let c = tmp.path().join("c").display().to_string();
    assert_eq!(binary(&["frontier-bootstrap", "--config", &cfg_s, "--out", &a]).0, 0);
    assert_eq!(binary(&["frontier-bootstrap", "--config", &cfg_s, "--seed", "5", "--out", &b]).0, 0);
    assert_eq!(binary(&["frontier-bootstrap", "--config", &cfg_s, "--seed", "6", "--out", &c]).0, 0);
    let read = |d: &str| std::fs::read(Path::new(d).join("bootstrap_frontier.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn bundled_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["newsvendor", "portfolio", "logistic", "toy"] {
        let config = Config::from_file(&dir.join(format!("{name}.cfg"))).unwrap();
        assert_eq!(ExperimentKind::from_config(&config).unwrap(), ExperimentKind::parse(name).unwrap());
        experiments::phi(&config).unwrap();
    }
}
