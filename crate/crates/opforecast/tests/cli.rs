use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use opforecast::cli::{evaluate, fit_model, forecast_document};
use opforecast::config::RunConfig;
use opforecast::dataset::{blank_record, read_dataset, write_dataset, ColumnMapping};
use opforecast::report::parse_report_csv;
use opforecast::snapshot;
use opforecast::synthetic::SyntheticSpec;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opforecast")).args(args).env("RUST_LOG", "error").output().expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

/// Two weeks of default synthetic data written to `data.csv`.
fn dataset(dir: &TempDir) -> String {
    let data = path(dir, "data.csv");
    let out = bin(&["simulate", "--out", &data, "--periods", "1980", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn next_period(dir: &TempDir) -> String {
    let p = path(dir, "next.csv");
    fs::write(&p, "n,date,start,shift,pr.ord,ics\n1981,2022-10-17,00:00:00,Mo M,999,1.6\n").unwrap();
    p
}

#[test]
fn simulate_is_deterministic_and_fits() {
    let dir = TempDir::new().unwrap();
    let a = dataset(&dir);
    let b = path(&dir, "again.csv");
    assert!(bin(&["simulate", "--out", &b, "--periods", "1980", "--seed", "3"]).status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let model = path(&dir, "model.json");
    let out = bin(&["fit", "--data", &a, "--out", &model]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("states:") && stdout.contains("gamma_u"), "{}", stdout);

    let again = path(&dir, "model2.json");
    assert!(bin(&["fit", "--data", &a, "--out", &again]).status.success());
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn invalid_settings_exit_with_validation_code() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    assert_eq!(bin(&["fit", "--data", &data, "--lambda-u", "1.5"]).status.code(), Some(1));
    assert_eq!(bin(&["fit", "--data", &data, "--lags", "6"]).status.code(), Some(1));
    assert_eq!(bin(&["evaluate", "--data", &data, "--models", "arima"]).status.code(), Some(1));
    let cfg = path(&dir, "bad.toml");
    fs::write(&cfg, "lambda_v = 0.0\n").unwrap();
    assert_eq!(bin(&["fit", "--config", &cfg, "--data", &data]).status.code(), Some(1));
}

#[test]
fn data_problems_exit_with_data_code() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "nope.csv");
    assert_eq!(bin(&["fit", "--data", &missing]).status.code(), Some(2));
    let bad = path(&dir, "bad.csv");
    fs::write(&bad, "n,date,start\n1,2022-10-10,06:00:00\n").unwrap();
    assert_eq!(bin(&["fit", "--data", &bad]).status.code(), Some(2));

    // inconsistent losses
    let data = dataset(&dir);
    let mut records = read_dataset(Path::new(&data), &ColumnMapping::default()).unwrap().records;
    records[5].opt += 1.0;
    let broken = path(&dir, "broken.csv");
    write_dataset(fs::File::create(&broken).unwrap(), &records).unwrap();
    assert_eq!(bin(&["fit", "--data", &broken]).status.code(), Some(2));
}

#[test]
fn forecast_matches_library() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let model = path(&dir, "model.json");
    assert!(bin(&["fit", "--data", &data, "--out", &model]).status.success());
    let next = next_period(&dir);
    let doc_path = path(&dir, "forecast.json");
    let out = bin(&["forecast", "--model", &model, "--data", &next, "--out", &doc_path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cli: serde_json::Value = serde_json::from_str(&fs::read_to_string(&doc_path).unwrap()).unwrap();

    let records = read_dataset(Path::new(&data), &ColumnMapping::default()).unwrap().records;
    let mut m = fit_model(&RunConfig::default(), &records).unwrap();
    let mut row = blank_record();
    row.n = 1981;
    row.date = chrono::NaiveDate::from_ymd_opt(2022, 10, 17).unwrap();
    row.start = chrono::NaiveTime::from_hms_opt(0, 0, 0).unwrap();
    row.shift = "Mo M".into();
    row.pr_ord = 999;
    row.ics = 1.6;
    let lib = serde_json::to_value(forecast_document(&mut m, &row).unwrap()).unwrap();
    assert_eq!(cli, lib);
    assert_eq!(cli["responses"].as_array().unwrap().len(), 2);
    let r0 = &cli["responses"][0];
    assert!(r0["lower"].as_f64().unwrap() <= r0["y_hat"].as_f64().unwrap());
}

#[test]
fn forecast_rejects_bad_snapshots_and_unseen_patterns() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let model = path(&dir, "model.json");
    assert!(bin(&["fit", "--data", &data, "--out", &model]).status.success());
    let next = next_period(&dir);

    let text = fs::read_to_string(&model).unwrap();
    let truncated = path(&dir, "truncated.json");
    fs::write(&truncated, &text[..text.len() / 2]).unwrap();
    assert_eq!(bin(&["forecast", "--model", &truncated, "--data", &next]).status.code(), Some(1));
    let future = path(&dir, "future.json");
    fs::write(&future, text.replacen("\"version\": 1", "\"version\": 99", 1)).unwrap();
    assert_eq!(bin(&["forecast", "--model", &future, "--data", &next]).status.code(), Some(1));

    // a shift code the model never saw: no trained pattern
    let odd = path(&dir, "odd.csv");
    fs::write(&odd, "n,date,start,shift,pr.ord,ics\n1981,2022-10-17,00:00:00,Mo X,999,1.6\n").unwrap();
    let out = bin(&["forecast", "--model", &model, "--data", &odd]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unavailable"));
}

#[test]
fn evaluate_writes_reports_and_filters_models() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let out_dir = path(&dir, "report");
    let out = bin(&["evaluate", "--data", &data, "--out", &out_dir, "--models", "persistence"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = parse_report_csv(fs::File::open(Path::new(&out_dir).join("report.csv")).unwrap()).unwrap();
    assert!(!cells.is_empty());
    assert!(cells.iter().all(|c| c.model == "persistence"));
    // two full weeks, three shift codes, two responses
    assert_eq!(cells.len(), 2 * 3 * 2);
    let summary = fs::read_to_string(Path::new(&out_dir).join("summary.csv")).unwrap();
    assert!(summary.starts_with("variable,min,Q1,median,mean,Q3,max\nOpT,"));
    assert!(Path::new(&out_dir).join("report.json").exists());

    // parity with the library at full precision
    let records = read_dataset(Path::new(&data), &ColumnMapping::default()).unwrap().records;
    let config = RunConfig { models: vec!["persistence".into()], ..RunConfig::default() };
    let lib = evaluate(&config, &records).unwrap();
    assert_eq!(cells, lib.cells);
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let cfg = path(&dir, "run.toml");
    fs::write(&cfg, format!("data = {:?}\nseed = 4\nmodels = [\"iohmm-q1\", \"varx-q2\", \"no-lags\"]\n", data)).unwrap();
    let a = path(&dir, "a");
    let b = path(&dir, "b");
    assert!(bin(&["evaluate", "--config", &cfg, "--out", &a]).status.success());
    assert!(bin(&["evaluate", "--config", &cfg, "--out", &b]).status.success());
    for f in ["report.csv", "report.json", "summary.csv"] {
        assert_eq!(fs::read(Path::new(&a).join(f)).unwrap(), fs::read(Path::new(&b).join(f)).unwrap(), "{}", f);
    }
}

#[test]
fn inspect_describes_models_and_data() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let model = path(&dir, "model.json");
    assert!(bin(&["fit", "--data", &data, "--out", &model]).status.success());
    let out = bin(&["inspect", "--model", &model]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let restored = snapshot::load(Path::new(&model)).unwrap();
    assert_eq!(v["states"].as_u64().unwrap() as usize, restored.states());
    assert_eq!(v["patterns"].as_array().unwrap().len(), 3);

    let out = bin(&["inspect", "--data", &data]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["records"], 1980);
    assert_eq!(v["weeks"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_reads_spec_files() {
    let dir = TempDir::new().unwrap();
    let spec = path(&dir, "spec.toml");
    let text = toml::to_string(&SyntheticSpec { periods: 50, ..SyntheticSpec::default() }).unwrap();
    fs::write(&spec, text).unwrap();
    let out = path(&dir, "d.csv");
    assert!(bin(&["simulate", "--config", &spec, "--out", &out]).status.success());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 51);
    fs::write(&spec, "transition = [[0.5, 0.6], [0.5, 0.5]]\n").unwrap();
    assert_eq!(bin(&["simulate", "--config", &spec, "--out", &out]).status.code(), Some(1));
}
