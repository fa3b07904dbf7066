use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn smq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smq"))
        .args(args)
        .env_remove("SMQ_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = smq(args);
    assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

fn two_type() -> String {
    model("two_type_erlang.json").display().to_string()
}

fn mm1() -> String {
    model("mm1.json").display().to_string()
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_owned()).collect()
}

fn f(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("'{s}' is not a number"))
}

#[test]
fn solve_two_type_reports_load_and_roots() {
    let v = json(&["solve", "--model", &two_type()]);
    assert!((v["rho"].as_f64().unwrap() - 21.4658560997 * 0.02).abs() < 1e-9);
    assert_eq!(v["n_types"], 2);
    assert_eq!(v["roots"].as_array().unwrap().len(), 1);
    let f1: f64 = v["f_at_one"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((f1 - 1.0).abs() < 1e-10);
}

#[test]
fn solve_mm1_pmf_has_half_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["solve", "--model", &mm1(), "--pmf", "--epoch", "departure", "--out", out]);
    let csv = std::fs::read_to_string(dir.path().join("pmf_departure.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,probability,epoch"));
    let p = csv_column(&csv, "probability");
    assert!((f(&p[0]) - 0.5).abs() < 1e-10);
    assert!((f(&p[3]) - 0.0625).abs() < 1e-10);
    assert!(!dir.path().join("pmf_arbitrary.csv").exists());
}

#[test]
fn malformed_weights_exit_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"lambda": 0.5, "G": [
            [{"weight": 0.5, "family": "exponential", "rate": 1.0}, {"weight": 0.4, "family": "exponential", "rate": 1.0}],
            [{"weight": 0.5, "family": "exponential", "rate": 1.0}, {"weight": 0.5, "family": "exponential", "rate": 1.0}]]}"#,
    )
    .unwrap();
    let o = smq(&["solve", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("G[0]"), "{}", stderr(&o));
}

#[test]
fn schema_error_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"lambda": 0.5, "G": [[{"weight": 1, "family": "pareto"}]]}"#).unwrap();
    let o = smq(&["solve", "--model", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("G[0][0]"), "{}", stderr(&o));
}

#[test]
fn missing_file_exit_1_and_unstable_exit_3() {
    assert_eq!(smq(&["solve", "--model", "/nonexistent/model.json"]).status.code(), Some(1));
    let o = smq(&["solve", "--model", &mm1(), "--lambda", "1.2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("rho"));
}

#[test]
fn pmf_without_out_is_rejected() {
    assert_eq!(smq(&["solve", "--model", &mm1(), "--pmf"]).status.code(), Some(2));
}

#[test]
fn ht_mm1_has_unit_rate() {
    let v = json(&["ht", "--model", &mm1()]);
    assert!((v["eta"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["valid"], true);
    assert!(v.get("independence_condition").is_none());
}

#[test]
fn ht_two_type_has_no_dependence_correction() {
    let v = json(&["ht", "--model", &two_type()]);
    assert!(v["independence_condition"].as_f64().unwrap().abs() < 1e-9);
    let eta = v["eta"].as_f64().unwrap();
    assert!((eta - v["no_dependence_eta"].as_f64().unwrap()).abs() < 1e-9);
    assert!((eta - 0.413969622).abs() < 1e-8);
    for key in ["lambda_critical", "alpha_hat_bar", "gamma_bar", "q_bar", "correction_term"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn sweep_header_is_stable() {
    let csv = ok(&["sweep", "--model", &mm1(), "--rho-grid", "0.5"]);
    assert_eq!(
        csv.lines().next().unwrap(),
        "lambda,rho,mean_departure,mean_batch_arrival,mean_customer_arrival,mean_arbitrary,\
         scaled_departure,scaled_batch_arrival,scaled_customer_arrival,scaled_arbitrary,ht_scaled_mean,error"
    );
    let csv = ok(&["sweep", "--model", &mm1(), "--rho-grid", "0.5", "--baseline"]);
    assert!(csv.lines().next().unwrap().ends_with(
        "baseline_scaled_departure,baseline_scaled_batch_arrival,baseline_scaled_customer_arrival,\
         baseline_scaled_arbitrary,baseline_ht_scaled_mean,error"
    ));
    // M/M/1: L = rho / (1 - rho)
    assert!((f(&csv_column(&csv, "mean_departure")[0]) - 1.0).abs() < 1e-8);
}

#[test]
fn sweep_scaled_mean_matches_solve() {
    let csv = ok(&["sweep", "--model", &two_type(), "--rho-grid", "0.3"]);
    let scaled = f(&csv_column(&csv, "scaled_departure")[0]);
    let lambda = csv_column(&csv, "lambda")[0].clone();
    let v = json(&["solve", "--model", &two_type(), "--lambda", &lambda]);
    let rho = v["rho"].as_f64().unwrap();
    assert!((rho - 0.3).abs() < 1e-9);
    let mean = v["mean_queue_length"]["departure"].as_f64().unwrap();
    assert!((scaled - (1.0 - rho) * mean).abs() < 1e-9);
}

#[test]
fn sweep_lambda_grid_approaches_heavy_traffic_limit() {
    let csv = ok(&["sweep", "--model", &two_type(), "--lambda-grid", "0.005:0.0465:0.0005", "--baseline"]);
    let scaled = csv_column(&csv, "scaled_departure");
    assert_eq!(scaled.len(), 84);
    assert!(csv_column(&csv, "error").iter().all(String::is_empty));
    let limit = f(&csv_column(&csv, "ht_scaled_mean")[0]);
    let last = f(scaled.last().unwrap());
    assert!((last - limit).abs() / limit < 0.15, "{last} vs {limit}");
    // increasing towards the limit
    let xs: Vec<f64> = scaled.iter().map(|s| f(s)).collect();
    assert!(xs.windows(2).all(|w| w[1] > w[0]));
    let base = f(csv_column(&csv, "baseline_scaled_departure").last().unwrap());
    assert!((base - last).abs() / last < 0.05, "{base} vs {last}");
}

#[test]
fn sweep_records_failing_points_in_row() {
    let csv = ok(&["sweep", "--model", &mm1(), "--lambda-grid", "0.5,1.5"]);
    let errors = csv_column(&csv, "error");
    assert!(errors[0].is_empty());
    assert!(errors[1].contains("not below 1"), "{}", errors[1]);
    assert_eq!(smq(&["sweep", "--model", &mm1(), "--lambda-grid", "0.5:0.1:0.1"]).status.code(), Some(2));
    assert_eq!(smq(&["sweep", "--model", &mm1(), "--rho-grid", "1.2"]).status.code(), Some(2));
}

fn kolmogorov(rho: &str) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let csv = ok(&["density", "--model", &two_type(), "--rho", rho, "--bins", "40", "--out", out]);
    assert_eq!(csv.lines().next(), Some("x_left,x_right,density,cdf,exp_density,exp_cdf"));
    assert_eq!(csv.lines().count(), 41);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("density.json")).unwrap()).unwrap();
    v["kolmogorov_distance"].as_f64().unwrap()
}

#[test]
fn density_converges_to_exponential() {
    assert!(kolmogorov("0.99") < 0.05);
    assert!(kolmogorov("0.3") > 0.1);
}

#[test]
fn density_needs_ten_bins() {
    let o = smq(&["density", "--model", &two_type(), "--rho", "0.9", "--bins", "9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_two_type_passes() {
    let v = json(&["compare", "--model", &two_type(), "--departures", "1000000", "--seed", "42"]);
    assert_eq!(v["pass"], true);
    for e in v["epochs"].as_array().unwrap() {
        assert!(e["total_variation"].as_f64().unwrap() < 0.01, "{e}");
    }
}

#[test]
fn compare_mm1_passes_tightly() {
    let v = json(&["compare", "--model", &mm1(), "--departures", "1000000", "--seed", "7"]);
    assert_eq!(v["pass"], true);
    for e in v["epochs"].as_array().unwrap() {
        assert!(e["total_variation"].as_f64().unwrap() < 0.005, "{e}");
    }
}

#[test]
fn compare_detects_corrupted_solver() {
    let o = smq(&["compare", "--model", &two_type(), "--departures", "1000000", "--corrupt-p1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("comparison failed") && err.contains("departure"), "{err}");
}

#[test]
fn compare_is_deterministic() {
    let args = ["compare", "--model", &two_type(), "--departures", "20000", "--seed", "3", "--replications", "4"];
    // 20k departures may or may not pass; either way the output must repeat
    let (a, b) = (smq(&args), smq(&args));
    assert_eq!(a.status.code(), b.status.code());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    assert!(!a.stdout.is_empty() || !a.stderr.is_empty());
}

#[test]
fn manifest_pairs_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    ok(&["solve", "--model", &two_type(), "--pmf", "--out", out]);
    let m: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "solve");
    assert_eq!(m["model_hash"].as_str().unwrap().len(), 64);
    assert!(m["finished_at"].as_f64().unwrap() >= m["started_at"].as_f64().unwrap());
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 5);
    for o in outputs {
        let bytes = std::fs::read(o["path"].as_str().unwrap()).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
    // the hash depends on the model, not on how the file is formatted
    let reformatted = dir.path().join("compact.json");
    let text: Value = serde_json::from_str(&std::fs::read_to_string(two_type()).unwrap()).unwrap();
    std::fs::write(&reformatted, serde_json::to_string(&text).unwrap()).unwrap();
    let out2 = dir.path().join("second");
    ok(&["solve", "--model", reformatted.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    let m2: Value =
        serde_json::from_str(&std::fs::read_to_string(out2.join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["model_hash"], m2["model_hash"]);
}
