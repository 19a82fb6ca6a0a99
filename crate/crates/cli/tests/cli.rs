use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn capnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capnet"))
        .current_dir(dir)
        .env_remove("CAPNET_OUT")
        .args(["--out", "."])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = capnet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON: {line}: {e}"))
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join(name)).unwrap()).unwrap()
}

fn pipeline(dir: &Path) {
    ok(dir, &["ingest", "--synthetic", "--r", "0.85", "--eta", "0.15", "--na", "30", "--nc", "40", "--np", "120", "--seed", "5"]);
    ok(dir, &["rca", "--input", "trade.csv", "--log10", "--ordered"]);
    ok(dir, &["matrix", "--input", "trade.csv", "--threshold", "1", "--drop-products", "REST", "--edge-list"]);
    ok(dir, &["metrics", "--matrix", "matrix.csv"]);
    for m in ["1", "2", "3", "4"] {
        ok(dir, &["nullmodel", "--matrix", "matrix.csv", "--model", m, "--replicates", "8", "--seed", "3", "--swap-factor", "5"]);
    }
    for s in ["diversification", "ubiquity", "proximity"] {
        ok(dir, &["fitdist", "--matrix", "matrix.csv", "--sample", s, "--weighted-ks"]);
    }
    ok(dir, &["model", "simulate", "--r", "0.85", "--q", "0.2", "--na", "30", "--nc", "40", "--np", "120", "--seed", "9", "--export-world"]);
    ok(dir, &["model", "analytic", "--r", "0.85", "--q", "0.2", "--na", "30", "--nc", "40", "--np", "120", "--points", "11"]);
    ok(dir, &[
        "calibrate", "--matrix", "matrix.csv", "--r-min", "0.7", "--r-max", "0.95", "--r-step", "0.05", "--na-min", "10",
        "--na-max", "50", "--na-step", "10", "--seeds-per-cell", "2", "--seed", "11", "--replicates", "20", "--r2-quantile", "0.4", "--ks-quantile", "0.4",
    ]);
    ok(dir, &["quiescence", "--q", "0.2", "--na", "20,60", "--points", "21"]);
    ok(dir, &["report"]);
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
        .collect()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);
    for name in [
        "trade.csv", "exports.csv", "planted.csv", "synthetic.json", "rca.csv", "matrix.csv", "edges.csv",
        "degrees_country.csv", "degrees_product.csv", "proximity.csv", "density.json", "nullmodel_1.csv",
        "nullmodel_4.json", "fitdist_proximity.json", "model_network.csv", "world_holdings.csv",
        "curve_kc1.csv", "pdf_ubiquity.csv", "derivative_checks.json", "calibration_grid.csv", "calibration.json",
        "heterogeneous.csv", "quiescence_na20.csv", "quiescence_na60.csv", "summary.json", "summary.txt",
        "manifest.metrics.json", "manifest.calibrate.json", "manifest.report.json",
    ] {
        assert!(dir.join(name).is_file(), "missing {name}");
    }
    let header = |name: &str| std::fs::read_to_string(dir.join(name)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("degrees_country.csv"), "label,k0,k1");
    assert_eq!(header("proximity.csv"), "p,p',phi");
    assert_eq!(header("nullmodel_2.csv"), "k0_bin,mean_k1,std_k1,side");
    assert_eq!(header("calibration_grid.csv"), "r,na,q,r2,ks,feasible");
    assert_eq!(header("quiescence_na20.csv"), "x,y");

    let summary = json(dir, "summary.json");
    assert_eq!(summary["facts"].as_array().unwrap().len(), 4);
    assert!(summary["calibration"]["n_a"].is_u64());
    assert_eq!(summary["planted"]["n_a"], 30);
    let calib = json(dir, "calibration.json");
    assert_eq!(calib["seed"], 11);
    assert_eq!(calib["countries"].as_array().unwrap().len(), calib["n_c"].as_u64().unwrap() as usize);
    let manifest = json(dir, "manifest.calibrate.json");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
    assert_eq!(json(dir, "derivative_checks.json")["signs_hold"], true);
}

#[test]
fn identical_seeds_give_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let (x, y) = (dir_bytes(a.path()), dir_bytes(b.path()));
    assert_eq!(x.keys().collect::<Vec<_>>(), y.keys().collect::<Vec<_>>());
    for (name, bytes) in &x {
        assert!(bytes == &y[name], "{name} differs between runs");
    }
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = capnet(tmp.path(), &["metrics", "--matrix", "m.csv", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(stderr_json(&out)["exit_code"], 2);
    assert_eq!(capnet(tmp.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(capnet(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn validation_and_runtime_errors_are_json() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = capnet(dir, &["model", "simulate", "--r", "1.5", "--q", "0.1", "--na", "5", "--nc", "3", "--np", "3"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "invalid_parameter");

    let out = capnet(dir, &["metrics", "--matrix", "does-not-exist.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "io");

    std::fs::write(dir.join("bad.csv"), "country,product\nA,x\n").unwrap();
    let out = capnet(dir, &["ingest", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "missing_column");

    let out = capnet(dir, &["ingest", "--synthetic", "--r", "0.8"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn existing_outputs_need_force() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let args = ["model", "simulate", "--r", "0.8", "--q", "0.1", "--na", "10", "--nc", "6", "--np", "9"];
    ok(dir, &args);
    let before = std::fs::read(dir.join("model_network.csv")).unwrap();
    let out = capnet(dir, &[&args[..], &["--seed", "4"]].concat());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "output_exists");
    assert_eq!(std::fs::read(dir.join("model_network.csv")).unwrap(), before);
    ok(dir, &[&args[..], &["--seed", "4", "--force"]].concat());
}

#[test]
fn report_names_the_missing_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    pipeline(dir);
    std::fs::remove_file(dir.join("proximity.csv")).unwrap();
    let out = capnet(dir, &["report", "--force"]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "missing_artifact");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("proximity.csv") && !msg.contains("density.json"), "{msg}");
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("run.toml"), "r = 0.8\nq = 0.1\nna = 10\nnc = 6\nnp = 9\nseed = 2\n").unwrap();
    ok(dir, &["--config", "run.toml", "model", "simulate", "--seed", "7"]);
    let m = json(dir, "manifest.model_simulate.json");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["model"]["simulate"]["world"]["na"], 10);
}

#[test]
fn fitdist_reads_a_values_column() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let mut text = String::from("id,x\n");
    for i in 1..=200 {
        text.push_str(&format!("{i},{}\n", (i as f64 / 40.0).exp()));
    }
    std::fs::write(dir.join("values.csv"), text).unwrap();
    ok(dir, &["fitdist", "--input", "values.csv", "--column", "x", "--families", "normal,lognormal"]);
    let fit = json(dir, "fitdist_x.json");
    assert_eq!(fit["n_used"], 200);
    assert_eq!(fit["fits"].as_array().unwrap().len(), 2);
    assert!(fit["fits"][0]["weighted_ks"].is_null());
}
