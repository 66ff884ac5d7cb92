use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lbcnnm::transform::TransformModel;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lbcnnm"))
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("LBCNNM_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn series_row(id: &str, from: usize, to: usize, phase: f64) -> String {
    let v: Vec<String> =
        (from..to).map(|t| format!("{:.3}", 40.0 + 6.0 * (t as f64 * 0.52 + phase).sin() + 0.05 * t as f64)).collect();
    format!("{id},{}\n", v.join(","))
}

fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut train = String::new();
    let mut test = String::new();
    for (i, id) in ["b", "a", "c"].iter().enumerate() {
        train.push_str(&series_row(id, 0, 48, i as f64));
        test.push_str(&series_row(id, 48, 52, i as f64));
    }
    (write(dir, "train.csv", &train), write(dir, "test.csv", &test))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn forecast_writes_scored_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixture(dir.path());
    let out = dir.path().join("f.json");
    let o = run(
        &[
            "forecast",
            "--input",
            s(&train),
            "--test",
            s(&test),
            "--horizon",
            "4",
            "--model-size",
            "12",
            "--multi-kernel",
            "--output",
            s(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    let rows = v.as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r["series_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
    for r in rows {
        assert_eq!(r["method"], "lbcnnm");
        assert_eq!(r["forecast"].as_array().unwrap().len(), 4);
        assert!(r["smape"].is_f64() && r["nrmse"].is_f64());
        assert_eq!(r["chosen_m"], 12);
        assert!(r["shift"].is_f64());
        let mk = &r["multi_kernel"];
        assert_eq!(mk["lower"].as_array().unwrap().len(), 4);
        assert_eq!(mk["kernels"].as_array().unwrap().len(), mk["forecasts"].as_array().unwrap().len());
    }
}

#[test]
fn forecast_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = fixture(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = run(&["forecast", "--input", s(&train), "--horizon", "4", "--output", s(out)], Some(threads));
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn baseline_and_mask_options() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = fixture(dir.path());
    let out = dir.path().join("d.json");
    let o = run(&["forecast", "--input", s(&train), "--horizon", "4", "--method", "drift", "--output", s(&out)], None);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v[0]["method"], "drift");

    let flags: Vec<&str> = (0..48).map(|t| if t % 9 == 4 { "1" } else { "0" }).collect();
    let mask = write(dir.path(), "mask.csv", &format!("a,{}\n", flags.join(",")));
    let o = run(
        &[
            "forecast",
            "--input",
            s(&train),
            "--horizon",
            "4",
            "--mask",
            s(&mask),
            "--method",
            "naive",
            "--output",
            s(&out),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v[0]["method"], "lbcnnm-missing");
    assert_eq!(v[1]["method"], "naive");
}

#[test]
fn partial_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = series_row("ok", 0, 40, 0.0);
    body.push_str("short,1\n");
    let input = write(dir.path(), "in.csv", &body);
    let out = dir.path().join("p.json");
    let o = run(&["forecast", "--input", s(&input), "--horizon", "3", "--method", "naive", "--output", s(&out)], None);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
}

#[test]
fn fatal_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = fixture(dir.path());
    let out = dir.path().join("x.json");
    let missing = dir.path().join("nope.csv");
    let o = run(&["forecast", "--input", s(&missing), "--horizon", "4", "--output", s(&out)], None);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["forecast", "--input", s(&train), "--horizon", "4", "--method", "arima", "--output", s(&out)], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("arima"));
}

#[test]
fn benchmark_writes_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = fixture(dir.path());
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let report = dir.path().join(format!("r{threads}.json"));
        let o = run(
            &[
                "benchmark",
                "--train",
                s(&train),
                "--test",
                s(&test),
                "--format",
                "simple",
                "--horizon",
                "4",
                "--methods",
                "lbcnnm,naive,average",
                "--model-size",
                "12",
                "--missing-rate",
                "0.1",
                "--trials",
                "2",
                "--seed",
                "9",
                "--report",
                s(&report),
            ],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("naive"));
        outputs.push(fs::read(&report).unwrap());
        let csv = fs::read_to_string(dir.path().join(format!("r{threads}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3 * (3 + 2));
        assert!(dir.path().join(format!("r{threads}.summary.csv")).exists());
    }
    assert_eq!(outputs[0], outputs[1]);
    let v: Value = serde_json::from_slice(&outputs[0]).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 15);
}

#[test]
fn learn_transform_and_diagnose() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = fixture(dir.path());
    let model = dir.path().join("a.txt");
    let o = run(
        &["learn-transform", "--input", s(&train), "--series", "b", "--model-size", "10", "--output", s(&model)],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let loaded = TransformModel::load(&model).unwrap();
    assert_eq!((loaded.m(), loaded.q()), (10, 20));

    let o = run(&["diagnose", "--input", s(&train), "--model-size", "10", "--horizon", "2"], None);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["kernel"], 10);
    assert!(v["coherence"]["mu_a"].as_f64().unwrap() >= 1.0 - 1e-9);
    assert!(v["spectrum"]["gini"].is_f64());
}
