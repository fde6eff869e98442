use std::path::Path;
use std::process::{Command, Output};

fn gpcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpcert")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_blobs(dir: &Path, name: &str) -> String {
    let out = dir.join(name);
    let o = gpcert(&[
        "gen-blobs", "--n-per-class", "30", "--dim", "2", "--separation", "8", "--spread", "1", "--seed", "4",
        "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.to_str().unwrap().to_string()
}

#[test]
fn gen_blobs_writes_csv_and_binary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = gen_blobs(dir.path(), "b.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("f0,f1,label\n"));
    assert_eq!(text.lines().count(), 61);
    let json = gen_blobs(dir.path(), "b.json");
    assert!(dir.path().join("b.f64").exists());
    let a = gpcert::io::load_dataset(Path::new(&csv)).unwrap();
    let b = gpcert::io::load_dataset(Path::new(&json)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn certify_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_blobs(dir.path(), "b.csv");
    let o = gpcert(&["certify", "--data", &data, "--theta1", "1", "--theta2", "10", "--norm", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["jitter"].as_f64().unwrap(), 1e-10);
    assert!(v["certificate"]["valid"].as_bool().unwrap());
    let tail = v["certificate"]["exact_tail"].as_f64().unwrap();
    assert!(tail < v["certificate"]["phi_bound"].as_f64().unwrap());
    assert!(v["monotonicity"]["table"].as_array().unwrap().len() > 1);
    assert!(v["certifying"].is_boolean());
}

#[test]
fn certify_accepts_r_directly() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_blobs(dir.path(), "b.csv");
    let out = dir.path().join("cert.json");
    let o = gpcert(&[
        "certify", "--data", &data, "--theta1", "1", "--theta2", "10", "--r", "0.99", "--out", s(&out),
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["certificate"]["r"].as_f64().unwrap(), 0.99);
}

#[test]
fn attack_writes_records_and_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_blobs(dir.path(), "b.csv");
    let (out, plot) = (dir.path().join("r.csv"), dir.path().join("p.csv"));
    let o = gpcert(&[
        "attack", "--data", &data, "--theta1", "0.5", "--theta2", "10", "--norm", "0.5", "--origin-class", "both",
        "--out", s(&out), "--plot-data", s(&plot),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = gpcert::io::read_records(&out).unwrap();
    assert_eq!(recs.len(), 60);
    let plot = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot.lines().count(), 61);
}

#[test]
fn scan_monotone_prints_table() {
    let o = gpcert(&[
        "scan-monotone", "--theta1", "1", "--theta2", "10", "--r", "0.9", "--s-min", "0.01", "--s-max", "0.89",
        "--points", "50",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# monotone="));
    assert_eq!(lines.next().unwrap(), "s,mu,sigma2,exact_tail,phi_bound");
    assert_eq!(lines.count(), 50);

    let o = gpcert(&["scan-monotone", "--theta1", "1", "--theta2", "10", "--r", "0.9", "--grid", "0.2,0.5"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = gen_blobs(dir.path(), "b.csv");
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"theta1_values": [0.1, 1], "theta2_values": [10], "norm": 0.4, "epsilon": 0,
                "jitter": 1e-10, "seed": 1, "dataset_source": {{"file": {data:?}}}}}"#
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = gpcert(&["sweep", "--config", s(&config), "--out-dir", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(out.join("records_t1-0.1_t2-10_rep0.csv").exists());
    assert!(out.join("histogram.csv").exists());
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(
        &config,
        r#"{"theta1_values": [], "theta2_values": [10], "norm": 0.4, "seed": 1,
            "dataset_source": {"blobs": {"n_per_class": 5, "dim": 2, "separation": 3, "spread": 1}}}"#,
    )
    .unwrap();
    let o = gpcert(&["sweep", "--config", s(&config), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));

    let o = gpcert(&["certify", "--data", "/nonexistent.csv", "--theta1", "1", "--theta2", "1", "--r", "0.5"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "f0,label\n1.0,+1\n2.0,0\n").unwrap();
    let o = gpcert(&["attack", "--data", s(&bad), "--theta1", "1", "--theta2", "1", "--norm", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn numeric_failures_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let dup = dir.path().join("dup.csv");
    std::fs::write(&dup, "f0,label\n0.0,+1\n0.0,+1\n3.0,-1\n").unwrap();
    let o = gpcert(&[
        "attack", "--data", s(&dup), "--theta1", "1", "--theta2", "1", "--norm", "0.5", "--jitter", "0",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive definite"));
}
