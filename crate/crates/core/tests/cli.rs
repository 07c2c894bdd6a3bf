use std::path::Path;
use std::process::{Command, Output};

fn odl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odl"))
        .args(args)
        .env_remove("ODL_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PARAMS: [&str; 12] = [
    "--a", "0.3", "--b", "0.4", "--alpha", "0.5", "--beta", "0", "--n0", "1", "--m0", "1",
];

fn with_params<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(PARAMS.iter()).chain(tail).copied().collect()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let (x, y) = (d.path().join("x"), d.path().join("y"));
    for dir in [&x, &y] {
        let o = odl(&with_params(
            &["simulate"],
            &["--steps", "1000", "--seed", "42", "--out", dir.to_str().unwrap()],
        ));
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = read(&x, "trajectory.csv");
    assert_eq!(a, read(&y, "trajectory.csv"));
    assert!(a.starts_with(b"step,count_a,count_b,decision\n0,1,1,\n"));
}

#[test]
fn missing_m0_names_the_field() {
    let o = odl(&["simulate", "--a", "0.3", "--b", "0.4", "--alpha", "0.5", "--beta", "0", "--n0", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("m0"), "{e}");
    assert_eq!(e.trim().lines().count(), 1);
}

#[test]
fn constraint_violation_exits_2() {
    let o = odl(&["simulate", "--beta", "0.1", "--b", "0.5", "--a", "0.2", "--alpha", "0.5", "--n0", "1", "--m0", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b <= a"));
}

#[test]
fn moments_table() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = odl(&with_params(&["moments"], &["--times", "0,1", "--orders", "3", "--out", out]));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = String::from_utf8(read(d.path(), "moments.csv")).unwrap();
    let rows: Vec<(u64, u32, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6);
    // N0 = 1, so every moment at n = 0 is exactly 1
    assert!(rows.iter().filter(|r| r.0 == 0).all(|r| r.2 == 1.0));
    let first = rows.iter().find(|r| r.0 == 1 && r.1 == 1).unwrap();
    assert!((first.2 - 1.4).abs() < 1e-12);
    assert!(d.path().join("moments.json").exists());

    let bad = odl(&with_params(&["moments"], &["--orders", "13", "--out", out]));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn oracle_writes_a_distribution() {
    let d = tempfile::tempdir().unwrap();
    let o = odl(&with_params(&["oracle"], &["--n", "50", "--out", d.path().to_str().unwrap()]));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = String::from_utf8(read(d.path(), "distribution.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,probability"));
    let mass: f64 = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);

    let capped = odl(&with_params(&["oracle"], &["--n", "5001", "--out", d.path().to_str().unwrap()]));
    assert_eq!(capped.status.code(), Some(2));
}

#[test]
fn verify_exit_codes_and_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("ok");
    let run = ["--horizon", "20000", "--replications", "2000", "--out", out.to_str().unwrap()];
    let o = odl(&with_params(&["verify"], &run));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&read(&out, "report.json")).unwrap();
    assert_eq!(report["all_passed"], true);
    assert!(report["rows"].as_array().unwrap().len() >= 6);
    for f in ["report.csv", "summary.json", "theory.json", "checkpoints.csv", "fluct_hist.csv", "asclt_overlay.csv", "cn_trace.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let cp = String::from_utf8(read(&out, "checkpoints.csv")).unwrap();
    assert_eq!(cp.lines().next(), Some("n,stat,value,stderr"));

    let zero = d.path().join("zero");
    let o = odl(&with_params(
        &["verify"],
        &["--horizon", "2000", "--replications", "200", "--zero-tolerance", "--out", zero.to_str().unwrap()],
    ));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_reports_do_not_depend_on_threads() {
    let d = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out = d.path().join(threads);
        let o = odl(&with_params(
            &["verify"],
            &["--horizon", "5000", "--replications", "300", "--threads", threads, "--out", out.to_str().unwrap()],
        ));
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
        reports.push((read(&out, "report.json"), read(&out, "summary.json"), read(&out, "checkpoints.csv")));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn threads_fall_back_to_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_odl"))
        .args(with_params(&["verify"], &["--horizon", "1000", "--replications", "50", "--out", d.path().to_str().unwrap()]))
        .env("ODL_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threads"));
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"params": {"a": 0.3, "b": 0.4, "alpha": 0.5, "beta": 0.0, "n0": 1, "m0": 1},
            "run": {"horizon": 200, "master_seed": 1, "stride": {"kind": "every", "k": 1}},
            "output": {"formats": ["csv"]}}"#,
    )
    .unwrap();
    let run = |seed: &str, dir: &str| {
        let out = d.path().join(dir);
        let o = odl(&["--config", cfg.to_str().unwrap(), "simulate", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        read(&out, "trajectory.csv")
    };
    let one = run("1", "a");
    assert_eq!(String::from_utf8_lossy(&one).lines().count(), 202);
    assert_ne!(one, run("2", "b"));

    std::fs::write(&cfg, r#"{"run": {"horizn": 5}}"#).unwrap();
    let o = odl(&["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizn"));
}

#[test]
fn sweep_over_theta() {
    let d = tempfile::tempdir().unwrap();
    let o = odl(&[
        "sweep", "--a", "0.2", "--n0", "1", "--m0", "1", "--grid", "theta=0.2,0.5,0.8", "--horizon", "2000",
        "--replications", "100", "--out", d.path().to_str().unwrap(),
    ]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    let index: serde_json::Value = serde_json::from_slice(&read(d.path(), "index.json")).unwrap();
    let entries = index.as_array().unwrap();
    assert_eq!(entries.len(), 3);
    let regimes: Vec<&str> = entries.iter().map(|e| e["regime"].as_str().unwrap()).collect();
    assert_eq!(regimes, ["subcritical", "critical", "supercritical"]);
    for e in entries {
        assert!(d.path().join(e["directory"].as_str().unwrap()).join("report.json").exists());
    }
}
