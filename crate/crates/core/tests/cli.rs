//! `labcli` end to end: run/report, exit codes, reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use localtime_lab::experiment::{ExperimentConfig, Manifest};

fn labcli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_labcli"))
        .args(args)
        .env_remove("LAB_DETERMINISTIC")
        .output()
        .expect("labcli runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const CONVERGENCE: &str = r#"{
  "experiment": "convergence",
  "a": -1.0, "b": 1.0,
  "kernel": {"kind": "box", "params": {"half_width": 1.0, "height": 1.0}},
  "gamma": 1.0,
  "lambdas": [1.0],
  "epsilons": [0.2, 0.1, 0.05],
  "h": 0.001,
  "g": "cos"
}"#;

const LOCALITY: &str = r#"{
  "experiment": "exit_law",
  "a": -1.0, "b": 1.0,
  "mc": {"paths": 4000, "dt": 0.0001, "dump_samples": true},
  "seed": 5
}"#;

fn run(dir: &Path, config: &Path, out: &str) -> (Output, PathBuf) {
    let out = dir.join(out);
    let o = labcli(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    (o, out)
}

#[test]
fn convergence_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "convergence.json", CONVERGENCE);
    let (o, out) = run(dir.path(), &cfg, "conv");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,sup_error,residual_sup"));
    let errors: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");

    let manifest = Manifest::load(&out.join("manifest.json")).unwrap();
    assert!(manifest.passed);
    assert_eq!(manifest.config, ExperimentConfig::load(&cfg).unwrap());
    assert!(manifest.wall_times.contains_key("total"));

    let r = labcli(&["report", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    let row = text.lines().find(|l| l.contains("strictly decreasing")).unwrap();
    assert!(row.ends_with("PASS"), "{text}");
}

#[test]
fn floats_carry_17_significant_digits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "convergence.json", CONVERGENCE);
    let (_, out) = run(dir.path(), &cfg, "conv");
    let csv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    let cell = csv.lines().nth(1).unwrap().split(',').next().unwrap();
    let mantissa = cell.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{cell}");
}

#[test]
fn invalid_config_exits_2_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        &CONVERGENCE.replace("\"b\": 1.0", "\"b\": -0.5"),
    );
    let (o, out) = run(dir.path(), &cfg, "bad");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("`b`"), "{err}");
    assert!(!out.join("manifest.json").exists());

    let cfg = write_config(
        dir.path(),
        "unknown.json",
        &CONVERGENCE.replace("\"convergence\"", "\"nope\""),
    );
    let (o, _) = run(dir.path(), &cfg, "unknown");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("nope"));
}

#[test]
fn failed_numerical_check_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // errors grow with ε, so an increasing panel is not decreasing
    let cfg = write_config(
        dir.path(),
        "up.json",
        &CONVERGENCE.replace("[0.2, 0.1, 0.05]", "[0.05, 0.1, 0.2]"),
    );
    let (o, out) = run(dir.path(), &cfg, "up");
    assert_eq!(o.status.code(), Some(3));
    assert!(!Manifest::load(&out.join("manifest.json")).unwrap().passed);
    let r = labcli(&["report", out.join("manifest.json").to_str().unwrap()]);
    assert!(String::from_utf8(r.stdout).unwrap().contains("FAIL"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "locality.json", LOCALITY);
    let (o1, a) = run(dir.path(), &cfg, "one");
    let (o2, b) = run(dir.path(), &cfg, "two");
    assert_eq!(o1.status.code(), Some(0), "{}", String::from_utf8_lossy(&o1.stderr));
    assert_eq!(o2.status.code(), Some(0));
    for f in ["exit_law.json", "exit_law_samples.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = {
        let out = dir.path().join("det");
        let o = Command::new(env!("CARGO_BIN_EXE_labcli"))
            .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .env("LAB_DETERMINISTIC", "1")
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        out
    };
    assert_eq!(Manifest::load(&c.join("manifest.json")).unwrap().threads, 1);
    assert_eq!(
        fs::read(a.join("exit_law.json")).unwrap(),
        fs::read(c.join("exit_law.json")).unwrap()
    );
}

#[test]
fn locality_reports_mean_ci_around_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "locality.json", LOCALITY);
    let (o, out) = run(dir.path(), &cfg, "loc");
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("exit_law.json")).unwrap()).unwrap();
    let ci = v["mean_ci"].as_array().unwrap();
    let (lo, hi) = (ci[0].as_f64().unwrap(), ci[1].as_f64().unwrap());
    println!("mean CI [{lo}, {hi}]");
    assert!(lo <= 1.0 && 1.0 <= hi);
    assert_eq!(v["expected_mean"].as_f64(), Some(1.0));
}

#[test]
fn slow_decay_is_a_fail_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "decay.json",
        r#"{"experiment": "decay", "a": -1, "b": 1, "gamma": 1, "h": 0.01, "dt": 0.01, "g": "mode"}"#,
    );
    let (o, out) = run(dir.path(), &cfg, "decay");
    assert_eq!(o.status.code(), Some(0));
    let path = out.join("decay.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    // below 0.95 π²/8 ≈ 1.172
    v["kappa_fit"] = serde_json::json!(1.1);
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let r = labcli(&["report", out.join("manifest.json").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let text = String::from_utf8(r.stdout).unwrap();
    let row = text
        .lines()
        .rfind(|l| l.trim_start().starts_with("kappa_fit "))
        .unwrap();
    assert!(row.ends_with("FAIL"), "{text}");
}

#[test]
fn empty_manifest_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("manifest.json");
    fs::write(&path, "").unwrap();
    let r = labcli(&["report", path.to_str().unwrap()]);
    assert_ne!(r.status.code(), Some(0));
    assert!(r.stdout.is_empty());

    let cfg = write_config(dir.path(), "convergence.json", CONVERGENCE);
    let (_, out) = run(dir.path(), &cfg, "conv");
    fs::remove_file(out.join("convergence.csv")).unwrap();
    let r = labcli(&["report", out.join("manifest.json").to_str().unwrap()]);
    assert_ne!(r.status.code(), Some(0));
    assert!(r.stdout.is_empty());
    assert!(String::from_utf8(r.stderr).unwrap().contains("missing artifact"));
}

#[test]
fn closedform_prints_csv() {
    let o = labcli(&["closedform", "--what", "kstar", "--gamma", "1", "--h", "0.25"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|c| c.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect();
    assert_eq!(text.lines().next(), Some("x,value"));
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0].1, 0.0);
    assert_eq!(rows[8].1, 1.0);
    // k*(0) = -a / (b - a - 2γab) = 1/4
    assert!((rows[4].1 - 0.25).abs() < 1e-15);
}

#[test]
fn subcommands_write_into_out_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cases: [(&[&str], &str); 4] = [
        (
            &[
                "resolvent",
                "--eps",
                "limit",
                "--lambda",
                "1",
                "--g",
                "cos",
                "--h",
                "0.01",
            ],
            "resolvent.csv",
        ),
        (
            &[
                "evolve",
                "--kind",
                "a-limit",
                "--t",
                "0.1",
                "--h",
                "0.01",
                "--dt",
                "0.01",
                "--snapshots",
                "2",
            ],
            "evolve.csv",
        ),
        (&["decay", "--gamma", "0", "--h", "0.01", "--dt", "0.01"], "decay.json"),
        (&["blocks", "--t", "0.2", "--h", "0.01", "--dt", "0.01"], "blocks.json"),
    ];
    for (args, file) in cases {
        let mut a = args.to_vec();
        a.extend(["--out", out]);
        let o = labcli(&a);
        assert_eq!(
            o.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(Path::new(out).join(file).is_file(), "{file}");
    }
    let evolve = fs::read_to_string(dir.path().join("evolve.csv")).unwrap();
    assert_eq!(evolve.lines().next(), Some("t,x,value"));
    // t = 0 plus two snapshots on 201 nodes
    assert_eq!(evolve.lines().count(), 1 + 3 * 201);
    let decay: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("decay.json")).unwrap()).unwrap();
    let kappa = decay["kappa_fit"].as_f64().unwrap();
    assert!((kappa / 1.2337005501361697 - 1.0).abs() < 0.02, "{kappa}");
}

#[test]
fn mc_survival_json() {
    let o = labcli(&[
        "mc",
        "--experiment",
        "survival",
        "--paths",
        "2000",
        "--seed",
        "3",
        "--x0",
        "0,0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["exact"].as_f64(), Some(0.75));
    assert!(rows[0]["weighted"]["std_error"].as_f64().unwrap() > 0.0);
}
