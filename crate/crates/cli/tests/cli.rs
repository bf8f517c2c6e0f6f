use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

fn calx(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calx"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("CALX_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn summary(o: &Output) -> HashMap<String, String> {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn num(s: &HashMap<String, String>, key: &str) -> f64 {
    s.get(key)
        .unwrap_or_else(|| panic!("missing {key} in {s:?}"))
        .parse()
        .unwrap()
}

#[test]
fn simulate_reports_oscillation() {
    let d = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 3] = [
        (
            &["simulate", "--model", "atri", "--mu", "0.3", "--init", "0.4,0.5"],
            "true",
        ),
        (
            &[
                "simulate", "--model", "mech", "--mu", "0.2894", "--lambda", "3", "--alpha", "10",
            ],
            "false",
        ),
        (
            &["simulate", "--model", "vdp", "--epsilon", "0.025", "--t-end", "1000"],
            "true",
        ),
    ];
    for (args, want) in cases {
        let s = summary(&calx(d.path(), args));
        assert_eq!(s["oscillating"], want, "{args:?}");
    }
    let csv = std::fs::read_to_string(d.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x,y\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn curves_summaries() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&calx(
        d.path(),
        &["curves", "--kind", "hopf", "--hill", "1", "--alpha", "10"],
    ));
    assert!((num(&s, "lambda_max") - 1.68632).abs() < 1e-3);
    assert_eq!(s["morphology"], "Simple");
    let s = summary(&calx(
        d.path(),
        &["curves", "--kind", "fold", "--hill", "1", "--alpha", "10"],
    ));
    assert_eq!(s["fold_branches"], "2");
    assert!((num(&s, "merge_lambda") - 0.83).abs() < 0.05);
    let s = summary(&calx(
        d.path(),
        &["curves", "--kind", "hopf", "--hill", "2", "--alpha", "1"],
    ));
    assert_eq!(s["morphology"], "BowTie");
    let csv = std::fs::read_to_string(d.path().join("curves_hopf.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("c,mu,lambda,kind"));
}

#[test]
fn sweeps() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&calx(
        d.path(),
        &[
            "sweep",
            "--model",
            "atri",
            "--param",
            "mu",
            "--range",
            "0.28:0.52:0.005",
            "--hysteresis",
        ],
    ));
    assert!((num(&s, "onset") - 0.289).abs() < 2e-3);
    assert!((num(&s, "cycle_fold") - 0.5106).abs() < 5e-3);
    let s = summary(&calx(
        d.path(),
        &[
            "sweep", "--model", "mech", "--param", "lambda", "--range", "0:2", "--points", "21", "--mu", "0.25",
        ],
    ));
    let (lo, hi) = s["window"].split_once(':').unwrap();
    let (lo, hi): (f64, f64) = (lo.parse().unwrap(), hi.parse().unwrap());
    assert!(lo > 0.0 && hi < 2.0 && lo < hi);
    let s = summary(&calx(
        d.path(),
        &[
            "sweep", "--model", "atri", "--param", "mu", "--range", "0:0.2", "--points", "11",
        ],
    ));
    assert_eq!(s["n_oscillating"], "0");
}

#[test]
fn gspt_layers() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&calx(d.path(), &["gspt", "--model", "atri", "--mu", "0.3"]));
    assert!((num(&s, "t_turning") - 0.816).abs() < 1e-2);
    let s = summary(&calx(
        d.path(),
        &[
            "gspt", "--model", "mech", "--mu", "0.3", "--lambda", "1", "--alpha", "10",
        ],
    ));
    assert_eq!(s["turning"], "true");
    assert_eq!(s["escaping"], "false");
    let s = summary(&calx(
        d.path(),
        &["gspt", "--model", "mech", "--mu", "0.3", "--lambda", "1", "--K", "1.5"],
    ));
    assert_eq!(s["escaping"], "true");
}

#[test]
fn equilibria_and_ladder() {
    let d = tempfile::tempdir().unwrap();
    let s = summary(&calx(d.path(), &["equilibria", "--mu", "0.289"]));
    assert_eq!(s["n_equilibria"], "3");
    let s = summary(&calx(d.path(), &["ladder"]));
    assert_eq!(s["n_events"], "7");
    let csv = std::fs::read_to_string(d.path().join("ladder.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("0.27828"));
    assert!(csv.lines().nth(1).unwrap().contains(",discr,"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "sweep",
        "--model",
        "mech",
        "--param",
        "mu",
        "--range",
        "0.28:0.32",
        "--points",
        "5",
        "--lambda",
        "0.5",
    ];
    summary(&calx(a.path(), &args));
    summary(&calx(b.path(), &args));
    for name in ["sweep.csv", "manifest.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn flags_override_parameter_file() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("p.json");
    std::fs::write(&file, r#"{"mu": 0.55, "b": 0.2}"#).unwrap();
    let f = file.to_str().unwrap();
    summary(&calx(d.path(), &["--params", f, "equilibria", "--mu", "0.3"]));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(d.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["params"]["mu"], 0.3);
    assert_eq!(m["config"]["params"]["b"], 0.2);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_configuration_fails() {
    let d = tempfile::tempdir().unwrap();
    let file = d.path().join("bad.json");
    std::fs::write(&file, r#"{"b": 2}"#).unwrap();
    let o = calx(d.path(), &["--params", file.to_str().unwrap(), "verify"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("b"));
    assert!(!calx(d.path(), &["simulate", "--model", "mech", "--init", "1,2"])
        .status
        .success());
    assert!(!calx(d.path(), &["sweep", "--range", "1:0"]).status.success());
}

#[test]
fn verify_exit_status_tracks_checks() {
    let d = tempfile::tempdir().unwrap();
    let o = calx(d.path(), &["verify", "--only", "1,2,9"]);
    let s = summary(&o);
    assert_eq!(s["checks"], "3");
    assert_eq!(s["passed"], "3");
    let o = calx(d.path(), &["verify", "--only", "6b"]);
    assert!(!o.status.success());
    let csv = std::fs::read_to_string(d.path().join("verify.csv")).unwrap();
    assert!(csv.contains("6b,false"));
}

#[test]
fn output_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_calx"))
        .args(["ladder", "--mu-lo", "0.4"])
        .env("CALX_OUT_DIR", d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("ladder.csv").exists());
}
