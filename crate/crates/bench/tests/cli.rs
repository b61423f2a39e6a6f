use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn amsqn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amsqn"))
        .args(args)
        .env_remove("AMSQN_JOBS")
        .output()
        .expect("binary runs")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn strip_time(csv: &str) -> String {
    let mut rd = csv::Reader::from_reader(csv.as_bytes());
    let header = rd.headers().unwrap().clone();
    let t = header.iter().position(|h| h == "time_ms").unwrap();
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            r.iter()
                .enumerate()
                .filter(|(i, _)| *i != t)
                .map(|(_, v)| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

const GD_QUADRATIC: &str = r#"{"problem": {"kind": "quadratic", "n": 12, "cond": 20}, "solver": {"method": "gd", "seed": 3}}"#;

#[test]
fn sweep_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = amsqn(&["sweep", "--config", s(&golden("tiny_sweep.json")), "--out", s(&out), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(golden("tiny_sweep.csv")).unwrap());
    let table = fs::read_to_string(out.join("table.md")).unwrap();
    assert_eq!(table, fs::read_to_string(golden("tiny_table.md")).unwrap());
    assert_eq!(table.lines().count(), 2 + 5);
    let echoed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sweep_spec.json")).unwrap()).unwrap();
    assert_eq!(echoed["solver"]["rejection_eps"], 0.01);
    assert_eq!(echoed["solver"]["shift"]["c"], 0.5);
}

#[test]
fn sweep_seed_flag_and_env_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let o = Command::new(env!("CARGO_BIN_EXE_amsqn"))
        .args(["sweep", "--config", s(&golden("tiny_sweep.json")), "--out", s(&out), "--seeds", "1"])
        .env("AMSQN_JOBS", "1")
        .output()
        .unwrap();
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 5);
}

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.json", GD_QUADRATIC);
    let out = dir.path().join("a");
    let o = amsqn(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,f,grad_norm,grad_ratio,mu,alpha_eff,secants_kept,time_ms\n"));
    let mut rd = csv::Reader::from_reader(trace.as_bytes());
    let ratios: Vec<f64> = rd.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert!(ratios.len() > 2);
    assert!(ratios.windows(2).all(|w| w[1] <= w[0]));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["result"]["status"], "converged");
    assert_eq!(summary["config"]["solver"]["max_iter"], 10000);
    assert_eq!(summary["config"]["solver"]["shift"]["mu0"], 0.001);

    let again = dir.path().join("b");
    assert!(amsqn(&["run", "--config", s(&cfg), "--out", s(&again)]).status.success());
    let trace2 = fs::read_to_string(again.join("trace.csv")).unwrap();
    assert_eq!(strip_time(&trace), strip_time(&trace2));
}

#[test]
fn divergence_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"problem": {"kind": "quadratic", "n": 5, "cond": 10}, "solver": {"method": "gd", "alpha": 5.0}}"#,
    );
    let out = dir.path().join("o");
    let o = amsqn(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success());
    let summary = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(summary.contains("\"diverged\""));
}

#[test]
fn config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"problem": {"kind": "quadratic"}, "solver": {"method": "sr1"}}"#);
    let o = amsqn(&["run", "--config", s(&bad), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("config"));

    let label = write(
        dir.path(),
        "sweep.json",
        r#"{"problem": {"kind": "quadratic"}, "methods": ["BFGS (i,q)"]}"#,
    );
    let o = amsqn(&["sweep", "--config", s(&label), "--out", s(&dir.path().join("o"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("valid tokens"));

    let o = amsqn(&["run", "--config", s(&dir.path().join("missing.json"))]);
    assert!(!o.status.success());
    assert!(!amsqn(&["run"]).status.success());
}

#[test]
fn gen_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "gen.json", r#"{"problem": {"kind": "logreg", "m": 30, "n": 6}, "seed": 4}"#);
    let o = amsqn(&["gen", "--config", s(&g), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("instance.json").exists());
    let cfg = write(
        dir.path(),
        "run.json",
        r#"{"problem_file": "instance.json", "solver": {"method": "newton"}}"#,
    );
    let o = amsqn(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("r"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let inline = write(
        dir.path(),
        "inline.json",
        r#"{"problem": {"kind": "logreg", "m": 30, "n": 6}, "solver": {"method": "newton", "seed": 4}}"#,
    );
    assert!(amsqn(&["run", "--config", s(&inline), "--out", s(&dir.path().join("i"))]).status.success());
    assert_eq!(
        strip_time(&fs::read_to_string(dir.path().join("r/trace.csv")).unwrap()),
        strip_time(&fs::read_to_string(dir.path().join("i/trace.csv")).unwrap())
    );
}

#[test]
fn limited_run_adds_memory_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lm.json",
        r#"{"problem": {"kind": "quadratic", "n": 10, "cond": 10},
            "solver": {"method": "bfgs", "q": 2, "perturbation": "ours", "alpha": 0.5},
            "limited": {"memory": 3, "gamma": "self-scaling"}}"#,
    );
    let out = dir.path().join("o");
    let o = amsqn(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().next().unwrap().ends_with(",time_ms,L,gamma"));
}

#[test]
fn report_rebuilds_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = amsqn(&["report", "--input", s(&golden("tiny_sweep.csv"))]);
    assert!(o.status.success());
    let expected = fs::read_to_string(golden("tiny_table.md")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), expected);
    let o = amsqn(&["report", "--input", s(&golden("tiny_sweep.csv")), "--out", s(dir.path())]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(dir.path().join("table.md")).unwrap(), expected);
}

#[test]
fn bench_mu_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = amsqn(&["bench-mu", "--n", "30,60", "--q", "2", "--trials", "1", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("bench_mu.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "n,q,t_alg1,t_dense_eig,t_iter_eig,psd_agree");
    assert_eq!(lines.filter(|l| l.ends_with(",true")).count(), 2);
    assert!(!amsqn(&["bench-mu", "--n", "60,30", "--out", s(dir.path())]).status.success());
}
