use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edfluid::config::Config;
use edfluid::export::read_paths;
use edfluid_core::example::ExampleParams;
use edfluid_core::fluid;
use edfluid_core::metrics::replication_metrics;
use edfluid_core::sim::{build_initial_state, run, RandomSource};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn edfluid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edfluid")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn case1() -> String {
    root().join("configs/example_case1.json").display().to_string()
}

#[test]
fn simulate_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edfluid(&["simulate", "--config", &case1(), "--n", "50", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["manifest.json", "summary.json", "events.csv", "paths.csv", "snapshots/index.csv"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
}

#[test]
fn missing_patience_law_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(case1()).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("patience_law");
    std::fs::write(&cfg, v.to_string()).unwrap();
    let o = edfluid(&["simulate", "--config", path(&cfg), "--out", path(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("patience_law"), "{}", stderr(&o));
}

#[test]
fn event_cap_overflow_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edfluid(&["simulate", "--config", &case1(), "--set", "event_cap=10", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("EventOverflow"), "{}", stderr(&o));
}

#[test]
fn fluid_csv_matches_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edfluid(&["fluid", "--config", &case1(), "--grid", "2048", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(tmp.path().join("fluid.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,psi,h,eta,phi,F"));
    let oracle = ExampleParams::new(0.5, 2.0).unwrap().curves(5.0, 2048).unwrap();
    let dt = 5.0 / 2048.0;
    let mut count = 0;
    for (k, line) in lines.enumerate() {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells[0], k as f64 * dt);
        assert!((cells[4] - oracle[k].1).abs() <= 1e-6, "phi at {}", cells[0]);
        assert!((cells[3] - oracle[k].2).abs() <= 1e-6, "eta at {}", cells[0]);
        count += 1;
    }
    assert_eq!(count, 2049);
}

#[test]
fn deterministic_patience_in_overload_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edfluid(&[
        "fluid",
        "--config",
        &case1(),
        "--set",
        r#"patience_law={"kind":"deterministic","value":1.0}"#,
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("AssumptionViolation"), "{}", stderr(&o));
}

#[test]
fn compare_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = root().join("plans/default.json");
    let o = edfluid(&["compare", "--plan", path(&plan), "--out", path(&tmp.path().join("ok"))]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(tmp.path().join("ok/report.json").is_file());
    assert!(tmp.path().join("ok/replications.csv").is_file());

    let strict = tmp.path().join("strict.json");
    let plan_json = serde_json::json!({
        "config": case1(),
        "replications": 2,
        "checks": [{"kind": "final_mean_at_most", "metric": "err_q", "value": 0.0}]
    });
    std::fs::write(&strict, plan_json.to_string()).unwrap();
    let o = edfluid(&["compare", "--plan", path(&strict), "--set", "N_list=[10,20,40]", "--out", path(&tmp.path().join("strict"))]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(tmp.path().join("strict/report.json").is_file());

    let o = edfluid(&[
        "compare",
        "--config",
        path(&strict),
        "--set",
        r#"patience_law={"kind":"deterministic","value":1.0}"#,
        "--out",
        path(&tmp.path().join("det")),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn example_reports_the_case() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path());
    let o = edfluid(&["example", "--mu", "1", "--theta", "0.5", "--out", out]);
    assert!(stdout(&o).contains("case: Case2"));
    let o = edfluid(&["example", "--mu", "0.5", "--theta", "2", "--out", out]);
    assert!(stdout(&o).contains("case: Case1"));
    let o = edfluid(&["example", "--mu", "0.9", "--theta", "0.5", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("case: Case3b"), "{text}");
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!(value("a1") < value("a2"));
    assert!(tmp.path().join("oracle.csv").is_file());

    let o = edfluid(&["example", "--mu", "1.5", "--theta", "0.5", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = edfluid(&["example", "--mu", "0.5", "--theta", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn exported_paths_reproduce_the_queue_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = edfluid(&["simulate", "--config", &case1(), "--n", "200", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let cfg = Config::load(Path::new(&case1()), &[]).unwrap();
    let params = cfg.system_params(200, cfg.seed).unwrap();
    let mut src = RandomSource::new(
        &params,
        cfg.arrival_law.to_spec().unwrap(),
        cfg.service_law.to_spec().unwrap(),
        cfg.patience().unwrap(),
    )
    .unwrap();
    let state = build_initial_state(&cfg.initial_condition().unwrap(), &params, &mut src).unwrap();
    let trace = run(state, &mut src, &cfg.run_config(200).unwrap()).unwrap();
    let sol = fluid::solve(&cfg.fluid_problem(None).unwrap(), Some(0.0)).unwrap();
    let in_process = replication_metrics(&trace, &sol, 0.1).unwrap().err_q;

    let paths = read_paths(&tmp.path().join("paths.csv")).unwrap();
    assert_eq!(paths, trace.paths);
    let from_file = paths.t.iter().zip(&paths.q).map(|(&t, &q)| (q - sol.queue_at(t)).abs()).fold(0.0, f64::max);
    assert_eq!(from_file, in_process);
}
