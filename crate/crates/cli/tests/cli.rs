use std::path::Path;
use std::process::{Command, Output};

use btgd_core::experiments::SweepReport;
use btgd_core::tracefile::TraceFile;
use btgd_core::StopReason;

fn btgd(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_btgd"));
    cmd.args(args);
    if let Some(p) = out {
        cmd.arg("--out").arg(p);
    }
    cmd.output().expect("spawn btgd")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_double_well_to_local_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let o = btgd(&["run", "--objective", "double_well", "run.x0=0.6,0.3"], Some(&out));
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let t = TraceFile::parse(&text).unwrap();
    assert_eq!(t.footer.stop_reason, StopReason::GradientTolerance);
    assert_eq!(t.footer.terminal_class.as_deref(), Some("LocalMinimumLike"));
    assert_eq!(t.header.objective, "double_well");
    assert_eq!(t.header.config.get("run.x0").map(String::as_str), Some("0.6,0.3"));
    assert!(text.lines().last().unwrap().contains("\"stop_reason\":\"GradientTolerance\""));
    let last = t.records.last().unwrap();
    assert!((last.x[0] - 1.0).abs() < 1e-8 && last.x[1].abs() < 1e-8);
}

#[test]
fn run_from_critical_point_has_one_record() {
    let o = btgd(&["run", "run.x0=0,0"], None);
    assert_eq!(o.status.code(), Some(0));
    let t = TraceFile::parse(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(t.records.len(), 1);
    assert_eq!(t.footer.terminal_class.as_deref(), Some("Saddle"));
}

#[test]
fn config_errors_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    for args in [
        vec!["run", "run.x0=1,1", "rule.alpha=abc"],
        vec!["run", "run.x0=1,1", "rule.bogus=1"],
        vec!["run", "run.x0=1"],
        vec!["run"],
        vec!["run", "run.x0=1,1", "--objective", "nope"],
        vec!["run", "run.x0=1,1", "--rule", "nope"],
        vec!["run", "run.x0=1,1", "objective.zeta=3"],
    ] {
        let o = btgd(&args, Some(&out));
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!out.exists(), "{args:?}");
    }
    let o = btgd(&["frobnicate"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn step_collapse_exits_3_and_keeps_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let o = btgd(&["run", "run.x0=2,0", "rule.max_halvings=1"], Some(&out));
    assert_eq!(o.status.code(), Some(3));
    let t = TraceFile::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t.footer.stop_reason, StopReason::StepCollapse);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        "# sweep setup\nobjective.name = quadratic_form\nrule.name = nag_bt\nsweep.lower = -1,-1\nsweep.upper = 1,1\nsweep.n_runs = 5\nseed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("s.json");
    let o = btgd(
        &["sweep", "--config", cfg.to_str().unwrap(), "--seed", "11", "sweep.n_runs=1"],
        Some(&out),
    );
    assert_eq!(o.status.code(), Some(0));
    let r = SweepReport::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r.seed, 11);
    assert_eq!(r.n_runs, 1);
    assert_eq!(r.counts.values().sum::<usize>(), 1);
    assert_eq!(r.config.rule.name, "nag_bt");
    let doc = json(&out);
    assert_eq!(doc["effective_config"]["seed"], "11");
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "objective,rule,n_runs,saddle_hits,diverged,nonconverged,basins,seed"
    );
    assert_eq!(csv.lines().nth(1).unwrap(), "quadratic_form,nag_bt,1,0,0,0,1,11");
}

#[test]
fn sweep_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--seed", "42", "sweep.lower=-2,-2", "sweep.upper=2,2", "sweep.n_runs=200"];
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(btgd(&args, Some(&a)).status.code(), Some(0));
    assert_eq!(btgd(&args, Some(&b)).status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let csv = std::fs::read_to_string(a.with_extension("csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("double_well,backtracking,200,0,"));
}

#[test]
fn pou_on_quadratic_and_axis_crossing_box() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let o = btgd(
        &[
            "pou",
            "--objective",
            "quadratic_form",
            "pou.lower=-1,-1",
            "pou.upper=1,1",
            "pou.spacing=0.5",
            "pou.mode=faithful",
            "pou.samples=2000",
            "pou.pairs=2000",
        ],
        Some(&out),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("mode=faithful"));
    for name in ["range", "armijo", "partition", "injectivity"] {
        assert!(stdout.contains(&format!("PASS {name}")), "{stdout}");
    }
    let doc = json(&out);
    assert_eq!(doc["schema"], "smoothrate/1");
    assert_eq!(doc["mode"], "faithful");
    assert_eq!(doc["passed"], true);
    let sr = btgd_core::smoothrate::SmoothRate::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(sr.covering.len(), 25);

    let bad = dir.path().join("bad.json");
    let o = btgd(
        &["pou", "--objective", "example1", "pou.lower=-0.5,0.5", "pou.upper=2,2"],
        Some(&bad),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!bad.exists());
}

#[test]
fn verify_suites() {
    let o = btgd(&["verify", "verify.samples=200"], None);
    assert_eq!(o.status.code(), Some(0));
    let stderr = String::from_utf8(o.stderr).unwrap();
    for s in ["gradient", "hessian", "armijo", "delta_hat", "descent_lemma"] {
        assert!(stderr.contains(&format!("PASS {s} ")), "{stderr}");
    }
    assert_eq!(btgd(&["verify", "verify.suites=armijo,bogus"], None).status.code(), Some(2));
    let o = btgd(&["verify", "verify.suites=delta_hat", "verify.samples=0"], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stderr).unwrap().contains("0 samples"));
}

#[test]
fn classify_points() {
    let o = btgd(&["classify", "classify.x=1,0"], None);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["class"]["kind"], "LocalMinimumLike");
    let o = btgd(&["classify", "--objective", "example1", "classify.x=0,0"], None);
    assert_eq!(o.status.code(), Some(2));
}
