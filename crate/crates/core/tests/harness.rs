use std::fs;
use std::path::Path;
use std::process::Command;

use bicx::harness::*;
use bicx::priors::ArmPrior;

const MINIMAL: &str = r#"
algorithm = "alg1"
n = 1

[instance]
kind = "iid"
k = 2
prior = { kind = "beta", a = 1.0, b = 1.0 }

[seeds]
master = 7
replicas = 100

[audit]
method = "none"
"#;

const SMALL_EXACT: &str = r#"
algorithm = "thompson"
horizon = 3
trace_limit = 5

[instance]
kind = "arms"
arms = [
  { kind = "atoms", support = [[0.2, 0.5], [0.8, 0.5]] },
  { kind = "atoms", support = [[0.3, 0.5], [0.7, 0.5]] },
]

[seeds]
master = 1
replicas = 200

[audit]
method = "exact"
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn minimal_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", MINIMAL)).unwrap();
    let out = tmp.path().join("out");
    let s = run_experiment(&cfg, Some(&out)).unwrap();
    for f in [
        "params.json",
        "schedule.json",
        "bic_report.csv",
        "summary.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 100);
    assert!(out.join("traces/run_00000.csv").is_file());
    assert_eq!(s.replicas, 100);
    assert_eq!(s.runs_meeting_n, 100);
    assert!(s.min_pulls.iter().all(|&p| p >= 1));
    assert_eq!(s.total_rounds as u64, s.schedule_rounds);
    assert!(s.audit.is_none());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["master_seed"], 7);
    assert!(summary["version"].is_string());
    assert_eq!(summary["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", SMALL_EXACT)).unwrap();
    let out = tmp.path().join("out");
    run_experiment(&cfg, Some(&out)).unwrap();
    let files = [
        "summary.json",
        "bic_report.csv",
        "params.json",
        "schedule.json",
        "traces/run_00004.csv",
    ];
    let first: Vec<Vec<u8>> = files
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    run_experiment(&cfg, Some(&out)).unwrap();
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&fs::read(out.join(f)).unwrap(), bytes, "{f} changed");
    }
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 5);
}

#[test]
fn exact_audit_is_summarized() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", SMALL_EXACT)).unwrap();
    let s = run_experiment(&cfg, Some(&tmp.path().join("out"))).unwrap();
    let a = s.audit.unwrap();
    assert!(a.passed);
    assert!(a.min_margin >= bicx::audit::MARGIN_FLOOR);
    let csv = fs::read_to_string(tmp.path().join("out/bic_report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
}

#[test]
fn invalid_prior_file_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "arms.json",
        r#"{"arms": [{"kind": "beta", "a": 0.0, "b": 1.0}]}"#,
    );
    let cfg_text =
        "algorithm = \"alg1\"\nn = 1\n[instance]\nkind = \"file\"\npath = \"arms.json\"\n";
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", cfg_text)).unwrap();
    let out = tmp.path().join("out");
    let err = run_experiment(&cfg, Some(&out)).unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(!out.exists());
    let left: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(left.len(), 2, "{left:?}");
}

#[test]
fn unsorted_arms_are_rejected() {
    let arms = vec![
        ArmPrior::beta(1.0, 2.0).unwrap(),
        ArmPrior::beta(2.0, 1.0).unwrap(),
    ];
    let cfg = ExperimentConfig::new(InstanceSpec::Arms { arms }, AlgorithmSpec::Alg1);
    assert!(matches!(
        cfg.build_instance(),
        Err(bicx::Error::InvalidInstance(_))
    ));
}

#[test]
fn config_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        MINIMAL.replace("replicas = 100", "replicas = 0"),
        MINIMAL.replace("method = \"none\"", "method = \"mc\"\nreplicas = 50"),
        MINIMAL.replace("[audit]", "[constants]\nc_pad = -1.0\n[audit]"),
        MINIMAL.replace("algorithm = \"alg1\"", "algorithm = \"thompson\""),
        MINIMAL.replace("kind = \"iid\"", "kind = \"file\"\npath = \"missing.json\""),
        MINIMAL.replace("algorithm = \"alg1\"", "algorithm = \"alg9\""),
    ];
    for (i, text) in bad.iter().enumerate() {
        let p = write(tmp.path(), &format!("bad{i}.toml"), text);
        let err = ExperimentConfig::from_path(&p).unwrap_err();
        assert!(matches!(err, bicx::Error::Config(_)), "case {i}: {err}");
    }
    assert!(matches!(
        ExperimentConfig::from_path(&tmp.path().join("absent.toml")),
        Err(bicx::Error::Io { .. })
    ));
}

#[test]
fn json_configs_are_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", MINIMAL)).unwrap();
    let json = serde_json::to_string(&cfg).unwrap();
    let again = ExperimentConfig::from_path(&write(tmp.path(), "run.json", &json)).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn golden_headers() {
    assert_eq!(TRACE_HEADER.join(","), "t,phase,label,action,arm,reward");
    assert_eq!(
        SWEEP_HEADER.join(","),
        "axis,value,k,n,rounds_budget,main_lb,n_boot,p_boot,g_pad,n_pad,n_ts,easy,hard,error"
    );
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_path(&write(tmp.path(), "run.toml", SMALL_EXACT)).unwrap();
    let out = tmp.path().join("out");
    run_experiment(&cfg, Some(&out)).unwrap();
    assert_eq!(first_line(&out.join("bic_report.csv")), "t,k,j,margin,se");
    assert_eq!(
        first_line(&out.join("traces/run_00000.csv")),
        TRACE_HEADER.join(",")
    );
    let trace = fs::read_to_string(out.join("traces/run_00000.csv")).unwrap();
    let row: Vec<&str> = trace.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[..3], ["1", "1", "thompson"]);
}

fn pair_template() -> ExperimentConfig {
    ExperimentConfig::new(InstanceSpec::BetaPair { m: 2.0 }, AlgorithmSpec::Alg1)
}

#[test]
fn sweep_over_pair_strength() {
    let rows = sweep(&pair_template(), Axis::M, &[2.0, 3.0, 4.0, 5.0]);
    let n_boot: Vec<_> = rows.iter().map(|r| r.n_boot).collect();
    assert_eq!(n_boot, vec![Some(4), Some(9), Some(16), Some(25)]);
    assert!(rows
        .iter()
        .all(|r| r.error.is_none() && r.rounds_budget.is_some()));
}

#[test]
fn failing_cells_keep_their_row() {
    let rows = sweep(&pair_template(), Axis::M, &[2.0, 0.0, 3.0]);
    assert_eq!(rows.len(), 3);
    assert!(rows[1].error.is_some());
    assert!(rows[0].error.is_none() && rows[2].error.is_none());
    let mut buf = Vec::new();
    write_sweep_csv(Axis::M, &rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(2).unwrap().starts_with("M,0,"));
}

#[test]
fn sweep_over_k_grows() {
    let tmpl = ExperimentConfig::new(
        InstanceSpec::Iid {
            prior: ArmPrior::beta(1.0, 1.0).unwrap(),
            k: 2,
        },
        AlgorithmSpec::Alg1,
    );
    let rows = sweep(&tmpl, Axis::K, &[2.0, 4.0, 8.0]);
    let b: Vec<u64> = rows.iter().map(|r| r.rounds_budget.unwrap()).collect();
    assert!(b.windows(2).all(|w| w[1] > w[0]), "{b:?}");
    assert_eq!(
        rows.iter().map(|r| r.k).collect::<Vec<_>>(),
        vec![Some(2), Some(4), Some(8)]
    );
}

#[test]
fn sweep_over_n_is_linear() {
    let tmpl = ExperimentConfig::new(
        InstanceSpec::Iid {
            prior: ArmPrior::beta(1.0, 1.0).unwrap(),
            k: 2,
        },
        AlgorithmSpec::Alg1,
    );
    let rows = sweep(&tmpl, Axis::N, &[100.0, 200.0, 400.0]);
    for w in rows.windows(2) {
        let (a, b) = (w[0].rounds_budget.unwrap(), w[1].rounds_budget.unwrap());
        let n = w[0].n.unwrap() as u64;
        assert!(b >= a + 3 * n);
        assert_eq!(b, 2 * a);
    }
}

fn bicx(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bicx"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write(tmp.path(), "good.toml", SMALL_EXACT);
    let (code, stdout) = bicx(&["explore-set", "--config", good.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("explorable"));
    let (code, stdout) = bicx(&["audit", "--config", good.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("t,k,j,margin,se"));

    let bad = write(
        tmp.path(),
        "bad.toml",
        &MINIMAL.replace("replicas = 100", "replicas = 0"),
    );
    assert_eq!(bicx(&["run", "--config", bad.to_str().unwrap()]).0, 2);

    let unequal = SMALL_EXACT
        .replace("[0.3, 0.5], [0.7, 0.5]", "[0.1, 0.5], [0.7, 0.5]")
        .replace("horizon = 3", "horizon = 1");
    let failing = write(tmp.path(), "fail.toml", &unequal);
    assert_eq!(bicx(&["audit", "--config", failing.to_str().unwrap()]).0, 3);
    let out = tmp.path().join("out");
    assert_eq!(
        bicx(&[
            "run",
            "--config",
            failing.to_str().unwrap(),
            "--out",
            out.to_str().unwrap()
        ])
        .0,
        3
    );
}

#[test]
fn cli_params_and_game() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = write(
        tmp.path(),
        "pair.json",
        r#"{"kind": "beta-pair", "m": 3.0}"#,
    );
    let (code, stdout) = bicx(&["params", "--instance", inst.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["n_boot"], 9);
    let uniform = write(
        tmp.path(),
        "uniform.json",
        r#"{"arms": [{"kind": "beta", "a": 1.0, "b": 1.0}, {"kind": "beta", "a": 1.0, "b": 1.0}]}"#,
    );
    let (code, stdout) = bicx(&[
        "game-solve",
        "--instance",
        uniform.to_str().unwrap(),
        "--arm",
        "2",
        "--depth",
        "1",
    ]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("0.0833333"), "{stdout}");
    assert_eq!(
        bicx(&[
            "game-solve",
            "--instance",
            uniform.to_str().unwrap(),
            "--arm",
            "0",
            "--depth",
            "1"
        ])
        .0,
        2
    );
}
