use std::path::Path;
use std::process::{Command, Output};

fn fbshift(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbshift"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_flags_and_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for flag in ["--config", "--set", "--out", "--horizon", "--tol", "--quiet"] {
        assert!(text.contains(flag), "help is missing {flag}");
    }
    for cmd in ["semiwave", "profile", "lstar", "simulate", "classify", "sigma-crit", "sweep", "verify"] {
        assert!(text.contains(cmd), "help is missing {cmd}");
    }
}

#[test]
fn usage_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fbshift(&["semiwave", "--bogus"], dir.path()).status.code(), Some(3));
    assert_eq!(fbshift(&["nonsense"], dir.path()).status.code(), Some(3));
    assert_eq!(fbshift(&["simulate", "--horizon", "abc"], dir.path()).status.code(), Some(3));
}

#[test]
fn bad_parameters_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(&["simulate", "--set", "dt0=-1"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("dt0"));
    assert_eq!(fbshift(&["semiwave", "--set", "d=-1"], dir.path()).status.code(), Some(1));
    assert_eq!(fbshift(&["semiwave", "--set", "unknown_key=1"], dir.path()).status.code(), Some(1));
    assert_eq!(fbshift(&["lstar", "--set", "c=0.5"], dir.path()).status.code(), Some(1));
}

#[test]
fn semiwave_writes_profile() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(&["semiwave"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("c0 = ")).unwrap().to_string();
    let c0: f64 = line[5..].parse().unwrap();
    assert!((c0 - 0.3643707237).abs() < 1e-8);
    let csv = std::fs::read_to_string(dir.path().join("semiwave.csv")).unwrap();
    assert!(csv.starts_with("xi,q\n"));
    assert!(csv.lines().count() > 100);
}

#[test]
fn sigma_crit_above_c0_is_infinite_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(&["sigma-crit", "--set", "c=10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("SigmaInfinite"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("sigma_infinite"));
}

#[test]
fn config_file_matches_set_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"c": 0.25, "grid_spacing": 0.01}"#).unwrap();
    let a = fbshift(&["lstar", "--config", cfg.to_str().unwrap()], &dir.path().join("a"));
    let b = fbshift(&["lstar", "--set", "c=0.25", "--set", "grid_spacing=0.01"], &dir.path().join("b"));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(stdout(&a).lines().next(), stdout(&b).lines().next());
}

#[test]
fn irrelevant_keys_are_noted_unless_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(&["semiwave", "--set", "sigma=2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("'sigma' is ignored"));
    let o = fbshift(&["semiwave", "--set", "sigma=2", "--quiet"], dir.path());
    assert!(stderr(&o).is_empty());
}

#[test]
fn simulate_and_classify_write_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(
        &["simulate", "--horizon", "2", "--set", "snapshot_times=1", "--set", "n_nodes=200"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("series.csv").exists());
    assert!(dir.path().join("snapshot-t1.csv").exists());

    let o = fbshift(
        &["classify", "--horizon", "20", "--set", "sigma=0.02", "--set", "n_nodes=200"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("outcome = vanishing"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(manifest.contains("\"vanishing\""));
}

#[test]
fn sweep_writes_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbshift(
        &[
            "sweep",
            "--horizon",
            "20",
            "--set",
            "sweep_c=0.1,0.5",
            "--set",
            "sweep_sigma=0.02",
            "--set",
            "n_nodes=200",
            "--quiet",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let agg = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert_eq!(agg, "c,mu,sigma,outcome\n0.1,1,0.02,vanishing\n0.5,1,0.02,vanishing\n");
    assert!(dir.path().join("manifest-1.json").exists());
}
