use std::path::Path;
use std::process::{Command, Output};
use stokes_memory::report::THRESHOLDS;

const BIN: &str = env!("CARGO_BIN_EXE_stokes-memory");

fn run(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).env_remove("STOKES_MEMORY_OUTPUT_DIR");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut full = vec!["--output-dir", dir.to_str().unwrap()];
    full.extend_from_slice(args);
    run(&full, &[])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn scan_writes_csv_and_summary() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["scan"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("M,initial_norm_sq,"));
    assert_eq!(csv.lines().count(), 34);
    assert!(!csv.contains('\r'));
    let s = summary(d.path());
    for key in ["config", "slopes", "thresholds", "verdicts", "version", "violated_constant_growth"] {
        assert!(s.get(key).is_some(), "missing {key}");
    }
    for (k, v) in s["verdicts"].as_object().unwrap() {
        assert_eq!(v, &serde_json::Value::Bool(true), "verdict {k}");
    }
    assert_eq!(s["config"]["M_min"], 24);
}

#[test]
fn thresholds_section_mirrors_constants() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["scan"]).status.code(), Some(0));
    let t = &summary(d.path())["thresholds"];
    let want = serde_json::to_value(THRESHOLDS).unwrap();
    assert_eq!(t, &want);
    assert_eq!(t["initial_norm_slope_min"], -6.6);
    assert_eq!(t["initial_norm_slope_max"], -5.4);
    assert_eq!(t["boundary_weighted_slope_max"], -9.0);
    assert_eq!(t["quotient_slope_min"], 3.4);
    assert_eq!(t["pairing_slope_min"], -4.1);
    assert_eq!(t["pairing_slope_max"], -3.5);
    assert_eq!(t["bound_slope_max"], -4.6);
}

#[test]
fn negative_memory_rate_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["--a", "-1", "scan"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a:"), "{}", stderr(&o));
}

#[test]
fn packet_below_admissible_index_exits_4() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["--b", "400", "packet", "--M", "1"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("n0 = 13"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(run(&["bogus"], &[]).status.code(), Some(2));
}

#[test]
fn too_few_steps_exit_4() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["--steps", "10", "simulate"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("steps"));
}

#[test]
fn empty_packet_range_is_fine() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["--M-min", "30", "--M-max", "29", "packet"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("packet.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        for cmd in ["scan", "packet", "eigs3d"] {
            assert_eq!(run_in(d.path(), &[cmd]).status.code(), Some(0));
        }
    }
    for f in ["scan.csv", "packet.csv", "packet_scan.csv", "eigs3d.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
    // the summaries differ only in the embedded output directory
    let (mut x, mut y) = (summary(a.path()), summary(b.path()));
    x["config"]["output_dir"] = serde_json::Value::Null;
    y["config"]["output_dir"] = serde_json::Value::Null;
    assert_eq!(x, y);
}

#[test]
fn thread_count_does_not_change_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run_in(a.path(), &["--threads", "1", "scan"]).status.code(), Some(0));
    assert_eq!(run_in(b.path(), &["--threads", "4", "scan"]).status.code(), Some(0));
    assert_eq!(
        std::fs::read(a.path().join("scan.csv")).unwrap(),
        std::fs::read(b.path().join("scan.csv")).unwrap()
    );
}

#[test]
fn output_directory_precedence() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let o = run(&["eigs3d"], &[("STOKES_MEMORY_OUTPUT_DIR", env_dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.path().join("eigs3d.csv").exists());
    let o = run(
        &["--output-dir", flag_dir.path().to_str().unwrap(), "eigs2d"],
        &[("STOKES_MEMORY_OUTPUT_DIR", env_dir.path())],
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_dir.path().join("eigs2d.csv").exists());
    assert!(!env_dir.path().join("eigs2d.csv").exists());
}

#[test]
fn config_file_is_read_and_flags_win() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "M_min = 26\nM_max = 40\nb = 1.0\n[tolerances]\nduality = 1e-7\n").unwrap();
    let o = run_in(d.path(), &["--config", cfg.to_str().unwrap(), "--M-max", "36", "scan"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(d.path());
    assert_eq!(s["config"]["M_min"], 26);
    assert_eq!(s["config"]["M_max"], 36);
    let csv = std::fs::read_to_string(d.path().join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn unknown_config_key_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "radius = 2.0\n").unwrap();
    let o = run_in(d.path(), &["--config", cfg.to_str().unwrap(), "scan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn plane_scan_reports_no_verdicts() {
    let d = tempfile::tempdir().unwrap();
    let o = run_in(d.path(), &["--dimension", "2", "--n-max", "200", "--M-min", "10", "--M-max", "20", "scan"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(summary(d.path())["verdicts"].is_null());
}
