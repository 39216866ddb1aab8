use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gsav::harness::output::read_snapshot;

const SMALL_RUN: &str = r#"
seed = 9
t_final = 0.05
dt = 1e-2
scheme = "first-bdf2"
g = "tanh:10000"
[model]
kind = "cahn-hilliard"
eps2 = 0.1
[grid]
n = 16
[initial]
kind = "spinodal"
mean = 0.03
amplitude = 0.2
[output]
dir = "small"
snapshot_every = 2
diag_every = 1
"#;

fn gsav(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsav"))
        .args(args)
        .env("GSAV_OUT", out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_diagnostics_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = gsav(tmp.path(), &["run", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("small");
    let csv = fs::read_to_string(dir.join("diag.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,t,dt,E_original,E_modified,mass_0,xi_0,r_0,newton_iters"
    );
    assert_eq!(lines.count(), 6);
    let snap = read_snapshot(&dir.join("snap_00000004_0.bin")).unwrap();
    assert!((snap.t - 0.04).abs() < 1e-12);
    assert_eq!(snap.field.len(), 256);
    assert!(dir.join("manifest.toml").exists());
}

#[test]
fn identical_runs_give_identical_bytes() {
    let read_all = |root: &Path| {
        let mut files: Vec<_> = fs::read_dir(root.join("small"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files.into_iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), SMALL_RUN);
        assert!(gsav(d.path(), &["run", &cfg]).status.success());
    }
    assert_eq!(read_all(a.path()), read_all(b.path()));
}

#[test]
fn zero_final_time_records_only_the_initial_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = gsav(tmp.path(), &["run", &cfg, "--set", "t_final=0.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(tmp.path().join("small/diag.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0e0,"));
}

#[test]
fn bad_input_fails_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    for args in [
        vec!["run", cfg.as_str(), "--set", "scheme=\"first-bdf3\""],
        vec!["run", cfg.as_str(), "--set", "dt=-1.0"],
        vec!["run", cfg.as_str(), "--set", "model.kind=\"nope\""],
        vec!["run", "/nonexistent/config.toml"],
        vec!["run"],
        vec!["converge", cfg.as_str(), "--dts", "1e-3,2e-3"],
    ] {
        let out = gsav(tmp.path(), &args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"), "{args:?}");
    }
}

#[test]
fn converge_prints_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"
t_final = 0.02
dt = 1e-3
scheme = "first-cn"
g = "tanh:10000"
forcing = "manufactured"
[model]
kind = "allen-cahn"
eps2 = 1.0
[grid]
n = 16
[initial]
kind = "manufactured"
[output]
write = false
"#,
    );
    let out = gsav(tmp.path(), &["converge", &cfg, "--dts", "2e-3,1e-3,5e-4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "dt,error,order,max_xi_deviation");
    assert_eq!(rows.len(), 4);
    let order: f64 = rows[3].split(',').nth(2).unwrap().parse().unwrap();
    assert!((order - 2.0).abs() < 0.1, "{table}");
}

#[test]
fn compare_g_reports_every_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = gsav(
        tmp.path(),
        &[
            "compare-g",
            &cfg,
            "--set",
            "output.write=false",
            "--g",
            "tanh:10000",
            "--g",
            "exp:10000",
            "--g",
            "pow:3",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.matches(" vs ").count(), 3);
    assert_eq!(text.matches("modified energy monotone").count(), 3);
}
