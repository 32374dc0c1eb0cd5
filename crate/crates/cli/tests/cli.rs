use std::process::{Command, Output};

use dyntopo::driver::RunConfig;

fn dyntopo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyntopo"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 8] = [
    "--set",
    "case.nelx=20",
    "--set",
    "case.nely=10",
    "--set",
    "run.evaluate=false",
    "--set",
    "run.timings=false",
];

#[test]
fn printed_preset_parses_back() {
    for name in ["cantilever_hole", "bridge", "box3d"] {
        let out = dyntopo(&["preset", name, "--print-config"]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg.case.name(), name);
    }
    let list = dyntopo(&["preset", "--list"]);
    assert_eq!(String::from_utf8(list.stdout).unwrap().lines().count(), 3);
    assert_eq!(dyntopo(&["preset", "hook", "--print-config"]).status.code(), Some(1));
}

#[test]
fn converged_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let mut args = vec![
        "run",
        "cantilever_hole",
        "--tol-dy",
        "1",
        "--set",
        "run.require_final_stage=false",
    ];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(&["--output", out_dir.to_str().unwrap()]);
    let out = dyntopo(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("iterations: 1"));
    for f in [
        "iterations.csv",
        "spectrum.csv",
        "summary.txt",
        "density_final.txt",
        "density_final.pgm",
        "config.toml",
    ] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    // the written config reproduces the run
    let cfg = RunConfig::load(&out_dir.join("config.toml")).unwrap();
    assert_eq!(cfg.run.tol_dy, 1.0);
}

#[test]
fn iteration_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let text = "[case]\npreset = \"cantilever_hole\"\nnelx = 20\nnely = 10\n[run]\nmax_iter = 1\nevaluate = false\n";
    std::fs::write(&path, text).unwrap();
    let out = dyntopo(&["run", path.to_str().unwrap(), "--tol-dy", "1e-9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn errors_exit_one() {
    assert_eq!(dyntopo(&["run", "no/such/file.toml"]).status.code(), Some(1));
    assert_eq!(
        dyntopo(&["run", "bridge", "--set", "run.tol_dy=-1"]).status.code(),
        Some(1)
    );
    assert_eq!(
        dyntopo(&["run", "bridge", "--set", "opt.nonsense=1"]).status.code(),
        Some(1)
    );
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "compare",
        "cantilever",
        "--max-iter",
        "2",
        "--tol-dy",
        "1e-9",
        "--ladder",
        "24x12,32x16",
    ];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(&["-o", dir.path().to_str().unwrap()]);
    let out = dyntopo(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("factorizations: full 2"));
    let csv = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let ladder = std::fs::read_to_string(dir.path().join("ladder.csv")).unwrap();
    assert_eq!(ladder.lines().count(), 3);
}
