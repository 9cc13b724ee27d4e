use std::path::Path;
use std::process::{Command, Output};

fn diffpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffpm")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn complexity_with_defaults() {
    let o = diffpm(&["complexity"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("cpm"));
    assert_eq!(out.lines().filter(|l| l.starts_with("dpmd-system1")).count(), 9);
    assert_eq!(out.lines().filter(|l| l.starts_with("dpmd-system2")).count(), 4);
    assert!(out.contains("1.527962e6"), "{out}");
}

#[test]
fn compare_single_node_reports_zero_delta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "n1.toml",
        r#"
        step_size = "auto"
        iterations = 300
        monte_carlo_runs = 4
        [geometry]
        n_speakers = 4
        grid_size = 2
        [system.custom]
        nodes = [{ mics = [0, 1, 2, 3, 4, 5, 6, 7], speakers = [0, 1, 2, 3] }]
        "#,
    );
    let out_dir = dir.path().join("out");
    let o = diffpm(&["compare", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("dpmd-custom")).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(&fields[3..], &["0.00", "0.00"], "{line}");
    assert!(out_dir.join("sweep.csv").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "step_size = \"auto\"\niterations = 50\nmonte_carlo_runs = 2\nseed = 1\n");
    let run = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = diffpm(&["run", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        std::fs::read(out.join("learning_curves.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "a"), run("2", "c"));
}

#[test]
fn jobs_env_var_is_honoured_and_harmless() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "j.toml", "step_size = \"auto\"\niterations = 50\nmonte_carlo_runs = 9\n");
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_diffpm"))
            .args(["run", &cfg, "--out", out.to_str().unwrap()])
            .env("DIFFPM_JOBS", jobs)
            .output()
            .unwrap();
        assert!(o.status.success());
        std::fs::read(out.join("learning_curves.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("3", "b"));
    let o = Command::new(env!("CARGO_BIN_EXE_diffpm"))
        .args(["run", &cfg])
        .env("DIFFPM_JOBS", "0")
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn bad_input_exits_nonzero_with_diagnostic() {
    let o = diffpm(&["bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = diffpm(&["run", "--frobnicate", "x.toml"]);
    assert!(!o.status.success());

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "iterations = 0\n");
    let o = diffpm(&["run", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("iterations"));
    let o = diffpm(&["run", "/nonexistent/config.toml"]);
    assert!(!o.status.success());
}

#[test]
fn export_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let atf = dir.path().join("atf.bin");
    let cfg = write(dir.path(), "e.toml", "frequencies = [500.0, 1000.0]\n");
    let o = diffpm(&["export-atf", &cfg, "--output", atf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_cfg = write(
        dir.path(),
        "f.toml",
        &format!(
            "atf_backend = \"file\"\natf_file = {:?}\nstep_size = \"auto\"\niterations = 50\nmonte_carlo_runs = 2\nfrequencies = [500.0, 1000.0]\n",
            atf.to_str().unwrap()
        ),
    );
    let out = dir.path().join("out");
    let o = diffpm(&["sweep", &run_cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 3);
}
