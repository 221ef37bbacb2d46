//! Command-line behavior: golden CSV schemas, determinism, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_malsim"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn malsim");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    out
}

#[test]
fn sim_reproduces_the_golden_two_job_run() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        bin()
            .arg("sim")
            .arg(data("data/two_jobs.workload"))
            .args(["--seed", "1"])
            .arg("--config")
            .arg(fixture("configs/zero_overhead.toml"))
            .arg("--out")
            .arg(dir.path()),
    );
    for name in ["trace.csv", "series.csv", "metrics.csv"] {
        let got = fs::read_to_string(dir.path().join(name)).unwrap();
        let want = fs::read_to_string(data("golden").join(name)).unwrap();
        assert_eq!(got, want, "{name} diverged from the golden copy");
    }
}

#[test]
fn profile_prints_reference_parameters() {
    let out = run_ok(bin().arg("profile").arg(fixture("profiles/cg.toml")));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("params: lower=2 preferred=16 upper=32"), "{stdout}");
    assert!(stdout.contains("gain (threshold 10%):"), "{stdout}");
}

#[test]
fn profile_threshold_flag_changes_the_derivation() {
    let out = run_ok(
        bin()
            .arg("profile")
            .arg(fixture("profiles/cg.toml"))
            .args(["--threshold", "20"]),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    // only s(2)=48 and s(4)=24 exceed 20%
    assert!(stdout.contains("params: lower=2 preferred=4 upper=32"), "{stdout}");
}

#[test]
fn profile_with_single_point_fails_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one.toml");
    fs::write(
        &path,
        "name = \"one\"\nreference_iterations = 10\nbytes_per_process = 1\n\n[timings]\n1 = 5.0\n",
    )
    .unwrap();
    let out = bin().arg("profile").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("at least two measured"), "{stderr}");
}

#[test]
fn malformed_profile_diagnostic_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "name = \"bad\"\nreference_iterations = 10\nbytes_per_process = 1\n\n[timings]\n2 = 10.0\n3 = 8.0\n",
    )
    .unwrap();
    let out = bin().arg("profile").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("timings"), "{stderr}");
}

#[test]
fn gen_is_deterministic_and_respects_the_class() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "num_jobs = 100\nclass = \"fixed\"\n\n[apps]\ncg = 1.0\n",
    )
    .unwrap();
    let a = dir.path().join("a.workload");
    let b = dir.path().join("b.workload");
    for out in [&a, &b] {
        run_ok(bin().arg("gen").arg(&spec).args(["--seed", "9"]).arg("--out").arg(out));
    }
    let text_a = fs::read_to_string(&a).unwrap();
    let text_b = fs::read_to_string(&b).unwrap();
    assert_eq!(text_a, text_b);
    let jobs: Vec<&str> = text_a.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(jobs.len(), 100);
    for line in jobs {
        assert!(line.contains(" cg fixed "), "{line}");
        assert!(line.ends_with(" 32"), "rigid request must be the upper limit: {line}");
    }
}

#[test]
fn gen_without_a_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "num_jobs = 5\nclass = \"fixed\"\n\n[apps]\ncg = 1.0\n").unwrap();
    let out = bin()
        .arg("gen")
        .arg(&spec)
        .arg("--out")
        .arg(dir.path().join("w.workload"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn gen_per_app_override_flags_only_those_apps() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "num_jobs = 60\nclass = \"fixed\"\n\n[apps]\ncg = 0.5\nnbody = 0.5\n",
    )
    .unwrap();
    let out_path = dir.path().join("w.workload");
    run_ok(
        bin()
            .arg("gen")
            .arg(&spec)
            .args(["--seed", "3", "--malleable-apps", "nbody"])
            .arg("--out")
            .arg(&out_path),
    );
    for line in fs::read_to_string(&out_path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
    {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let (app, class) = (fields[2], fields[3]);
        match app {
            "nbody" => assert_eq!(class, "pure_malleable", "{line}"),
            _ => assert_eq!(class, "fixed", "{line}"),
        }
    }
}

#[test]
fn unreadable_workload_is_an_input_error() {
    let out = bin()
        .arg("sim")
        .arg("no/such/file.workload")
        .args(["--seed", "1", "--out", "/tmp/malsim-nope"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_writes_the_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(
        &spec,
        "num_jobs = 40\narrival_mean_s = 20.0\nclass = \"flexible\"\n\n[apps]\ncg = 0.5\nhpg = 0.5\n",
    )
    .unwrap();
    let out_dir = dir.path().join("sweep");
    run_ok(
        bin()
            .arg("sweep")
            .arg(&spec)
            .args(["--seed", "11"])
            .arg("--out")
            .arg(&out_dir),
    );
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 5, "{table}");
    assert!(lines[0].starts_with("variant,jobs,makespan_s"));
    for class in ["fixed", "pure_moldable", "pure_malleable", "flexible"] {
        assert!(table.contains(&format!("\n{class},40,")), "{table}");
        assert!(out_dir.join(class).join("trace.csv").exists());
    }
    // the fixed row compares to itself with unit speedups
    let fixed_row = lines.iter().find(|l| l.starts_with("fixed,")).unwrap();
    assert!(fixed_row.contains(",1.0000,"), "{fixed_row}");
}
