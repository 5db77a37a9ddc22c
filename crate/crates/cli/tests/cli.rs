use std::path::Path;
use std::process::{Command, Output};

fn mfaoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfaoi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(str::to_string)
        .collect()
}

fn calibrate(dir: &Path, name: &str, trials: &str) -> std::path::PathBuf {
    let out = dir.join(name);
    let res = mfaoi(&[
        "calibrate",
        "--trials",
        trials,
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    out
}

#[test]
fn calibrate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = calibrate(dir.path(), "a.csv", "20000");
    let b = calibrate(dir.path(), "b.csv", "20000");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let text = std::fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("# seed=7\n# cfg_digest="));
}

#[test]
fn sweep_writes_one_row_per_multiplier() {
    let dir = tempfile::tempdir().unwrap();
    let table = calibrate(dir.path(), "t.csv", "1000");
    let out = dir.path().join("pareto.csv");
    let res = mfaoi(&[
        "sweep",
        "--table",
        table.to_str().unwrap(),
        "--eta-min",
        "1e-3",
        "--eta-max",
        "1e2",
        "--eta-points",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\neta,lambda_star,avg_aoi,avg_energy,rho,converged\n"));
    assert_eq!(data_rows(&out).len(), 20);
}

#[test]
fn solve_baseline_and_validate_produce_output() {
    let dir = tempfile::tempdir().unwrap();
    let table = calibrate(dir.path(), "t.csv", "500");
    let t = table.to_str().unwrap();

    let res = mfaoi(&["solve", "--table", t, "--eta", "50"]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("[policy]\ndelta,d,q,V\n"));
    assert!(text.contains("lambda_star="));

    let out = dir.path().join("base.csv");
    let res = mfaoi(&[
        "baseline",
        "--table",
        t,
        "--energy-points",
        "5",
        "--alpha",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert_eq!(data_rows(&out).len(), 10);

    let res = mfaoi(&[
        "validate", "--table", t, "--eta", "50", "--frames", "2000", "--seed", "3",
    ]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.contains("aoi_gap="));
    assert_eq!(text.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 30);
}

#[test]
fn verify_passes_at_small_truncation() {
    let res = mfaoi(&["verify", "--delta-max", "12"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
}

#[test]
fn failures_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfaoi(&["frobnicate"]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\npools = \"three\"\n").unwrap();
    assert_eq!(
        mfaoi(&["--config", bad.to_str().unwrap(), "verify"]).status.code(),
        Some(2)
    );

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        mfaoi(&["sweep", "--table", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );

    let table = calibrate(dir.path(), "t.csv", "100");
    let res = mfaoi(&["sweep", "--table", table.to_str().unwrap(), "--noise", "1.0"]);
    assert_eq!(res.status.code(), Some(2), "table calibrated for another config");
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 11\nfading = false\n[calibration]\ntrials = 50\nload_max = 4.0\n",
    )
    .unwrap();
    let out = dir.path().join("t.csv");
    let c = cfg.to_str().unwrap();
    let res = mfaoi(&["--config", c, "calibrate", "--out", out.to_str().unwrap()]);
    assert!(res.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# seed=11\n"));
    assert!(
        text.contains("\n0,1,1,1,50\n"),
        "no fading, single transmitter, zero load gives certain capture"
    );
    assert_eq!(data_rows(&out).len(), 3 * 10);

    let res = mfaoi(&["--config", c, "--seed", "12", "calibrate", "--trials", "60"]);
    let text = String::from_utf8(res.stdout).unwrap();
    assert!(text.starts_with("# seed=12\n"));
    assert!(text.contains(",60\n"));
}
