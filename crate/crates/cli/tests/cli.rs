use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermospec"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn entropy_smoke_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bundled("schottky_entropy.toml");
    let out = run(&["entropy", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&dir.path().join("entropy.json"));
    assert_eq!(report["command"], "entropy");
    let call = &report["calls"][1];
    assert_eq!(call["estimator"], "entropy");
    let value = call["result"]["value"].as_f64().unwrap();
    let conv = call["result"]["convergence"].as_f64().unwrap();
    // lambda = 9: slope near 1.29 (cross-checked by the Poincare exponent)
    assert!((1.2..1.4).contains(&value), "{value}");
    assert!(conv.is_finite() && conv >= 0.0);
    let csv = fs::read_to_string(dir.path().join("entropy.csv")).unwrap();
    assert!(csv.starts_with("T,per_cutoff,window_fit\n"));
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(dir.path().join("spectrum.cache").exists());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[group]\nkind = \"free\"\nrank = 2\n\n[representation]\nbuilder = \"schottky-default\"\nlamda = 9.0\n",
    )
    .unwrap();
    let out = run(&["entropy", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lamda"), "{err}");
    assert!(!dir.path().join("entropy.json").exists());
}

#[test]
fn bad_value_and_missing_config_fail() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        "[group]\nkind = \"free\"\nrank = 2\n[representation]\nbuilder = \"schottky-default\"\nlambda = 9.0\n[spectrum]\nkind = \"lengthy\"\n",
    )
    .unwrap();
    let out = run(&["spectrum", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectrum.kind"));
    let out = run(&["entropy", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn artifacts_identical_across_thread_counts() {
    let cfg = bundled("schottky_tau3_pressure_form.toml");
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        for cmd in ["entropy", "pressure-form"] {
            let out = run(&[
                cmd,
                "--config",
                cfg.to_str().unwrap(),
                "--threads",
                threads,
                "--seed",
                "42",
                "--out",
                dir.path().to_str().unwrap(),
            ]);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        outputs.push(files(dir.path()));
    }
    assert_eq!(outputs[0].len(), 4);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn seed_changes_random_representation() {
    let cfg = bundled("schottky_tau3_pressure_form.toml");
    let mut caches = Vec::new();
    for seed in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[
            "spectrum",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success());
        caches.push(fs::read(dir.path().join("spectrum.cache")).unwrap());
    }
    assert_ne!(caches[0], caches[1]);
}

#[test]
fn rigidity_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["rigidity-suite", "--threads", "4", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    println!("{stdout}");
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 14);
    let report = json(&dir.path().join("rigidity_suite.json"));
    assert_eq!(report["passed"], true);
}
