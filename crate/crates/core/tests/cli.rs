use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dampwave::cli::{ExperimentConfig, Summary};
use dampwave::resolvent::fit_exponent;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dampwave"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(config: &Path, out: &Path) -> Output {
    bin().arg("run").arg(config).arg("--output").arg(out).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn shipped_configs_round_trip_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let (config, _) = ExperimentConfig::load(&path).unwrap();
        let text = config.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&text, "again").unwrap(), config, "{}", path.display());
        seen += 1;
    }
    assert!(seen >= 8);
}

#[test]
fn list_experiments_names_every_kind() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in ["resolvent-q0", "resolvent-1d", "gcc", "simulate", "quasimode", "sharpness", "regions", "reduce-check"] {
        assert!(text.lines().any(|l| l.starts_with(kind)), "{kind}");
    }
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.toml", "kind = \"simulate\"\noutput = \"x\"\n\ntime.dt = = 1\n");
    let out = run(&path, dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.toml:4:"), "{err}");

    let path = write_config(dir.path(), "neg.toml", "kind = \"simulate\"\noutput = \"x\"\ntime.dt = -1.0\n");
    let out = run(&path, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("neg.toml:3: time.dt"));
}

#[test]
fn invalid_worker_count_is_a_config_error() {
    let out = bin().arg("list-experiments").env("DAMPWAVE_WORKERS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn undamped_simulation_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&configs_dir().join("simulate_undamped.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("energy.csv"));
    let e0: f64 = rows[0][1].parse().unwrap();
    assert!(rows.iter().all(|r| (r[1].parse::<f64>().unwrap() - e0).abs() <= 1e-12 * e0));
    let summary = Summary::read(&dir.path().join("summary.json")).unwrap();
    assert!(summary.passed);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs_dir().join("reduce_check.toml");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&config, &a).status.success());
    let out = bin().arg("run").arg(&config).arg("--output").arg(&b).env("DAMPWAVE_WORKERS", "1").output().unwrap();
    assert!(out.status.success());
    for file in ["reduce.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn q0_summary_is_recomputable_from_the_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&configs_dir().join("q0_negative.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = Summary::read(&dir.path().join("summary.json")).unwrap();
    let exponent = &summary.checks[0];
    assert_eq!(exponent.name, "exponent");
    assert!((exponent.target - 1.0 / 3.0).abs() < 1e-15);
    let rows = read_csv(&dir.path().join("sweep.csv"));
    let (p, v): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r[3] == "1")
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .unzip();
    let fit = fit_exponent(&p, &v, Some((10.0, 160.0))).unwrap();
    assert_eq!(fit.slope, exponent.measured);
    let negative = rows
        .iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .filter(|(mu, _)| *mu <= -1.0)
        .map(|(mu, s)| s / mu.abs())
        .fold(f64::INFINITY, f64::min);
    assert_eq!(negative, summary.checks[1].measured);
}

#[test]
fn unstable_samples_abort_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "q0.toml",
        "kind = \"resolvent-q0\"\noutput = \"x\"\nsweep = { lo = 300.0, hi = 1000.0, count = 5, stability = 1e-12 }\n",
    );
    let out_dir = dir.path().join("out");
    let out = run(&path, &out_dir);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("sweep.csv").exists());
    assert!(!out_dir.join("summary.json").exists());
}

#[test]
fn report_reflects_mixed_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let empty = bin().arg("report").arg(dir.path()).output().unwrap();
    assert!(empty.status.success());
    assert_eq!(String::from_utf8(empty.stdout).unwrap().lines().count(), 1);

    assert!(run(&configs_dir().join("reduce_check.toml"), &dir.path().join("reduce")).status.success());
    assert!(run(&configs_dir().join("regions.toml"), &dir.path().join("regions")).status.success());
    let ok = bin().arg("report").arg(dir.path()).output().unwrap();
    assert!(ok.status.success());
    assert_eq!(String::from_utf8(ok.stdout).unwrap().lines().count(), 3);

    let strict = write_config(
        dir.path(),
        "strict.toml",
        "kind = \"reduce-check\"\noutput = \"x\"\nsampling.count = 3\ncheck.tolerance = 0.0\n",
    );
    let out = run(&strict, &dir.path().join("strict"));
    assert_eq!(out.status.code(), Some(1));
    let mixed = bin().arg("report").arg(dir.path()).output().unwrap();
    assert_eq!(mixed.status.code(), Some(1));
    let text = String::from_utf8(mixed.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("strict") && l.contains("FAIL")));
}
