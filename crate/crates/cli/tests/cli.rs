use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;
use sisgraphon_cli::config::{parse_config, Experiment};
use sisgraphon_cli::output::read_csv;
use sisgraphon_cli::run::{run, summaries_from_csv};

fn config(text: &str) -> sisgraphon_cli::config::ExperimentConfig {
    parse_config(text, &[], Path::new(".")).unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const HMFA: &str = r#"
experiment = "simulate"
output_dir = "hmfa"
[kernel]
type = "constant"
[params]
beta = 1.0
[simulate]
t_end = 15.0
sample_spacing = 0.05
write_states = true
[simulate.initial]
type = "uniform"
value = 1e-3
"#;

const BLOCK: &str = r#"
output_dir = "block"
[kernel]
type = "block"
weights = [0.2, 0.3, 0.5]
values = [2.0, 0.5, 0.2, 0.5, 1.5, 0.4, 0.2, 0.4, 1.0]
[params]
beta = 1.0
gamma = 0.3
[simulate]
t_end = 10.0
write_states = true
[simulate.initial]
type = "values"
values = [1e-3, 2e-3, 5e-4]
"#;

#[test]
fn hmfa_simulation_follows_logistic() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&config(HMFA), Experiment::Simulate, root.path()).unwrap();
    assert!(out.passed());
    let s = read_csv(&out.dir.join("summary.csv")).unwrap();
    let t = s.column("t").unwrap();
    let p = s.column("prevalence").unwrap();
    assert_eq!(t.len(), 301);
    let c = 1e-3 / (1.0 - 1e-3);
    for (t, p) in t.iter().zip(&p) {
        let logistic = c * t.exp() / (1.0 + c * t.exp());
        assert!((p - logistic).abs() < 1e-7, "t = {t}: {p} vs {logistic}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config(BLOCK);
    let ra = run(&cfg, Experiment::Simulate, a.path()).unwrap();
    let rb = run(&cfg, Experiment::Simulate, b.path()).unwrap();
    assert_eq!(ra.files, rb.files);
    for f in ra
        .files
        .iter()
        .chain(std::iter::once(&"manifest.json".to_string()))
    {
        assert_eq!(
            fs::read(ra.dir.join(f)).unwrap(),
            fs::read(rb.dir.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
}

#[test]
fn states_reproduce_summaries() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&config(BLOCK), Experiment::Simulate, root.path()).unwrap();
    let grid = read_csv(&out.dir.join("grid.csv")).unwrap();
    let states = read_csv(&out.dir.join("states.csv")).unwrap();
    let summary = read_csv(&out.dir.join("summary.csv")).unwrap();
    let recomputed = summaries_from_csv(&grid, &states).unwrap();
    assert_eq!(recomputed.len(), summary.rows.len());
    for (r, row) in recomputed.iter().zip(&summary.rows) {
        assert!((r.0 - row[1]).abs() <= 1e-12);
        assert!((r.1 - row[2]).abs() <= 1e-12);
        assert!((r.2 - row[3]).abs() <= 1e-12);
    }
}

#[test]
fn manifest_records_run() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&config(BLOCK), Experiment::Simulate, root.path()).unwrap();
    let m = manifest(&out.dir);
    assert_eq!(m["experiment"], "simulate");
    assert_eq!(m["status"], "ok");
    assert_eq!(
        m["files"],
        serde_json::json!(["grid.csv", "summary.csv", "states.csv"])
    );
    assert!(m["constants"]["lambda1"].as_f64().unwrap() > 0.0);
    assert!(m["integrator"]["accepted_steps"].as_u64().unwrap() > 0);
    assert!(out.dir.join("timing.json").exists());
}

#[test]
fn chi_curve_on_constant_kernel_is_quadratic() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config("output_dir = \"chi\"\n[kernel]\ntype = \"constant\"\n[params]\nbeta = 1.0\n[chi_curve]\nsamples = 50\n");
    let out = run(&cfg, Experiment::ChiCurve, root.path()).unwrap();
    let t = read_csv(&out.dir.join("chi.csv")).unwrap();
    assert_eq!(t.header, vec!["prevalence", "si_links"]);
    assert_eq!(t.rows.len(), 50);
    for r in &t.rows {
        assert!((r[1] - r[0] * (1.0 - r[0])).abs() < 1e-10);
    }
}

#[test]
fn si_exact_writes_omega() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(
        "output_dir = \"si\"\n[kernel]\ntype = \"power_law\"\nexponent = 0.2\ncells = 200\n[params]\nbeta = 1.0\n[si_exact]\nt_start = -5.0\nt_end = 5.0\nspacing = 0.5\n",
    );
    let out = run(&cfg, Experiment::SiExact, root.path()).unwrap();
    let t = read_csv(&out.dir.join("omega.csv")).unwrap();
    assert_eq!(t.header, vec!["t", "omega", "prevalence"]);
    assert_eq!(t.rows.len(), 21);
    assert!(t
        .rows
        .windows(2)
        .all(|w| w[1][1] > w[0][1] && w[1][2] > w[0][2]));
}

#[test]
fn verify_bounds_passes_on_block_kernel() {
    let root = tempfile::tempdir().unwrap();
    let out = run(&config(BLOCK), Experiment::VerifyBounds, root.path()).unwrap();
    assert!(out.passed(), "{:?}", out.checks);
    let t = fs::read_to_string(out.dir.join("bounds.csv")).unwrap();
    assert!(t.starts_with("check,passed,measured,bound\n"));
}

#[test]
fn binary_reports_every_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(
        &path,
        "bogus = 1\n[kernel]\ntype = \"power_law\"\nexponent = 0.7\ncells = 10\n[params]\nbeta = -1\n",
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sisgraphon"))
        .args(["simulate", "--config"])
        .arg(&path)
        .arg("--output-root")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bogus"), "{err}");
    assert!(err.contains("exponent"), "{err}");
    assert!(err.contains("beta"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn binary_runs_config_experiment_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hmfa.toml");
    fs::write(&path, HMFA).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_sisgraphon"))
        .args(["run", "--config"])
        .arg(&path)
        .args([
            "--set",
            "simulate.t_end=2.0",
            "--set",
            "output_dir=\"short\"",
        ])
        .env("SISGRAPHON_OUTPUT_ROOT", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let s = read_csv(&dir.path().join("short/summary.csv")).unwrap();
    assert_eq!(*s.column("t").unwrap().last().unwrap(), 2.0);
}

#[test]
fn example_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = sisgraphon_cli::config::load_config(&path, &[])
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(cfg.experiment.is_some(), "{}", path.display());
            n += 1;
        }
    }
    assert!(n >= 8);
}
