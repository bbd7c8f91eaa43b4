use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use rpflow::output::{read_table, sha256_hex};
use rpflow::run::load_manifest;

const BASE: &str = r#"
experiment = "localization"
n = 250
delta = 0.5
alpha = 0.3
kappa = 0.7
theta = 0.35
gamma = 0.05
ell = 0.25
beta = 0.5
window = [-0.25, 0.25]
density = "uniform"
ensemble = 2
master_seed = 1
"#;

fn rpflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpflow")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn localization_run_is_fast_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", BASE);
    let (a, b, c) = (d.path().join("a"), d.path().join("b"), d.path().join("c"));
    let t0 = Instant::now();
    let out = rpflow(&["run", "--config", &cfg, "--out", s(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(t0.elapsed().as_secs() < 60);
    assert!(rpflow(&["run", "--config", &cfg, "--out", s(&b), "--threads", "1"]).status.success());
    assert!(rpflow(&["run", "--config", &cfg, "--out", s(&c), "--seed", "2"]).status.success());
    let bytes = |p: &Path| std::fs::read(p.join("localization.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
    let m = load_manifest(&a).unwrap();
    assert_eq!(m.outputs[0].sha256, sha256_hex(&bytes(&a)));
    assert_eq!(m.realizations.len(), 2);
    assert_eq!(load_manifest(&c).unwrap().config.master_seed, 2);
    assert!(!read_table(&a.join("localization.csv")).unwrap().is_empty());
}

#[test]
fn validation_failures_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let bad = write_config(d.path(), "bad.toml", &BASE.replace("theta = 0.35", "theta = 0.6"));
    let out = rpflow(&["validate", "--config", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("κ > δ > θ"));
    let out = rpflow(&["run", "--config", &bad, "--out", s(&d.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!d.path().join("x").exists());
    let good = write_config(d.path(), "good.toml", BASE);
    assert_eq!(rpflow(&["validate", "--config", &good]).status.code(), Some(0));
    assert_eq!(rpflow(&["report"]).status.code(), Some(1));
    assert_eq!(rpflow(&["bogus"]).status.code(), Some(1));
}

#[test]
fn all_failed_realizations_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    let text = BASE.replace("\"localization\"", "\"flow-events\"") + "grid_budget = 1\n";
    let cfg = write_config(d.path(), "c.toml", &text);
    let out = rpflow(&["run", "--config", &cfg, "--out", s(&d.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let m = load_manifest(&d.path().join("o")).unwrap();
    assert_eq!(m.failures.len(), 2);
}

#[test]
fn io_failures_exit_with_three() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.toml", BASE);
    std::fs::write(d.path().join("file"), b"x").unwrap();
    let out = rpflow(&["run", "--config", &cfg, "--out", s(&d.path().join("file").join("sub"))]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(rpflow(&["validate", "--config", s(&d.path().join("missing.toml"))]).status.code(), Some(3));
}

#[test]
fn sweep_report_annotates_both_slopes() {
    let d = tempfile::tempdir().unwrap();
    let sweep = BASE.replace("\"localization\"", "\"scaling-sweep\"") + "sizes = [100, 200, 400]\n";
    let high = sweep.replace("delta = 0.5", "delta = 0.8").replace("kappa = 0.7", "kappa = 0.9").replace("theta = 0.35", "theta = 0.6");
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(rpflow(&["run", "--config", &write_config(d.path(), "a.toml", &sweep), "--out", s(&a)]).status.success());
    assert!(rpflow(&["run", "--config", &write_config(d.path(), "b.toml", &high), "--out", s(&b)]).status.success());
    let rep = d.path().join("rep");
    let out = rpflow(&["report", s(&a), s(&b), "--out", s(&rep)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let svg = std::fs::read_to_string(rep.join("scaling.svg")).unwrap();
    assert!(svg.contains("δ = 0.5: slope") && svg.contains("δ = 0.8: slope"));
    let fits = read_table(&rep.join("scaling_fits.csv")).unwrap();
    assert_eq!(fits.iter().filter(|r| r["quantity"] == "ipr").count(), 2);
}

#[test]
fn mixed_runs_are_refused_with_a_diff() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(rpflow(&["run", "--config", &write_config(d.path(), "a.toml", BASE), "--out", s(&a)]).status.success());
    let other = BASE.replace("window = [-0.25, 0.25]", "window = [-0.2, 0.3]");
    assert!(rpflow(&["run", "--config", &write_config(d.path(), "b.toml", &other), "--out", s(&b)]).status.success());
    let out = rpflow(&["report", s(&a), s(&b), "--out", s(&d.path().join("rep"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("window:"), "{err}");
}

#[test]
fn flow_events_trajectory_figure() {
    let d = tempfile::tempdir().unwrap();
    let text = BASE.replace("\"localization\"", "\"flow-events\"").replace("n = 250", "n = 120") + "subsample = 24\npath_steps = 4\n";
    let run = d.path().join("run");
    assert!(rpflow(&["run", "--config", &write_config(d.path(), "c.toml", &text), "--out", s(&run)]).status.success());
    let rows = read_table(&run.join("trajectories.csv")).unwrap();
    assert!(!rows.is_empty());
    let eta = 120f64.powf(-0.7);
    for w in rows.windows(2) {
        if w[0]["run_id"] == w[1]["run_id"] && w[0]["z0_re"] == w[1]["z0_re"] && w[0]["z0_im"] == w[1]["z0_im"] {
            let (a, b): (f64, f64) = (w[0]["xi_im"].parse().unwrap(), w[1]["xi_im"].parse().unwrap());
            assert!(b < a && b >= eta / 2.0 - 1e-3 * eta);
        }
    }
    let rep = d.path().join("rep");
    assert!(rpflow(&["report", s(&run), "--out", s(&rep)]).status.success());
    let svg = std::fs::read_to_string(rep.join("trajectories.svg")).unwrap();
    assert!(svg.contains("η/2"));
}

#[test]
fn every_experiment_and_sample_run() {
    let d = tempfile::tempdir().unwrap();
    let cases = [
        ("subordination", "n = 120", "points = 2\ntracked_sites = 4\n", "subordination.csv"),
        ("concentration", "ensemble = 2", "ensemble = 100\n", "concentration.csv"),
        ("regularity", "n = 250", "sizes = [200, 300]\n", "regularity.csv"),
    ];
    for (exp, from, extra, file) in cases {
        let base = BASE.replace("\"localization\"", &format!("\"{exp}\""));
        let text = if from.starts_with("ensemble") { base.replace(from, "") + extra } else { base.replace(from, "n = 120") + extra };
        let out_dir = d.path().join(exp);
        let o = rpflow(&["run", "--config", &write_config(d.path(), &format!("{exp}.toml"), &text), "--out", s(&out_dir)]);
        assert!(o.status.success(), "{exp}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!read_table(&out_dir.join(file)).unwrap().is_empty());
        assert!(rpflow(&["report", s(&out_dir), "--out", s(&d.path().join(format!("{exp}-rep")))]).status.success());
    }
    let smp = d.path().join("sample");
    assert!(rpflow(&["sample", "--config", &write_config(d.path(), "s.toml", BASE), "--out", s(&smp)]).status.success());
    assert_eq!(read_table(&smp.join("potential.csv")).unwrap().len(), 500);
    assert_eq!(read_table(&smp.join("spectrum.csv")).unwrap().len(), 500);
}
