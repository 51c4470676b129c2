use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vapor-switch"));
    cmd.env_remove("VAPOR_SWITCH_CONFIG");
    cmd
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let idx = reader.headers().unwrap().iter().position(|h| h == name).unwrap();
    reader.records().map(|r| r.unwrap()[idx].parse().unwrap()).collect()
}

const FAST: &[&str] = &[
    "--set",
    "sweep.delta_s.points=21",
    "--set",
    "sweep.delta_c.points=17",
    "--set",
    "sweep.diagonal.points=21",
    "--set",
    "sweep.response.points=41",
];

#[test]
fn response_absorption_matches_index() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[&["response"], FAST].concat(), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let path = dir.path().join("response.csv");
    let n_im = column(&path, "n_im");
    let alpha = column(&path, "alpha_per_m");
    let k = 2.0 * std::f64::consts::PI / 780.241e-9;
    for (a, n) in alpha.iter().zip(&n_im) {
        assert!(*a >= 0.0);
        assert!((a - 2.0 * k * n).abs() <= 1e-9 * a.abs().max(1.0));
    }
}

#[test]
fn empty_vapor_gives_zero_absorption_and_shift() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[&["response", "--set", "cell.number_density_m3=0"], FAST].concat(),
        dir.path(),
    );
    assert!(out.status.success());
    let path = dir.path().join("response.csv");
    assert!(column(&path, "alpha_per_m").iter().all(|&a| a == 0.0));
    assert!(column(&path, "phase_shift_rad").iter().all(|&p| p == 0.0));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in ["sweep2d", "sweep1d", "dynamics", "fit"] {
        for dir in [&a, &b] {
            let out = run(&[&[cmd, "--set", "seed=5"], FAST].concat(), dir.path());
            assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        }
    }
    let mut names: Vec<_> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for expected in [
        "sweep2d_phase.csv",
        "sweep2d_transmission.csv",
        "sweep2d_contours.json",
        "sweep1d.csv",
        "dynamics_2MHz_trace.csv",
        "dynamics_12MHz_metrics.json",
        "fit_nelder_mead.json",
        "fit_grid_refine.json",
        "fit_curve.csv",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected}");
    }
    for name in names {
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs between runs");
    }
}

#[test]
fn trace_and_metrics_formats() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["dynamics", "--set", "pulses.modulation_rates_hz=[4e6]"], dir.path());
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("dynamics_4MHz_trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t_s,transmitted,reflected,control_on");
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dynamics_4MHz_metrics.json")).unwrap()).unwrap();
    for key in [
        "contrast",
        "extinction_db",
        "insertion_loss_db",
        "intracavity_loss",
        "rise_time_s",
        "t_on",
        "t_off",
        "r_on",
    ] {
        assert!(metrics[key].is_number(), "{key}");
    }
}

#[test]
fn config_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{"cavity": {"r1_sq": 0.9, "r2_sq": 0.9, "t1_sq": 0.1, "t2_sq": 0.1, "eta": 1.0}}"#,
    )
    .unwrap();
    let out = bin()
        .arg("cavity-info")
        .env("VAPOR_SWITCH_CONFIG", &config)
        .output()
        .unwrap();
    assert!(out.status.success());
    let info: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f = info["finesse"].as_f64().unwrap();
    assert!((f - std::f64::consts::PI * 0.9f64.sqrt() / 0.1).abs() < 1e-9, "{f}");
    assert!(info["resonant_intracavity_loss"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();

    let out = run(&["cavity-info", "--set", "cavity.eta=1.5"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cavity.eta"));

    let out = run(&["sweep1d", "--set", "cell.temprature_k=300"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cell.temprature_k"));

    let out = run(&["response", "--config", "/nonexistent/run.json"], dir.path());
    assert_eq!(out.status.code(), Some(5));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "detuning_ghz,contrast\n0.1,oops\n").unwrap();
    let out = run(&["fit", "--data", bad.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(5));

    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn capped_fit_writes_results_then_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[&["fit", "--set", "fit.max_iterations=2"], FAST].concat(), dir.path());
    assert_eq!(out.status.code(), Some(6));
    let nm: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fit_nelder_mead.json")).unwrap()).unwrap();
    assert_eq!(nm["converged"], false);
    assert!(dir.path().join("fit_curve.csv").exists());
}
