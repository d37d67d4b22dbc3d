use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn paultrap(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paultrap"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn aq_writes_both_models_and_manifest() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["aq"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let aq = read_json(&dir.path().join("aq.json"));
    assert_eq!(aq["ideal"].as_array().unwrap().len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("aq.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    let manifest = read_json(&dir.path().join("run_manifest.json"));
    assert_eq!(manifest["command"], "aq");
    assert!(manifest["outputs"].as_array().unwrap().iter().any(|v| v == "aq.csv"));
    assert!(std::fs::read_dir(dir.path())
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp-")));
}

#[test]
fn simulate_table_coefficients_reproduces_radial_frequencies() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--threads", "2", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("f_x = "), "{stdout}");
    let peaks = read_json(&dir.path().join("peaks.json"));
    let fx = peaks["x"]["frequency"].as_f64().unwrap();
    let fy = peaks["y"]["frequency"].as_f64().unwrap();
    assert!(rel(fx, 53.5e3) <= 0.03, "f_x = {fx}");
    assert!(rel(fy, 41.73e3) <= 0.03, "f_y = {fy}");
    for axis in ["x", "y", "z"] {
        assert!(dir.path().join(format!("spectrum_{axis}.csv")).exists());
    }
    assert_eq!(read_json(&dir.path().join("run_manifest.json"))["threads"], 2);
}

#[test]
fn simulate_ideal_has_degenerate_radial_frequencies() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--coefficients", "ideal", "--integration.rf_periods=1024", "simulate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let peaks = read_json(&dir.path().join("peaks.json"));
    assert_eq!(peaks["x"]["frequency"], peaks["y"]["frequency"]);
}

#[test]
fn unstable_operating_point_exits_4() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--operating_point.v_rf", "4000", "simulate"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("escaped"), "{}", stderr(&o));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"operating_point": {"v_rf": "lots"}}"#).unwrap();
    let o = paultrap(dir.path(), &["--config", cfg.to_str().unwrap(), "aq"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("operating_point.v_rf"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"grid": {"nodez": 33}}"#).unwrap();
    let o = paultrap(dir.path(), &["--config", cfg.to_str().unwrap(), "aq"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nodez"), "{}", stderr(&o));

    let o = paultrap(dir.path(), &["--config", "/nonexistent/run.json", "aq"]);
    assert_eq!(o.status.code(), Some(2));
    let o = paultrap(dir.path(), &["--threads", "0", "aq"]);
    assert_eq!(o.status.code(), Some(2));
    let o = paultrap(dir.path(), &["--coefficients", "bogus", "aq"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn ideal_trace_converges_everywhere() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--trace.v_rf", "[600, 750, 900]", "trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("trace_z_ideal_pseudo.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[5], "true", "{row}");
        let f: f64 = cols[2].parse().unwrap();
        assert!((f - 55.6e3).abs() <= 50.0, "{row}");
    }
}

#[test]
fn trace_target_beyond_stability_range_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--trace.target_hz", "5e6", "trace"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn solve_field_then_fit_from_dump() {
    let dir = TempDir::new().unwrap();
    let solve = dir.path().join("solve");
    let o = paultrap(
        &solve,
        &["--geometry.filament.enabled", "false", "--grid.nodes", "41", "solve-field"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["field.ptgrid", "axis_profiles.csv", "fit_report.json", "residual_by_order.json", "coefficients.csv"] {
        assert!(solve.join(name).exists(), "{name}");
    }
    let report = read_json(&solve.join("fit_report.json"));
    let c = &report["coefficients"];
    let (a2, b2) = (c["alpha2"].as_f64().unwrap(), c["beta2"].as_f64().unwrap());
    assert!((a2 - b2).abs() < 0.02, "alpha2 {a2} beta2 {b2}");

    let refit = dir.path().join("refit");
    let grid = solve.join("field.ptgrid");
    let o = paultrap(&refit, &["fit", "--grid", grid.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&refit.join("fit_report.json"))["coefficients"], *c);

    let from_report = dir.path().join("aq");
    let coeffs = format!(r#"{{"fit_report": "{}"}}"#, solve.join("fit_report.json").display());
    let o = paultrap(&from_report, &["--coefficients", &coeffs, "aq"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn solver_iteration_cap_exits_3() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["--grid.nodes", "33", "--solver.max_iterations", "3", "solve-field"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_grid_dump_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(dir.path(), &["fit", "--grid", "/nonexistent.ptgrid"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coarse_sweep_writes_one_row_per_height() {
    let dir = TempDir::new().unwrap();
    let o = paultrap(
        dir.path(),
        &[
            "--grid.nodes",
            "33",
            "--integration.rf_periods",
            "1024",
            "--sweep.heights",
            "[0.0, 0.003]",
            "sweep",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let points = read_json(&dir.path().join("sweep.json"));
    let f: Vec<f64> = points
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["axial_frequency"].as_f64().expect("no per-point error"))
        .collect();
    assert_eq!(f.len(), 2);
    assert!(f[1] > f[0], "{f:?}");
}
