use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use paultrap::dynamics::simulate_trajectory;
use paultrap::experiments::{filament_height_sweep, trace_equifrequency, write_sweep_csv, write_trace_csv};
use paultrap::field::{read_grid_dump, solve_geometry, write_axis_profiles, write_grid_dump, PotentialGrid};
use paultrap::fit::{fit_multipoles, ideal_coefficients, residual_by_order, DEFAULT_REGION_FRACTION};
use paultrap::mathieu::evaluate_axes;
use paultrap::spectral::{find_secular_peak, spectrum_of};
use paultrap::{Axis, Error};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json, Run};
use crate::CliError;

fn fit_and_write(run: &mut Run, grid: &PotentialGrid, region_radius: f64, r0: f64) -> Result<(), CliError> {
    let t = Instant::now();
    let report = fit_multipoles(grid, region_radius, r0)?;
    let residuals = residual_by_order(grid, &report)?;
    run.time("fit", t);
    write_json(&run.path("fit_report.json"), &report)?;
    write_json(&run.path("residual_by_order.json"), &residuals)?;
    write_atomic(&run.path("coefficients.csv"), |w| Ok(report.coefficients.write_csv(w)?))?;
    let c = &report.coefficients;
    println!(
        "alpha0 {:.5} alpha1 {:.5} gamma1 {:.5} alpha2 {:.5} beta2 {:.5} gamma2 {:.5} (rms residual {:.2e}, {} samples)",
        c.alpha0, c.alpha1, c.gamma1, c.alpha2, c.beta2, c.gamma2, report.rms_residual, report.sample_count
    );
    Ok(())
}

pub fn solve_field(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "solve-field")?;
    let geom = cfg.geometry()?;
    let pipeline = cfg.pipeline(&geom)?;
    run.resolve("geometry", &geom);
    run.resolve("grid", &pipeline.grid);
    run.resolve("solver", &pipeline.solver);
    run.resolve("fit_region_radius", &pipeline.fit_region_radius);

    let t = Instant::now();
    let grid = solve_geometry(&geom, &pipeline.grid, &pipeline.solver)?;
    run.time("solve", t);
    println!(
        "solved {}x{}x{} grid in {} iterations (max update {:.2e})",
        pipeline.grid.nx, pipeline.grid.ny, pipeline.grid.nz, grid.iterations, grid.converged_residual
    );
    write_atomic(&run.path("field.ptgrid"), |w| Ok(write_grid_dump(&grid, w)?))?;
    write_atomic(&run.path("axis_profiles.csv"), |w| Ok(write_axis_profiles(&grid, w)?))?;
    fit_and_write(&mut run, &grid, pipeline.fit_region_radius, geom.r0)?;
    run.finish(cfg)?;
    Ok(())
}

pub fn fit(cfg: &RunConfig, grid_path: &Path, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "fit")?;
    let file = File::open(grid_path)
        .map_err(|e| CliError::config(format!("cannot open grid dump {}: {e}", grid_path.display())))?;
    let dump = read_grid_dump(BufReader::new(file))?;
    let r0 = dump.r0;
    let grid = dump.into_potential_grid();
    let radius = cfg.fit.region_radius.unwrap_or(DEFAULT_REGION_FRACTION * r0);
    run.resolve("grid_dump", &grid_path);
    run.resolve("grid", grid.spec());
    run.resolve("fit_region_radius", &radius);
    fit_and_write(&mut run, &grid, radius, r0)?;
    run.finish(cfg)?;
    Ok(())
}

pub fn aq(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "aq")?;
    let (geom, ion, op, coeffs) = (cfg.geometry()?, cfg.ion()?, cfg.operating_point()?, cfg.coefficients()?);
    run.resolve("ion", &ion);
    run.resolve("operating_point", &op);
    run.resolve("coefficients", &coeffs);
    let ideal = evaluate_axes(&ion, &geom, &op, &ideal_coefficients());
    let perturbed = evaluate_axes(&ion, &geom, &op, &coeffs);
    write_json(&run.path("aq.json"), &json!({ "ideal": ideal, "perturbed": perturbed }))?;
    write_atomic(&run.path("aq.csv"), |w| {
        writeln!(w, "model,axis,a,q,beta_approx,beta,secular_frequency_hz,stable")?;
        for (model, rows) in [("ideal", &ideal), ("perturbed", &perturbed)] {
            for r in rows.iter() {
                let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.9e}"));
                writeln!(
                    w,
                    "{model},{},{:.9e},{:.9e},{},{},{},{}",
                    r.axis,
                    r.a,
                    r.q,
                    opt(r.beta_approx),
                    opt(r.beta),
                    opt(r.secular_frequency_hz),
                    r.stable
                )?;
            }
        }
        Ok(())
    })?;
    for (model, rows) in [("ideal", &ideal), ("perturbed", &perturbed)] {
        for r in rows.iter() {
            let f = r
                .secular_frequency_hz
                .map_or("unstable".to_string(), |f| format!("{f:.1} Hz"));
            println!("{model:9} {}: a = {:+.5}, q = {:+.5}, {f}", r.axis, r.a, r.q);
        }
    }
    run.finish(cfg)?;
    Ok(())
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "simulate")?;
    let (geom, ion, op) = (cfg.geometry()?, cfg.ion()?, cfg.operating_point()?);
    let (coeffs, icfg) = (cfg.coefficients()?, cfg.integration()?);
    run.resolve("ion", &ion);
    run.resolve("operating_point", &op);
    run.resolve("coefficients", &coeffs);
    run.resolve("integration", &icfg);

    let t = Instant::now();
    let traj = simulate_trajectory(&coeffs, &geom, &ion, &op, &icfg)?;
    run.time("integrate", t);
    write_atomic(&run.path("trajectory.csv"), |w| Ok(traj.write_csv(w)?))?;
    if let Some(e) = traj.escape {
        run.finish(cfg)?;
        return Err(Error::Escaped {
            axis: e.axis,
            time: e.time,
        }
        .into());
    }

    let t = Instant::now();
    let mut peaks = serde_json::Map::new();
    let mut summary = Vec::new();
    for axis in Axis::ALL {
        let spectrum = spectrum_of(&traj, axis)?;
        write_atomic(&run.path(&format!("spectrum_{axis}.csv")), |w| Ok(spectrum.write_csv(w)?))?;
        let peak = find_secular_peak(&spectrum, op.drive_frequency_hz())?;
        peaks.insert(axis.to_string(), serde_json::to_value(peak).unwrap());
        summary.push(format!("f_{axis} = {:.1} Hz", peak.frequency));
    }
    run.time("spectra", t);
    write_json(&run.path("peaks.json"), &peaks)?;
    println!("{}", summary.join(", "));
    run.finish(cfg)?;
    Ok(())
}

pub fn trace(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "trace")?;
    let (req, v_rf) = cfg.trace_request()?;
    run.resolve("target_hz", &req.target_hz);
    run.resolve("axis", &req.axis);
    run.resolve("model", &req.model);
    run.resolve("coefficients", &req.coefficients);
    run.resolve("v_rf", &v_rf);
    run.resolve("dc_bracket", &req.dc_bracket);
    run.resolve("tolerance_hz", &req.tolerance_hz);

    let t = Instant::now();
    let points = trace_equifrequency(&req, &v_rf)?;
    run.time("trace", t);
    let name = format!("trace_{}_{}.csv", req.axis, req.model);
    write_atomic(&run.path(&name), |w| Ok(write_trace_csv(&points, w)?))?;
    let converged = points.iter().filter(|p| p.converged).count();
    println!("{converged}/{} points converged -> {name}", points.len());
    for p in points.iter().filter(|p| !p.converged) {
        eprintln!("warning: no U_dc found for V_rf = {} V", p.v_rf);
    }
    run.finish(cfg)?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut run = Run::start(out, "sweep")?;
    let geom = cfg.geometry()?;
    let (pipeline, op, ion, icfg) = (cfg.pipeline(&geom)?, cfg.sweep_operating_point()?, cfg.ion()?, cfg.integration()?);
    let heights = cfg.sweep_heights();
    run.resolve("geometry", &geom);
    run.resolve("grid", &pipeline.grid);
    run.resolve("solver", &pipeline.solver);
    run.resolve("fit_region_radius", &pipeline.fit_region_radius);
    run.resolve("operating_point", &op);
    run.resolve("heights", &heights);

    let t = Instant::now();
    let points = filament_height_sweep(&heights, &op, &ion, &geom, &pipeline, &icfg, cfg.exec)?;
    run.time("sweep", t);
    write_atomic(&run.path("sweep.csv"), |w| Ok(write_sweep_csv(&points, w)?))?;
    write_json(&run.path("sweep.json"), &points)?;
    for p in &points {
        match (&p.axial_frequency, &p.error) {
            (Some(f), _) => println!("height {:.2} mm: f_z = {:.1} Hz", p.filament_height * 1e3, f),
            (None, Some(e)) => eprintln!("warning: height {:.2} mm failed: {e}", p.filament_height * 1e3),
            (None, None) => {}
        }
    }
    run.finish(cfg)?;
    Ok(())
}
