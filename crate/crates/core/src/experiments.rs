//! Equi-frequency tracing, ideal-vs-perturbed comparisons and the
//! filament-height sweep.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::dynamics::{simulate_trajectory, IntegrationConfig};
use crate::error::{invalid, Error, Result};
use crate::exec::{map_ordered, ExecMode};
use crate::field::{solve_geometry, GridSpec, PotentialGrid, SolverOptions};
use crate::fit::{fit_multipoles, ideal_coefficients, FitReport, MultipoleCoefficients, DEFAULT_REGION_FRACTION};
use crate::mathieu::{beta_continued_fraction, ideal_aq, perturbed_aq, Axis, MathieuParams, DEFAULT_CF_TOLERANCE};
use crate::model::{FilamentConfig, IonSpecies, OperatingPoint, TrapGeometry};
use crate::spectral::{secular_peak_of, PeakEstimate};

/// Tracer stopping tolerance on |f − target|, Hz.
pub const DEFAULT_TRACE_TOLERANCE_HZ: f64 = 50.0;
pub const DEFAULT_DC_BRACKET: (f64, f64) = (-100.0, 100.0);
const MAX_BISECTIONS: usize = 80;

/// Per-axis values in x, y, z order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerAxis<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> PerAxis<T> {
    pub fn get(&self, axis: Axis) -> &T {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn try_from_fn(mut f: impl FnMut(Axis) -> Result<T>) -> Result<Self> {
        Ok(Self {
            x: f(Axis::X)?,
            y: f(Axis::Y)?,
            z: f(Axis::Z)?,
        })
    }
}

/// Simulates one trajectory and reads the secular peak on every axis.
pub fn simulated_secular_frequencies(
    coeffs: &MultipoleCoefficients,
    geom: &TrapGeometry,
    ion: &IonSpecies,
    op: &OperatingPoint,
    cfg: &IntegrationConfig,
) -> Result<PerAxis<PeakEstimate>> {
    let traj = simulate_trajectory(coeffs, geom, ion, op, cfg)?;
    if let Some(e) = traj.escape {
        return Err(Error::Escaped {
            axis: e.axis,
            time: e.time,
        });
    }
    PerAxis::try_from_fn(|axis| secular_peak_of(&traj, axis, op.drive_frequency_hz()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyModel {
    /// Continued-fraction β of the ideal trap.
    IdealPseudo,
    /// RK4 trajectory in the fitted potential, then FFT.
    PerturbedSimulated,
}

impl std::fmt::Display for FrequencyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FrequencyModel::IdealPseudo => "ideal_pseudo",
            FrequencyModel::PerturbedSimulated => "perturbed_simulated",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRequest {
    pub target_hz: f64,
    pub axis: Axis,
    pub model: FrequencyModel,
    /// Used by [`FrequencyModel::PerturbedSimulated`].
    pub coefficients: MultipoleCoefficients,
    pub ion: IonSpecies,
    pub geometry: TrapGeometry,
    /// Supplies the drive frequency; its voltages are ignored.
    pub op_template: OperatingPoint,
    pub integration: IntegrationConfig,
    pub dc_bracket: (f64, f64),
    pub tolerance_hz: f64,
    pub exec: ExecMode,
}

impl TraceRequest {
    pub fn new(target_hz: f64, axis: Axis, model: FrequencyModel) -> Self {
        Self {
            target_hz,
            axis,
            model,
            coefficients: ideal_coefficients(),
            ion: IonSpecies::europium_151(),
            geometry: crate::model::make_paper_trap(),
            op_template: OperatingPoint::paper(0.0, 0.0),
            integration: IntegrationConfig::default(),
            dc_bracket: DEFAULT_DC_BRACKET,
            tolerance_hz: DEFAULT_TRACE_TOLERANCE_HZ,
            exec: ExecMode::default(),
        }
    }

    pub fn with_coefficients(self, coefficients: MultipoleCoefficients) -> Self {
        Self { coefficients, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquiFrequencyPoint {
    pub v_rf: f64,
    pub u_dc: f64,
    /// Hz; NaN when no stable frequency was ever evaluated.
    pub achieved_frequency: f64,
    pub axis: Axis,
    pub model: FrequencyModel,
    pub converged: bool,
    pub evaluations: usize,
}

/// Outcome of one frequency evaluation during bisection.
#[derive(Debug, Clone, Copy)]
enum Probe {
    Frequency(f64),
    /// No usable frequency, but known to lie above (`true`) or below the target.
    Side(bool),
}

/// Side of the target for a point with no simulated frequency, judged from
/// the traced axis alone.
fn analytic_side(p: &MathieuParams, op: &OperatingPoint, target_hz: f64) -> Probe {
    match beta_continued_fraction(p, DEFAULT_CF_TOLERANCE) {
        Ok(beta) => Probe::Side(0.5 * beta * op.drive_frequency_hz() > target_hz),
        // Past β = 1 rather than below β = 0.
        Err(_) => Probe::Side(p.a + 0.5 * p.q * p.q >= 0.25),
    }
}

fn probe(req: &TraceRequest, v_rf: f64, u_dc: f64) -> Result<Probe> {
    let op = req.op_template.with_voltages(u_dc, v_rf);
    match req.model {
        FrequencyModel::IdealPseudo => {
            let p = ideal_aq(&req.ion, &req.geometry, &op, req.axis);
            Ok(match beta_continued_fraction(&p, DEFAULT_CF_TOLERANCE) {
                Ok(beta) => Probe::Frequency(0.5 * beta * op.drive_frequency_hz()),
                Err(_) => analytic_side(&p, &op, req.target_hz),
            })
        }
        FrequencyModel::PerturbedSimulated => {
            let traj = simulate_trajectory(&req.coefficients, &req.geometry, &req.ion, &op, &req.integration)?;
            if traj.escaped() {
                // Escape along any axis leaves no spectrum; the traced axis's
                // analytic β still says which way to move.
                let p = perturbed_aq(&req.ion, &req.geometry, &op, &req.coefficients, req.axis);
                return Ok(analytic_side(&p, &op, req.target_hz));
            }
            let peak = secular_peak_of(&traj, req.axis, op.drive_frequency_hz())?;
            Ok(Probe::Frequency(peak.frequency))
        }
    }
}

/// U_dc where the analytic perturbed model hits the target; the starting
/// point for the simulated tracer.
fn analytic_guess(req: &TraceRequest, v_rf: f64, lo: f64, hi: f64) -> Option<f64> {
    let eval = |u: f64| -> f64 {
        let op = req.op_template.with_voltages(u, v_rf);
        let p = perturbed_aq(&req.ion, &req.geometry, &op, &req.coefficients, req.axis);
        match beta_continued_fraction(&p, DEFAULT_CF_TOLERANCE) {
            Ok(beta) => 0.5 * beta * op.drive_frequency_hz() - req.target_hz,
            Err(_) => match analytic_side(&p, &op, req.target_hz) {
                Probe::Side(true) => 1.0,
                _ => -1.0,
            },
        }
    };
    let (mut lo, mut hi) = (lo, hi);
    let (g_lo, g_hi) = (eval(lo), eval(hi));
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if eval(mid).signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

struct Bisection<'a> {
    req: &'a TraceRequest,
    v_rf: f64,
    evaluations: usize,
    best: Option<(f64, f64)>,
}

impl Bisection<'_> {
    /// Signed distance from target (+1/−1 for unstable sides).
    fn eval(&mut self, u: f64) -> Result<f64> {
        self.evaluations += 1;
        Ok(match probe(self.req, self.v_rf, u)? {
            Probe::Frequency(f) => {
                let g = f - self.req.target_hz;
                if self.best.is_none_or(|(_, bf)| g.abs() < (bf - self.req.target_hz).abs()) {
                    self.best = Some((u, f));
                }
                g
            }
            Probe::Side(true) => f64::INFINITY,
            Probe::Side(false) => f64::NEG_INFINITY,
        })
    }

    fn point(&self, converged: bool) -> EquiFrequencyPoint {
        let (u_dc, f) = self.best.unwrap_or((f64::NAN, f64::NAN));
        EquiFrequencyPoint {
            v_rf: self.v_rf,
            u_dc,
            achieved_frequency: f,
            axis: self.req.axis,
            model: self.req.model,
            converged,
            evaluations: self.evaluations,
        }
    }
}

fn trace_point(req: &TraceRequest, v_rf: f64) -> Result<EquiFrequencyPoint> {
    let mut b = Bisection {
        req,
        v_rf,
        evaluations: 0,
        best: None,
    };
    let tol = req.tolerance_hz;
    let (mut lo, mut hi) = req.dc_bracket;
    let mut g_lo = b.eval(lo)?;
    let mut g_hi = b.eval(hi)?;
    if g_lo.signum() == g_hi.signum() {
        // Expand once, keeping the centre.
        let (c, w) = (0.5 * (lo + hi), hi - lo);
        lo = c - w;
        hi = c + w;
        g_lo = b.eval(lo)?;
        g_hi = b.eval(hi)?;
        if g_lo.signum() == g_hi.signum() {
            return Ok(b.point(false));
        }
    }
    for g in [g_lo, g_hi] {
        if g.abs() <= tol {
            return Ok(b.point(true));
        }
    }

    let mut next = match req.model {
        FrequencyModel::PerturbedSimulated => analytic_guess(req, v_rf, lo, hi),
        FrequencyModel::IdealPseudo => None,
    };
    for _ in 0..MAX_BISECTIONS {
        let mid = next.take().filter(|u| *u > lo && *u < hi).unwrap_or(0.5 * (lo + hi));
        let g = b.eval(mid)?;
        if g.abs() <= tol {
            return Ok(b.point(true));
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Ok(b.point(false))
}

/// For each V_rf, finds the U_dc at which `req.axis` oscillates at `req.target_hz`.
/// Points that cannot be bracketed are returned with `converged = false`.
pub fn trace_equifrequency(req: &TraceRequest, v_rf_list: &[f64]) -> Result<Vec<EquiFrequencyPoint>> {
    if v_rf_list.is_empty() {
        return Err(invalid("trace.v_rf", "list is empty"));
    }
    req.op_template.validate()?;
    let ceiling = 0.5 * req.op_template.drive_frequency_hz();
    if !(req.target_hz > 0.0 && req.target_hz < ceiling) {
        return Err(invalid(
            "trace.target_hz",
            format!("must lie in (0, Ω/4π = {ceiling:.1} Hz), got {}", req.target_hz),
        ));
    }
    if !(req.dc_bracket.0 < req.dc_bracket.1) {
        return Err(invalid("trace.dc_bracket", "lower bound must be below upper bound"));
    }
    if req.model == FrequencyModel::PerturbedSimulated {
        req.integration.validate()?;
    }
    map_ordered(req.exec, v_rf_list, |&v| trace_point(req, v)).into_iter().collect()
}

pub fn write_trace_csv<W: Write>(points: &[EquiFrequencyPoint], mut w: W) -> Result<()> {
    writeln!(w, "v_rf,u_dc,achieved_frequency_hz,axis,model,converged,evaluations")?;
    for p in points {
        writeln!(
            w,
            "{},{:.9},{:.6},{},{},{},{}",
            p.v_rf, p.u_dc, p.achieved_frequency, p.axis, p.model, p.converged, p.evaluations
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDiscrepancy {
    pub ideal_hz: f64,
    pub perturbed_hz: f64,
    /// ideal − perturbed.
    pub difference_hz: f64,
}

/// Ideal continued-fraction frequency minus simulated perturbed frequency, per axis.
pub fn frequency_discrepancy(
    v_rf: f64,
    u_dc: f64,
    ion: &IonSpecies,
    geom: &TrapGeometry,
    op_template: &OperatingPoint,
    coeffs: &MultipoleCoefficients,
    cfg: &IntegrationConfig,
) -> Result<PerAxis<AxisDiscrepancy>> {
    let op = op_template.with_voltages(u_dc, v_rf);
    let ideal = PerAxis::try_from_fn(|axis| {
        let p = ideal_aq(ion, geom, &op, axis);
        beta_continued_fraction(&p, DEFAULT_CF_TOLERANCE)
            .map(|beta| 0.5 * beta * op.drive_frequency_hz())
            .map_err(|e| Error::Unstable(format!("ideal model: {e}")))
    })?;
    let perturbed = simulated_secular_frequencies(coeffs, geom, ion, &op, cfg).map_err(|e| match e {
        Error::Escaped { axis, time } => Error::Unstable(format!(
            "perturbed model: ion escaped along {axis} at t = {time:.4e} s"
        )),
        other => other,
    })?;
    PerAxis::try_from_fn(|axis| {
        let i = *ideal.get(axis);
        let p = perturbed.get(axis).frequency;
        Ok(AxisDiscrepancy {
            ideal_hz: i,
            perturbed_hz: p,
            difference_hz: i - p,
        })
    })
}

/// Field-solve settings shared by every stage that rebuilds the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPipeline {
    pub grid: GridSpec,
    pub solver: SolverOptions,
    /// Fit sphere radius, m.
    pub fit_region_radius: f64,
}

impl FieldPipeline {
    pub fn default_for(geom: &TrapGeometry) -> Self {
        Self {
            grid: GridSpec::default_for(geom.r0),
            solver: SolverOptions::default(),
            fit_region_radius: DEFAULT_REGION_FRACTION * geom.r0,
        }
    }

    pub fn solve_and_fit(&self, geom: &TrapGeometry) -> Result<(PotentialGrid, FitReport)> {
        let grid = solve_geometry(geom, &self.grid, &self.solver)?;
        let report = fit_multipoles(&grid, self.fit_region_radius, geom.r0)?;
        Ok((grid, report))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub filament_height: f64,
    /// Hz.
    pub axial_frequency: Option<f64>,
    pub coefficients: Option<MultipoleCoefficients>,
    pub fit_rms_residual: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub error: Option<String>,
}

/// Full discretize → solve → fit → simulate → FFT pipeline at every height.
///
/// `base` supplies the trap and the filament shape (the reference filament
/// if it has none). A failure at one height is recorded on that point and
/// the sweep continues.
pub fn filament_height_sweep(
    heights: &[f64],
    op: &OperatingPoint,
    ion: &IonSpecies,
    base: &TrapGeometry,
    pipeline: &FieldPipeline,
    cfg: &IntegrationConfig,
    exec: ExecMode,
) -> Result<Vec<SweepPoint>> {
    if heights.is_empty() {
        return Err(invalid("sweep.heights", "list is empty"));
    }
    for (i, &h) in heights.iter().enumerate() {
        if !(h >= 0.0 && h < base.z0) {
            return Err(invalid(
                "sweep.heights",
                format!("height {h:.4e} m outside [0, z0 = {:.4e})", base.z0),
            ));
        }
        if i > 0 && h <= heights[i - 1] {
            return Err(invalid("sweep.heights", "heights must be strictly ascending"));
        }
    }
    cfg.validate()?;
    let filament = base.filament.unwrap_or_else(FilamentConfig::paper);
    Ok(map_ordered(exec, heights, |&h| {
        let geom = base.clone().with_filament(filament.with_height(h));
        let mut point = SweepPoint {
            filament_height: h,
            axial_frequency: None,
            coefficients: None,
            fit_rms_residual: None,
            solver_iterations: None,
            error: None,
        };
        let outcome = pipeline.solve_and_fit(&geom).and_then(|(grid, report)| {
            point.coefficients = Some(report.coefficients);
            point.fit_rms_residual = Some(report.rms_residual);
            point.solver_iterations = Some(grid.iterations);
            let traj = simulate_trajectory(&report.coefficients, &geom, ion, op, cfg)?;
            secular_peak_of(&traj, Axis::Z, op.drive_frequency_hz())
        });
        match outcome {
            Ok(peak) => point.axial_frequency = Some(peak.frequency),
            Err(e) => point.error = Some(e.to_string()),
        }
        point
    }))
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut w: W) -> Result<()> {
    writeln!(
        w,
        "filament_height_m,axial_frequency_hz,alpha0,alpha1,gamma1,alpha2,beta2,gamma2,fit_rms_residual,error"
    )?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.9e}"));
    for p in points {
        let coeffs = p
            .coefficients
            .map_or_else(|| vec![String::new(); 6], |c| c.values().map(|v| format!("{v:.9e}")).to_vec());
        writeln!(
            w,
            "{:.6e},{},{},{},{}",
            p.filament_height,
            opt(p.axial_frequency),
            coeffs.join(","),
            opt(p.fit_rms_residual),
            p.error.as_deref().unwrap_or("").replace(',', ";")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::paper_table_coefficients;
    use crate::mathieu::secular;
    use crate::model::make_paper_trap;

    const TARGET: f64 = 55.6e3;

    fn ideal_req(axis: Axis) -> TraceRequest {
        TraceRequest::new(TARGET, axis, FrequencyModel::IdealPseudo)
    }

    #[test]
    fn ideal_trace_closes_the_loop() {
        let req = ideal_req(Axis::Z);
        let v = [450.0, 550.0, 650.0, 750.0];
        let pts = trace_equifrequency(&req, &v).unwrap();
        assert_eq!(pts.len(), v.len());
        for p in &pts {
            assert!(p.converged);
            let op = req.op_template.with_voltages(p.u_dc, p.v_rf);
            let s = secular(&ideal_aq(&req.ion, &req.geometry, &op, Axis::Z), &op);
            assert!((s.secular_frequency - TARGET).abs() <= DEFAULT_TRACE_TOLERANCE_HZ);
            assert_eq!(s.secular_frequency, p.achieved_frequency);
        }
    }

    #[test]
    fn ideal_axial_trace_matches_dense_scan() {
        let req = ideal_req(Axis::Z);
        let v = [400.0, 500.0, 600.0, 700.0, 800.0];
        let pts = trace_equifrequency(&req, &v).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].u_dc > w[0].u_dc);
        }
        // Oracle: first sign change of f − target on a 5 mV grid.
        for p in &pts {
            let f = |u: f64| {
                let op = req.op_template.with_voltages(u, p.v_rf);
                secular(&ideal_aq(&req.ion, &req.geometry, &op, Axis::Z), &op).secular_frequency
            };
            let crossing = (0..40_000)
                .map(|i| -100.0 + 0.005 * i as f64)
                .find(|&u| f(u) < TARGET)
                .unwrap();
            assert!((crossing - p.u_dc).abs() < 0.1, "{crossing} vs {}", p.u_dc);
        }
    }

    #[test]
    fn unbracketed_points_are_kept_unconverged() {
        let req = TraceRequest::new(200e3, Axis::Z, FrequencyModel::IdealPseudo);
        let pts = trace_equifrequency(&req, &[100.0, 1000.0]).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(!pts[0].converged);
        assert_eq!(pts[0].v_rf, 100.0);
    }

    #[test]
    fn trace_preconditions() {
        assert!(trace_equifrequency(&ideal_req(Axis::Z), &[]).is_err());
        let too_high = TraceRequest::new(250e3, Axis::Z, FrequencyModel::IdealPseudo);
        assert!(matches!(
            trace_equifrequency(&too_high, &[500.0]),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn perturbed_trace_is_deterministic_and_on_target() {
        let req = TraceRequest::new(TARGET, Axis::Z, FrequencyModel::PerturbedSimulated)
            .with_coefficients(paper_table_coefficients());
        let a = trace_equifrequency(&req, &[600.0, 700.0]).unwrap();
        let b = trace_equifrequency(&req, &[600.0, 700.0]).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert!(p.converged);
            assert!((p.achieved_frequency - TARGET).abs() <= DEFAULT_TRACE_TOLERANCE_HZ);
        }
    }

    #[test]
    fn ideal_coefficients_give_no_discrepancy() {
        let geom = make_paper_trap();
        let d = frequency_discrepancy(
            700.0,
            -5.3,
            &IonSpecies::europium_151(),
            &geom,
            &OperatingPoint::paper(0.0, 0.0),
            &ideal_coefficients(),
            &IntegrationConfig::default(),
        )
        .unwrap();
        let resolution = 1.0 / (2048.0 * 2e-6);
        for axis in Axis::ALL {
            assert!(d.get(axis).difference_hz.abs() < resolution, "{axis}: {:?}", d.get(axis));
        }
    }

    #[test]
    fn discrepancy_names_the_failing_model() {
        let geom = make_paper_trap();
        let err = frequency_discrepancy(
            1500.0,
            0.0,
            &IonSpecies::europium_151(),
            &geom,
            &OperatingPoint::paper(0.0, 0.0),
            &ideal_coefficients(),
            &IntegrationConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Unstable(m) if m.starts_with("ideal model")), "{err}");
    }

    fn coarse_pipeline(geom: &TrapGeometry) -> FieldPipeline {
        FieldPipeline {
            grid: GridSpec::cubic(41, 1.2 * geom.r0),
            ..FieldPipeline::default_for(geom)
        }
    }

    #[test]
    fn sweep_preconditions() {
        let geom = make_paper_trap();
        let pipe = coarse_pipeline(&geom);
        let run = |h: &[f64]| {
            filament_height_sweep(
                h,
                &OperatingPoint::paper(21.75, 550.0),
                &IonSpecies::europium_151(),
                &geom,
                &pipe,
                &IntegrationConfig::default(),
                ExecMode::Sequential,
            )
        };
        assert!(run(&[]).is_err());
        assert!(run(&[geom.z0]).is_err());
        assert!(run(&[2e-3, 1e-3]).is_err());
    }

    #[test]
    fn sweep_attaches_stage_errors_to_points() {
        let geom = make_paper_trap();
        let pipe = FieldPipeline {
            fit_region_radius: 0.45 * geom.r0,
            ..coarse_pipeline(&geom)
        };
        let pts = filament_height_sweep(
            &[0.0, 4e-3],
            &OperatingPoint::paper(21.75, 550.0),
            &IonSpecies::europium_151(),
            &geom,
            &pipe,
            &IntegrationConfig::default(),
            ExecMode::Sequential,
        )
        .unwrap();
        // The allowed fit sphere shrinks as the filament rises: only the upper point fails.
        assert_eq!(pts.len(), 2);
        assert!(pts[0].error.is_none() && pts[0].axial_frequency.is_some());
        assert!(pts[1].error.is_some() && pts[1].axial_frequency.is_none());
        assert_eq!(pts[1].filament_height, 4e-3);
    }

    #[test]
    fn coarse_sweep_runs_and_is_mode_independent() {
        let geom = make_paper_trap();
        let pipe = coarse_pipeline(&geom);
        let run = |exec| {
            filament_height_sweep(
                &[1e-3, 4e-3],
                &OperatingPoint::paper(21.75, 550.0),
                &IonSpecies::europium_151(),
                &geom,
                &pipe,
                &IntegrationConfig::default(),
                exec,
            )
            .unwrap()
        };
        let seq = run(ExecMode::Sequential);
        assert_eq!(seq, run(ExecMode::Parallel));
        assert!(seq.iter().all(|p| p.error.is_none()));
        assert!(seq[1].axial_frequency.unwrap() > seq[0].axial_frequency.unwrap());
        let mut csv = Vec::new();
        write_sweep_csv(&seq, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }
}
