//! Single-ion trajectories in the fitted, time-dependent trap potential.
//!
//! The potential is φ₀(t)·(multipole model), so the acceleration is
//!
//! ```text
//! r̈ = −(Q/m)·φ₀(t)·( α₁/r0 + 2α₂x/r0²,  2β₂y/r0²,  γ₁/r0 + 2γ₂z/r0² )
//! ```
//!
//! integrated with classic fixed-step RK4, φ₀ evaluated exactly at every stage.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::exec::{map_ordered, ExecMode};
use crate::fit::MultipoleCoefficients;
use crate::mathieu::Axis;
use crate::model::{instantaneous_ring_potential, IonSpecies, OperatingPoint, TrapGeometry};

pub const MIN_STEPS_PER_RF_PERIOD: usize = 50;
pub const MIN_RF_PERIODS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub steps_per_rf_period: usize,
    pub rf_periods: usize,
    pub initial_position: [f64; 3],
    pub initial_velocity: [f64; 3],
}

impl Default for IntegrationConfig {
    /// 100 steps per RF period for 2048 periods, starting at rest from (0.5, 0.5, 0.5) mm.
    fn default() -> Self {
        Self {
            steps_per_rf_period: 100,
            rf_periods: 2048,
            initial_position: [0.5e-3; 3],
            initial_velocity: [0.0; 3],
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_rf_period < MIN_STEPS_PER_RF_PERIOD {
            return Err(invalid(
                "integration.steps_per_rf_period",
                format!("must be >= {MIN_STEPS_PER_RF_PERIOD}, got {}", self.steps_per_rf_period),
            ));
        }
        if self.rf_periods < MIN_RF_PERIODS {
            return Err(invalid(
                "integration.rf_periods",
                format!("must be >= {MIN_RF_PERIODS}, got {}", self.rf_periods),
            ));
        }
        if !self
            .initial_position
            .iter()
            .chain(&self.initial_velocity)
            .all(|v| v.is_finite())
        {
            return Err(invalid("integration", "initial state must be finite"));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.steps_per_rf_period * self.rf_periods
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub axis: Axis,
    pub time: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Δt between samples, s.
    pub sample_interval: f64,
    pub positions: Vec<[f64; 3]>,
    pub velocities: Vec<[f64; 3]>,
    pub escape: Option<Escape>,
}

impl Trajectory {
    pub fn escaped(&self) -> bool {
        self.escape.is_some()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn axis_series(&self, axis: Axis) -> Vec<f64> {
        self.positions.iter().map(|p| p[axis.index()]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.positions
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y,z,vx,vy,vz")?;
        for (n, (p, v)) in self.positions.iter().zip(&self.velocities).enumerate() {
            writeln!(
                w,
                "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                n as f64 * self.sample_interval,
                p[0],
                p[1],
                p[2],
                v[0],
                v[1],
                v[2]
            )?;
        }
        Ok(())
    }
}

/// Field coefficients pre-multiplied by −Q/m, so that r̈ = φ₀(t)·(offset + gain ∘ r).
#[derive(Debug, Clone, Copy)]
struct FieldTerms {
    offset: [f64; 3],
    gain: [f64; 3],
}

impl FieldTerms {
    fn new(coeffs: &MultipoleCoefficients, geom: &TrapGeometry, ion: &IonSpecies) -> Self {
        let k = -ion.charge_to_mass();
        let r0 = geom.r0;
        Self {
            offset: [k * coeffs.alpha1 / r0, 0.0, k * coeffs.gamma1 / r0],
            gain: [
                k * 2.0 * coeffs.alpha2 / (r0 * r0),
                k * 2.0 * coeffs.beta2 / (r0 * r0),
                k * 2.0 * coeffs.gamma2 / (r0 * r0),
            ],
        }
    }

    #[inline]
    fn accel(&self, phi0: f64, r: [f64; 3]) -> [f64; 3] {
        [
            phi0 * (self.offset[0] + self.gain[0] * r[0]),
            phi0 * (self.offset[1] + self.gain[1] * r[1]),
            phi0 * (self.offset[2] + self.gain[2] * r[2]),
        ]
    }
}

/// Acceleration (m/s²) of the ion at `position` and time `t`.
pub fn acceleration(
    coeffs: &MultipoleCoefficients,
    geom: &TrapGeometry,
    ion: &IonSpecies,
    op: &OperatingPoint,
    position: [f64; 3],
    t: f64,
) -> [f64; 3] {
    FieldTerms::new(coeffs, geom, ion).accel(instantaneous_ring_potential(op, t), position)
}

fn escape_axis(geom: &TrapGeometry, r: [f64; 3]) -> Option<Axis> {
    if r[0].abs() > geom.r0 {
        Some(Axis::X)
    } else if r[1].abs() > geom.r0 {
        Some(Axis::Y)
    } else if r[2].abs() > geom.z0 {
        Some(Axis::Z)
    } else {
        None
    }
}

pub fn simulate_trajectory(
    coeffs: &MultipoleCoefficients,
    geom: &TrapGeometry,
    ion: &IonSpecies,
    op: &OperatingPoint,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    op.validate()?;
    let field = FieldTerms::new(coeffs, geom, ion);
    let dt = op.rf_period() / cfg.steps_per_rf_period as f64;
    let half = 0.5 * dt;
    let steps = cfg.total_steps();
    let phi = |t: f64| instantaneous_ring_potential(op, t);

    let mut r = cfg.initial_position;
    let mut v = cfg.initial_velocity;
    let mut positions = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    positions.push(r);
    velocities.push(v);
    if let Some(axis) = escape_axis(geom, r) {
        return Ok(Trajectory {
            sample_interval: dt,
            positions,
            velocities,
            escape: Some(Escape { axis, time: 0.0, step: 0 }),
        });
    }

    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for step in 1..=steps {
        // Time from the step index keeps the drive phase free of accumulated rounding.
        let t = (step - 1) as f64 * dt;
        let phi_mid = phi(t + half);

        let k1v = field.accel(phi(t), r);
        let k1r = v;
        let k2v = field.accel(phi_mid, add(r, k1r, half));
        let k2r = add(v, k1v, half);
        let k3v = field.accel(phi_mid, add(r, k2r, half));
        let k3r = add(v, k2v, half);
        let k4v = field.accel(phi(t + dt), add(r, k3r, dt));
        let k4r = add(v, k3v, dt);

        for i in 0..3 {
            r[i] += dt / 6.0 * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        if !r.iter().chain(&v).all(|c| c.is_finite()) {
            return Err(Error::NumericFailure { step });
        }
        positions.push(r);
        velocities.push(v);
        if let Some(axis) = escape_axis(geom, r) {
            return Ok(Trajectory {
                sample_interval: dt,
                positions,
                velocities,
                escape: Some(Escape {
                    axis,
                    time: step as f64 * dt,
                    step,
                }),
            });
        }
    }
    Ok(Trajectory {
        sample_interval: dt,
        positions,
        velocities,
        escape: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub steps_per_rf_period: usize,
    /// Largest |r_N − r_2N| over the common time samples, m.
    pub max_divergence: f64,
    /// `max_divergence / r0`.
    pub relative_divergence: f64,
    pub escaped: bool,
    /// False when either run escaped; the divergence is then meaningless.
    pub reliable: bool,
}

/// Runs the configuration at N and 2N steps per RF period and compares them.
pub fn convergence_check(
    coeffs: &MultipoleCoefficients,
    geom: &TrapGeometry,
    ion: &IonSpecies,
    op: &OperatingPoint,
    cfg: &IntegrationConfig,
) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let fine_cfg = IntegrationConfig {
        steps_per_rf_period: 2 * cfg.steps_per_rf_period,
        ..*cfg
    };
    let coarse = simulate_trajectory(coeffs, geom, ion, op, cfg)?;
    let fine = simulate_trajectory(coeffs, geom, ion, op, &fine_cfg)?;
    let escaped = coarse.escaped() || fine.escaped();
    let max_divergence = coarse
        .positions
        .iter()
        .zip(fine.positions.iter().step_by(2))
        .map(|(a, b)| {
            let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .fold(0.0f64, f64::max);
    Ok(ConvergenceReport {
        steps_per_rf_period: cfg.steps_per_rf_period,
        max_divergence,
        relative_divergence: max_divergence / geom.r0,
        escaped,
        reliable: !escaped,
    })
}

/// One trajectory job in a parameter scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryJob {
    pub coefficients: MultipoleCoefficients,
    pub geometry: TrapGeometry,
    pub ion: IonSpecies,
    pub operating_point: OperatingPoint,
    pub integration: IntegrationConfig,
}

/// Runs independent trajectories, results in input order.
pub fn simulate_batch(mode: ExecMode, jobs: &[TrajectoryJob]) -> Vec<Result<Trajectory>> {
    map_ordered(mode, jobs, |j| {
        simulate_trajectory(&j.coefficients, &j.geometry, &j.ion, &j.operating_point, &j.integration)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{ideal_coefficients, paper_table_coefficients};
    use crate::mathieu::{beta_continued_fraction, ideal_aq, MathieuParams, DEFAULT_CF_TOLERANCE};
    use crate::model::make_paper_trap;

    fn setup() -> (TrapGeometry, IonSpecies) {
        (make_paper_trap(), IonSpecies::europium_151())
    }

    fn short_cfg() -> IntegrationConfig {
        IntegrationConfig {
            rf_periods: 256,
            ..Default::default()
        }
    }

    /// Voltages giving the requested (a_z, q_z) in the ideal trap.
    fn op_for(a_z: f64, q_z: f64) -> OperatingPoint {
        let (geom, ion) = setup();
        let unit = OperatingPoint::paper(1.0, 1.0);
        let p = ideal_aq(&ion, &geom, &unit, Axis::Z);
        OperatingPoint::paper(a_z / p.a, q_z / p.q)
    }

    #[test]
    fn origin_is_field_free_for_ideal_coefficients() {
        let (geom, ion) = setup();
        let op = OperatingPoint::paper(-5.3, 700.0);
        for k in 0..10 {
            let a = acceleration(&ideal_coefficients(), &geom, &ion, &op, [0.0; 3], k as f64 * 1.3e-7);
            assert_eq!(a, [0.0; 3]);
        }
    }

    #[test]
    fn dipole_terms_push_at_origin() {
        let (geom, ion) = setup();
        let op = OperatingPoint::paper(-5.3, 700.0);
        let a = acceleration(&paper_table_coefficients(), &geom, &ion, &op, [0.0; 3], 0.0);
        assert!(a[0] != 0.0 && a[2] != 0.0);
        assert_eq!(a[1], 0.0);
    }

    #[test]
    fn field_is_linear_in_position() {
        let (geom, ion) = setup();
        let op = OperatingPoint::paper(7.0, 500.0);
        let c = paper_table_coefficients();
        let u = [1.1e-3, -0.4e-3, 0.7e-3];
        let t = 0.37e-6;
        let a0 = acceleration(&c, &geom, &ion, &op, [0.0; 3], t);
        let a1 = acceleration(&c, &geom, &ion, &op, u, t);
        let a2 = acceleration(&c, &geom, &ion, &op, u.map(|x| 2.0 * x), t);
        for i in 0..3 {
            let lhs = a2[i] - a0[i];
            let rhs = 2.0 * (a1[i] - a0[i]);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn resting_ion_at_origin_stays_put() {
        let (geom, ion) = setup();
        let cfg = IntegrationConfig {
            initial_position: [0.0; 3],
            ..short_cfg()
        };
        let traj =
            simulate_trajectory(&ideal_coefficients(), &geom, &ion, &OperatingPoint::paper(-5.3, 700.0), &cfg).unwrap();
        assert!(!traj.escaped());
        assert_eq!(traj.len(), 100 * 256 + 1);
        assert!(traj.max_abs() < 1e-12);
    }

    #[test]
    fn unstable_drive_escapes() {
        let (geom, ion) = setup();
        let op = op_for(0.0, 1.5);
        let p = MathieuParams { a: 0.0, q: 1.5, axis: Axis::Z };
        assert!(beta_continued_fraction(&p, DEFAULT_CF_TOLERANCE).is_err());
        let traj = simulate_trajectory(&ideal_coefficients(), &geom, &ion, &op, &short_cfg()).unwrap();
        let escape = traj.escape.expect("must escape");
        assert_eq!(escape.axis, Axis::Z);
        assert!(traj.len() < 100 * 256 + 1);
    }

    #[test]
    fn table_coefficients_stay_bounded_at_reference_point() {
        let (geom, ion) = setup();
        let traj = simulate_trajectory(
            &paper_table_coefficients(),
            &geom,
            &ion,
            &OperatingPoint::paper(-5.3, 700.0),
            &IntegrationConfig::default(),
        )
        .unwrap();
        assert!(!traj.escaped());
        assert_eq!(traj.len(), 204_801);
    }

    #[test]
    fn config_minimums_are_enforced() {
        let (geom, ion) = setup();
        let op = OperatingPoint::paper(0.0, 500.0);
        let bad = IntegrationConfig {
            steps_per_rf_period: 49,
            ..Default::default()
        };
        assert!(matches!(
            convergence_check(&ideal_coefficients(), &geom, &ion, &op, &bad),
            Err(Error::InvalidParameter { .. })
        ));
        let bad = IntegrationConfig {
            rf_periods: 100,
            ..Default::default()
        };
        assert!(simulate_trajectory(&ideal_coefficients(), &geom, &ion, &op, &bad).is_err());
    }

    #[test]
    fn step_halving_shows_fourth_order_convergence() {
        let (geom, ion) = setup();
        let op = OperatingPoint::paper(0.0, 500.0);
        let coarse = convergence_check(&ideal_coefficients(), &geom, &ion, &op, &short_cfg()).unwrap();
        let fine_cfg = IntegrationConfig {
            steps_per_rf_period: 200,
            ..short_cfg()
        };
        let fine = convergence_check(&ideal_coefficients(), &geom, &ion, &op, &fine_cfg).unwrap();
        assert!(coarse.reliable && fine.reliable);
        let ratio = coarse.max_divergence / fine.max_divergence;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
        assert!(coarse.relative_divergence < 1e-6);
    }

    #[test]
    fn step_halving_flags_escape() {
        let (geom, ion) = setup();
        let report = convergence_check(&ideal_coefficients(), &geom, &ion, &op_for(0.0, 1.5), &short_cfg()).unwrap();
        assert!(report.escaped && !report.reliable);
    }

    #[test]
    fn xz_plane_motion_stays_in_plane() {
        let (geom, ion) = setup();
        let cfg = IntegrationConfig {
            initial_position: [0.8e-3, 0.0, -0.3e-3],
            initial_velocity: [3.0, 0.0, -1.0],
            ..short_cfg()
        };
        let traj = simulate_trajectory(&paper_table_coefficients(), &geom, &ion, &OperatingPoint::paper(-5.3, 700.0), &cfg)
            .unwrap();
        assert!(traj.positions.iter().all(|p| p[1] == 0.0));
    }

    #[test]
    fn batch_matches_individual_runs() {
        let (geom, ion) = setup();
        let jobs: Vec<TrajectoryJob> = [300.0, 450.0, 600.0]
            .iter()
            .map(|&v| TrajectoryJob {
                coefficients: ideal_coefficients(),
                geometry: geom.clone(),
                ion: ion.clone(),
                operating_point: OperatingPoint::paper(2.0, v),
                integration: short_cfg(),
            })
            .collect();
        let seq = simulate_batch(ExecMode::Sequential, &jobs);
        let par = simulate_batch(ExecMode::Parallel, &jobs);
        for (a, b) in seq.iter().zip(&par) {
            assert_eq!(a.as_ref().unwrap().positions, b.as_ref().unwrap().positions);
        }
    }

    #[test]
    fn csv_export_columns() {
        let (geom, ion) = setup();
        let traj =
            simulate_trajectory(&ideal_coefficients(), &geom, &ion, &OperatingPoint::paper(0.0, 400.0), &short_cfg())
                .unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next(), Some("t,x,y,z,vx,vy,vz"));
        assert_eq!(text.lines().count(), traj.len() + 1);
    }
}
