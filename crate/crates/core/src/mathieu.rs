//! Mathieu parameters, the stability parameter β and secular frequencies.
//!
//! With the ring driven at φ₀(t) = U + V·cos(Ωt) and a quadratic potential
//! coefficient c along an axis (α₂, β₂ or γ₂ of the multipole model), the
//! equation of motion in τ = Ωt/2 is
//!
//! ```text
//! u'' + (a − 2q·cos 2τ)·u = 0,   a = 8QUc/(m r0² Ω²),   q = −4QVc/(m r0² Ω²)
//! ```
//!
//! For the ideal trap (c = ½, ½, −1) this gives a_x = a_y = −a_z/2 and
//! q_x = q_y = −q_z/2. The sign of `a` follows the ring-drive equation of
//! motion used by [`crate::dynamics`], so analytic and simulated
//! frequencies describe the same physical trap.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::fit::{ideal_coefficients, MultipoleCoefficients};
use crate::model::{IonSpecies, OperatingPoint, TrapGeometry};

pub const DEFAULT_CF_TOLERANCE: f64 = 1e-10;
pub const MAX_CF_DEPTH: usize = 40;
const MAX_FIXED_POINT_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[serde(alias = "radial")]
    X,
    Y,
    #[serde(alias = "axial")]
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "radial" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" | "axial" => Ok(Axis::Z),
            other => Err(crate::error::invalid("axis", format!("unknown axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MathieuParams {
    pub a: f64,
    pub q: f64,
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecularResult {
    pub beta: f64,
    /// Hz.
    pub secular_frequency: f64,
    pub stable: bool,
}

/// Quadratic coefficient of the potential along `axis`.
pub fn curvature_coefficient(coeffs: &MultipoleCoefficients, axis: Axis) -> f64 {
    match axis {
        Axis::X => coeffs.alpha2,
        Axis::Y => coeffs.beta2,
        Axis::Z => coeffs.gamma2,
    }
}

/// Q / (m r0² Ω²).
fn drive_scale(ion: &IonSpecies, geom: &TrapGeometry, op: &OperatingPoint) -> f64 {
    let omega = op.drive_angular_frequency;
    ion.charge / (ion.mass * geom.r0 * geom.r0 * omega * omega)
}

pub fn perturbed_aq(
    ion: &IonSpecies,
    geom: &TrapGeometry,
    op: &OperatingPoint,
    coeffs: &MultipoleCoefficients,
    axis: Axis,
) -> MathieuParams {
    let c = curvature_coefficient(coeffs, axis);
    let s = drive_scale(ion, geom, op);
    MathieuParams {
        a: 8.0 * s * op.u_dc * c,
        q: -4.0 * s * op.v_rf * c,
        axis,
    }
}

pub fn ideal_aq(ion: &IonSpecies, geom: &TrapGeometry, op: &OperatingPoint, axis: Axis) -> MathieuParams {
    perturbed_aq(ion, geom, op, &ideal_coefficients(), axis)
}

/// Lowest-order estimate β ≈ √(a + q²/2).
pub fn beta_approx(p: &MathieuParams) -> Result<f64> {
    let radicand = p.a + 0.5 * p.q * p.q;
    if radicand < 0.0 {
        return Err(Error::Unstable(format!(
            "a + q²/2 = {radicand:.4e} < 0 on axis {}",
            p.axis
        )));
    }
    Ok(radicand.sqrt())
}

/// q² / ((β ± 2)² − a − q² / ((β ± 4)² − a − …)), evaluated bottom-up to `depth` levels.
fn tail(beta: f64, a: f64, q2: f64, sign: f64, depth: usize) -> f64 {
    let mut t = 0.0;
    for k in (1..=depth).rev() {
        let shifted = beta + sign * 2.0 * k as f64;
        t = q2 / (shifted * shifted - a - t);
    }
    t
}

/// Right-hand side a + T₊(β) + T₋(β), with depth grown until the value settles.
fn continued_fraction_rhs(beta: f64, a: f64, q: f64, tol: f64) -> f64 {
    let q2 = q * q;
    let eval = |depth| a + tail(beta, a, q2, 1.0, depth) + tail(beta, a, q2, -1.0, depth);
    let mut prev = eval(1);
    for depth in 2..=MAX_CF_DEPTH {
        let next = eval(depth);
        if (next - prev).abs() <= tol * beta.max(tol) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Solves β² = a + q²/((β+2)² − a − …) + q²/((β−2)² − a − …) by fixed-point
/// iteration seeded with [`beta_approx`] (or 0 when that is undefined).
///
/// Returns β in (0, 1); anything else is reported as [`Error::Unstable`].
pub fn beta_continued_fraction(p: &MathieuParams, tol: f64) -> Result<f64> {
    let unstable = |why: String| Err(Error::Unstable(format!("axis {} (a = {:.5e}, q = {:.5e}): {why}", p.axis, p.a, p.q)));
    if !(p.a.is_finite() && p.q.is_finite()) {
        return unstable("non-finite parameters".into());
    }
    if p.q == 0.0 {
        return if p.a > 0.0 && p.a < 1.0 {
            Ok(p.a.sqrt())
        } else {
            unstable("β outside (0, 1)".into())
        };
    }
    let mut beta = beta_approx(p).unwrap_or(0.0).min(0.999);
    for _ in 0..MAX_FIXED_POINT_ITERATIONS {
        let rhs = continued_fraction_rhs(beta, p.a, p.q, tol);
        if !rhs.is_finite() {
            return unstable("continued fraction diverged".into());
        }
        if rhs <= 0.0 {
            return unstable("β² ≤ 0".into());
        }
        let next = rhs.sqrt();
        // Two successive iterates at or past the β = 1 pole: first region left.
        if beta >= 1.0 && next >= 1.0 {
            return unstable(format!("β = {next:.6} ≥ 1"));
        }
        if (next - beta).abs() < tol {
            return if next > 0.0 && next < 1.0 {
                Ok(next)
            } else {
                unstable(format!("β = {next:.6} outside (0, 1)"))
            };
        }
        beta = next;
    }
    unstable("fixed-point iteration did not converge".into())
}

pub fn is_stable(p: &MathieuParams) -> bool {
    beta_continued_fraction(p, DEFAULT_CF_TOLERANCE).is_ok()
}

/// ω/2π = β·(Ω/2π)/2.
pub fn secular_frequency(beta: f64, op: &OperatingPoint) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Unstable(format!("β = {beta} outside the first stability region")));
    }
    Ok(0.5 * beta * op.drive_frequency_hz())
}

/// β and secular frequency from the continued fraction; `stable = false`
/// (and NaN values) outside the first stability region.
pub fn secular(p: &MathieuParams, op: &OperatingPoint) -> SecularResult {
    match beta_continued_fraction(p, DEFAULT_CF_TOLERANCE) {
        Ok(beta) => SecularResult {
            beta,
            secular_frequency: 0.5 * beta * op.drive_frequency_hz(),
            stable: true,
        },
        Err(_) => SecularResult {
            beta: f64::NAN,
            secular_frequency: f64::NAN,
            stable: false,
        },
    }
}

/// Per-axis summary used by the `aq` report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisEvaluation {
    pub axis: Axis,
    pub a: f64,
    pub q: f64,
    pub beta_approx: Option<f64>,
    pub beta: Option<f64>,
    pub secular_frequency_hz: Option<f64>,
    pub stable: bool,
}

pub fn evaluate_axes(
    ion: &IonSpecies,
    geom: &TrapGeometry,
    op: &OperatingPoint,
    coeffs: &MultipoleCoefficients,
) -> Vec<AxisEvaluation> {
    Axis::ALL
        .into_iter()
        .map(|axis| {
            let p = perturbed_aq(ion, geom, op, coeffs, axis);
            let s = secular(&p, op);
            AxisEvaluation {
                axis,
                a: p.a,
                q: p.q,
                beta_approx: beta_approx(&p).ok(),
                beta: s.stable.then_some(s.beta),
                secular_frequency_hz: s.stable.then_some(s.secular_frequency),
                stable: s.stable,
            }
        })
        .collect()
}
