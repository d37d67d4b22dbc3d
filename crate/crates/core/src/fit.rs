//! Least-squares multipole fit of a solved basis potential.
//!
//! The model, in units of the ring drive φ₀, is
//!
//! ```text
//! φ/φ₀ = α₀ + (α₁x + γ₁z)/r0 + (α₂x² + β₂y² + γ₂z²)/r0²
//! ```
//!
//! Dipole terms along y are absent because the filament keeps the XZ plane
//! as a mirror plane. The fit is solved by Householder QR; coefficient
//! uncertainties come from the residual variance and diag((RᵀR)⁻¹).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::field::PotentialGrid;

pub const COEFFICIENT_NAMES: [&str; 6] = ["alpha0", "alpha1", "gamma1", "alpha2", "beta2", "gamma2"];

/// Default fit sphere radius as a fraction of r0.
pub const DEFAULT_REGION_FRACTION: f64 = 0.25;

pub const MIN_SAMPLES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultipoleCoefficients {
    pub alpha0: f64,
    pub alpha1: f64,
    pub gamma1: f64,
    pub alpha2: f64,
    pub beta2: f64,
    pub gamma2: f64,
    /// One-sigma uncertainties in [`COEFFICIENT_NAMES`] order.
    pub sigma: [f64; 6],
}

impl MultipoleCoefficients {
    pub fn from_values(values: [f64; 6], sigma: [f64; 6]) -> Self {
        let [alpha0, alpha1, gamma1, alpha2, beta2, gamma2] = values;
        Self {
            alpha0,
            alpha1,
            gamma1,
            alpha2,
            beta2,
            gamma2,
            sigma,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        [self.alpha0, self.alpha1, self.gamma1, self.alpha2, self.beta2, self.gamma2]
    }

    /// α₂ + β₂ + γ₂, zero for a harmonic quadrupole.
    pub fn laplacian_trace(&self) -> f64 {
        self.alpha2 + self.beta2 + self.gamma2
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn csv_header() -> String {
        let mut cols: Vec<String> = COEFFICIENT_NAMES.iter().map(|s| s.to_string()).collect();
        cols.extend(COEFFICIENT_NAMES.iter().map(|s| format!("sigma_{s}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        self.values()
            .iter()
            .chain(self.sigma.iter())
            .map(|v| format!("{v:.10e}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::csv_header())?;
        writeln!(w, "{}", self.csv_row())?;
        Ok(())
    }
}

/// Perfect hyperbolic trap with ring at 1 and caps at 0: ½ + (x²+y²−2z²)/(2r0²).
pub fn ideal_coefficients() -> MultipoleCoefficients {
    MultipoleCoefficients::from_values([0.5, 0.0, 0.0, 0.5, 0.5, -1.0], [0.0; 6])
}

/// Published least-squares coefficients for the trap with the filament raised 5 mm.
pub fn paper_table_coefficients() -> MultipoleCoefficients {
    MultipoleCoefficients::from_values(
        [-0.1037, -0.0823, 0.2047, 0.6902, 0.5500, -1.2405],
        [0.0008, 0.0012, 0.0014, 0.0041, 0.0041, 0.0064],
    )
}

/// A monomial x^px·y^py·z^pz in coordinates scaled by r0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Monomial {
    pub px: u8,
    pub py: u8,
    pub pz: u8,
}

impl Monomial {
    pub const fn new(px: u8, py: u8, pz: u8) -> Self {
        Self { px, py, pz }
    }

    pub fn degree(&self) -> u8 {
        self.px + self.py + self.pz
    }

    pub fn eval(&self, u: [f64; 3]) -> f64 {
        u[0].powi(self.px.into()) * u[1].powi(self.py.into()) * u[2].powi(self.pz.into())
    }
}

/// Basis of the multipole model, in coefficient order.
pub const QUADRUPOLE_BASIS: [Monomial; 6] = [
    Monomial::new(0, 0, 0),
    Monomial::new(1, 0, 0),
    Monomial::new(0, 0, 1),
    Monomial::new(2, 0, 0),
    Monomial::new(0, 2, 0),
    Monomial::new(0, 0, 2),
];

/// The quadrupole basis followed by every other monomial of degree ≤ `order`
/// that is even in y.
pub fn extended_basis(order: u8) -> Vec<Monomial> {
    let mut basis = QUADRUPOLE_BASIS.to_vec();
    for degree in 0..=order {
        for px in (0..=degree).rev() {
            for py in (0..=degree - px).step_by(2) {
                let m = Monomial::new(px, py, degree - px - py);
                if !basis.contains(&m) {
                    basis.push(m);
                }
            }
        }
    }
    basis
}

/// Result of a generic polynomial least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFit {
    pub basis: Vec<Monomial>,
    pub coefficients: Vec<f64>,
    pub sigma: Vec<f64>,
    pub rms_residual: f64,
    pub max_residual: f64,
    pub sample_count: usize,
}

impl PolynomialFit {
    pub fn coefficient(&self, m: Monomial) -> Option<(f64, f64)> {
        let idx = self.basis.iter().position(|b| *b == m)?;
        Some((self.coefficients[idx], self.sigma[idx]))
    }
}

/// Fits `basis` (in r0-scaled coordinates) to `samples` of (position, value).
pub fn fit_polynomial(samples: &[([f64; 3], f64)], basis: &[Monomial], r0: f64) -> Result<PolynomialFit> {
    let p = basis.len();
    let required = (10 * p).max(MIN_SAMPLES);
    if samples.len() < required {
        return Err(Error::TooFewSamples {
            found: samples.len(),
            required,
        });
    }
    let n = samples.len();
    let scaled = |pos: [f64; 3]| pos.map(|c| c / r0);
    let design = DMatrix::from_fn(n, p, |row, col| basis[col].eval(scaled(samples[row].0)));
    let rhs = DVector::from_iterator(n, samples.iter().map(|s| s.1));

    let qr = design.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if diag_max == 0.0 || r.diagonal().iter().any(|v| v.abs() <= 1e-12 * diag_max) {
        return Err(Error::RankDeficient);
    }
    let qtb = qr.q().transpose() * &rhs;
    let coeffs = r.solve_upper_triangular(&qtb).ok_or(Error::RankDeficient)?;

    let residual = &rhs - &design * &coeffs;
    let ssr = residual.norm_squared();
    let rms = (ssr / n as f64).sqrt();
    let max = residual.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // diag((RᵀR)⁻¹) = squared row norms of R⁻¹.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    let variance = if n > p { ssr / (n - p) as f64 } else { 0.0 };
    let sigma = (0..p)
        .map(|i| (variance * r_inv.row(i).norm_squared()).sqrt())
        .collect();

    Ok(PolynomialFit {
        basis: basis.to_vec(),
        coefficients: coeffs.iter().copied().collect(),
        sigma,
        rms_residual: rms,
        max_residual: max,
        sample_count: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub coefficients: MultipoleCoefficients,
    pub rms_residual: f64,
    pub max_residual: f64,
    pub sample_count: usize,
    pub fit_region_radius: f64,
}

/// Largest fit radius allowed for `grid`: half the smaller of the box
/// half-width and r0 minus the filament's rise above the lower cap.
pub fn max_region_radius(grid: &PotentialGrid, r0: f64) -> f64 {
    let intrusion = grid.mask.filament.map_or(0.0, |f| f.intrusion());
    0.5 * (r0 - intrusion).min(grid.spec().extent)
}

pub fn fit_multipoles(grid: &PotentialGrid, region_radius: f64, r0: f64) -> Result<FitReport> {
    if !(r0 > 0.0) {
        return Err(invalid("r0", "must be positive"));
    }
    let limit = max_region_radius(grid, r0);
    if !(region_radius > 0.0 && region_radius <= limit * (1.0 + 1e-12)) {
        return Err(invalid(
            "fit.region_radius",
            format!("must lie in (0, {limit:.4e}] m, got {region_radius:.4e} m"),
        ));
    }
    let samples = grid.free_nodes_within(region_radius);
    let fit = fit_polynomial(&samples, &QUADRUPOLE_BASIS, r0)?;
    let values: [f64; 6] = fit.coefficients[..6].try_into().expect("six coefficients");
    let sigma: [f64; 6] = fit.sigma[..6].try_into().expect("six sigmas");
    Ok(FitReport {
        coefficients: MultipoleCoefficients::from_values(values, sigma),
        rms_residual: fit.rms_residual,
        max_residual: fit.max_residual,
        sample_count: fit.sample_count,
        fit_region_radius: region_radius,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderResidual {
    pub order: u8,
    pub terms: usize,
    pub rms_residual: f64,
    pub max_residual: f64,
    /// (base rms − this rms) / base rms.
    pub relative_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualByOrder {
    pub base_rms: f64,
    pub orders: Vec<OrderResidual>,
}

/// Refits the same samples with the basis completed through orders 3 and 4
/// and reports how much each extension lowers the residual. Diagnostic only;
/// the dynamics always use the quadrupole fit.
pub fn residual_by_order(grid: &PotentialGrid, report: &FitReport) -> Result<ResidualByOrder> {
    let r0 = grid.mask.r0;
    let samples = grid.free_nodes_within(report.fit_region_radius);
    let base = fit_polynomial(&samples, &QUADRUPOLE_BASIS, r0)?;
    let orders = [3u8, 4]
        .into_iter()
        .map(|order| {
            let fit = fit_polynomial(&samples, &extended_basis(order), r0)?;
            let reduction = if base.rms_residual > 0.0 {
                (base.rms_residual - fit.rms_residual) / base.rms_residual
            } else {
                0.0
            };
            Ok(OrderResidual {
                order,
                terms: fit.basis.len(),
                rms_residual: fit.rms_residual,
                max_residual: fit.max_residual,
                relative_reduction: reduction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResidualByOrder {
        base_rms: base.rms_residual,
        orders,
    })
}
