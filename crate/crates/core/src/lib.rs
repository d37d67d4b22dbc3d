//! Secular-frequency shifts of ions in a geometrically perturbed 3-D Paul trap.
//!
//! The pipeline mirrors a SIMION-style workflow:
//!
//! 1. [`field`]: rasterize the hyperbolic electrodes (plus an optional
//!    grounded filament slab) and relax the Laplace equation.
//! 2. [`fit`]: least-squares fit of the solved potential to a
//!    quadrupole-order multipole expansion.
//! 3. [`dynamics`]: integrate single-ion trajectories in the fitted,
//!    RF-driven potential with fixed-step RK4.
//! 4. [`spectral`]: read secular frequencies off the trajectory spectra.
//!
//! [`mathieu`] holds the ideal-trap theory used for comparison, and
//! [`experiments`] drives equi-frequency traces and filament-height sweeps.

pub mod dynamics;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod field;
pub mod fit;
pub mod mathieu;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::ExecMode;
pub use fit::{ideal_coefficients, paper_table_coefficients, MultipoleCoefficients};
pub use mathieu::Axis;
pub use model::{make_paper_trap, IonSpecies, OperatingPoint, TrapGeometry};
