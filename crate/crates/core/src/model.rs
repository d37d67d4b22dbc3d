//! Physical constants, ion species, trap geometry and drive parameters.
//!
//! Electrode potentials are dimensionless multiples of the ring drive: the
//! ring sits at 1 and the end-caps and filament at 0. Volts only enter
//! through [`OperatingPoint`].

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};

/// CODATA 2018 exact elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// CODATA 2018 atomic mass constant, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Atomic mass of Eu-151 in u.
pub const EU151_MASS_U: f64 = 150.9199;
/// Atomic mass of Eu-153 in u.
pub const EU153_MASS_U: f64 = 152.9212;

/// Drive frequency of the reference trap, Hz.
pub const PAPER_DRIVE_FREQUENCY_HZ: f64 = 500.0e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub elementary_charge: f64,
    pub atomic_mass_unit: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants {
        elementary_charge: ELEMENTARY_CHARGE,
        atomic_mass_unit: ATOMIC_MASS_UNIT,
    };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA_2018
    }
}

/// A trapped species. Mass in kg, charge in C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    pub mass: f64,
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, label: impl Into<String>) -> Result<Self> {
        let ion = Self {
            mass,
            charge,
            label: label.into(),
        };
        ion.validate()?;
        Ok(ion)
    }

    /// Builds a species from its mass in atomic mass units and its charge state.
    pub fn from_mass_units(mass_u: f64, charge_state: i32, label: impl Into<String>) -> Result<Self> {
        Self::new(
            mass_u * ATOMIC_MASS_UNIT,
            f64::from(charge_state) * ELEMENTARY_CHARGE,
            label,
        )
    }

    pub fn europium_151() -> Self {
        Self::from_mass_units(EU151_MASS_U, 1, "151Eu+").expect("valid constant species")
    }

    pub fn europium_153() -> Self {
        Self::from_mass_units(EU153_MASS_U, 1, "153Eu+").expect("valid constant species")
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(invalid("ion.mass", format!("must be positive, got {}", self.mass)));
        }
        if !self.charge.is_finite() || self.charge == 0.0 {
            return Err(invalid("ion.charge", "must be finite and non-zero"));
        }
        Ok(())
    }
}

impl Default for IonSpecies {
    fn default() -> Self {
        Self::europium_151()
    }
}

/// Rectangular slab electrode above the lower end-cap.
///
/// `length` runs along x, `width` along y. The slab's lower face sits
/// `height_above_lower_endcap` above the lower end-cap apex at z = -z0, and
/// the slab is centred at (`lateral_offset_x`, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilamentConfig {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
    pub height_above_lower_endcap: f64,
    pub lateral_offset_x: f64,
}

impl FilamentConfig {
    /// 22 mm x 8 mm, 0.5 mm thick, 5 mm above the lower end-cap, 6 mm off axis.
    pub fn paper() -> Self {
        Self {
            length: 22.0e-3,
            width: 8.0e-3,
            thickness: 0.5e-3,
            height_above_lower_endcap: 5.0e-3,
            lateral_offset_x: 6.0e-3,
        }
    }

    pub fn with_height(self, height: f64) -> Self {
        Self {
            height_above_lower_endcap: height,
            ..self
        }
    }

    /// z range `[bottom, top]` of the slab for a trap with half-gap `z0`.
    pub fn z_range(&self, z0: f64) -> (f64, f64) {
        let bottom = -z0 + self.height_above_lower_endcap;
        (bottom, bottom + self.thickness)
    }

    /// How far the slab's top face rises above the lower end-cap apex.
    pub fn intrusion(&self) -> f64 {
        self.height_above_lower_endcap + self.thickness
    }
}

/// Electrode potentials in units of the ring drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectrodePotentials {
    pub ring: f64,
    pub endcap: f64,
    pub filament: f64,
}

impl Default for ElectrodePotentials {
    fn default() -> Self {
        Self {
            ring: 1.0,
            endcap: 0.0,
            filament: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    /// Ring radius, m.
    pub r0: f64,
    /// Half separation of the end-caps, m.
    pub z0: f64,
    /// Radial distance from the axis beyond which the hyperbolic electrodes stop.
    pub truncation_radius: f64,
    pub filament: Option<FilamentConfig>,
    pub electrode_potentials: ElectrodePotentials,
}

impl TrapGeometry {
    /// Hyperbolic trap with r0 = sqrt(2)·z0 and no filament.
    pub fn ideal(r0: f64) -> Self {
        Self {
            r0,
            z0: r0 / SQRT_2,
            truncation_radius: 2.0 * r0,
            filament: None,
            electrode_potentials: ElectrodePotentials::default(),
        }
    }

    pub fn without_filament(self) -> Self {
        Self {
            filament: None,
            ..self
        }
    }

    pub fn with_filament(self, filament: FilamentConfig) -> Self {
        Self {
            filament: Some(filament),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(invalid("geometry.r0", "must be positive"));
        }
        if !(self.z0.is_finite() && self.z0 > 0.0) {
            return Err(invalid("geometry.z0", "must be positive"));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(invalid("geometry.truncation_radius", "must be positive"));
        }
        if let Some(f) = &self.filament {
            if !(f.length > 0.0 && f.width > 0.0 && f.thickness > 0.0) {
                return Err(invalid("geometry.filament", "all extents must be positive"));
            }
            let h = f.height_above_lower_endcap;
            if !(0.0..self.z0).contains(&h) {
                return Err(invalid(
                    "geometry.filament.height_above_lower_endcap",
                    format!("must lie in [0, z0 = {:.6e}), got {h:.6e}", self.z0),
                ));
            }
        }
        Ok(())
    }
}

/// The reference trap: r0 = 20 mm, r0/z0 = sqrt(2), filament raised 5 mm.
pub fn make_paper_trap() -> TrapGeometry {
    TrapGeometry::ideal(20.0e-3).with_filament(FilamentConfig::paper())
}

/// DC and RF amplitudes on the ring (end-caps grounded).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub u_dc: f64,
    pub v_rf: f64,
    /// Ω in rad/s.
    pub drive_angular_frequency: f64,
}

impl OperatingPoint {
    pub fn new(u_dc: f64, v_rf: f64, drive_angular_frequency: f64) -> Result<Self> {
        let op = Self {
            u_dc,
            v_rf,
            drive_angular_frequency,
        };
        op.validate()?;
        Ok(op)
    }

    /// Operating point at the reference 500 kHz drive.
    pub fn paper(u_dc: f64, v_rf: f64) -> Self {
        Self {
            u_dc,
            v_rf,
            drive_angular_frequency: 2.0 * PI * PAPER_DRIVE_FREQUENCY_HZ,
        }
    }

    pub fn with_voltages(self, u_dc: f64, v_rf: f64) -> Self {
        Self { u_dc, v_rf, ..self }
    }

    pub fn drive_frequency_hz(&self) -> f64 {
        self.drive_angular_frequency / (2.0 * PI)
    }

    pub fn rf_period(&self) -> f64 {
        2.0 * PI / self.drive_angular_frequency
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drive_angular_frequency.is_finite() && self.drive_angular_frequency > 0.0) {
            return Err(invalid("operating_point.drive_angular_frequency", "must be positive"));
        }
        if !(self.u_dc.is_finite() && self.v_rf.is_finite()) {
            return Err(invalid("operating_point", "voltages must be finite"));
        }
        Ok(())
    }
}

/// φ₀(t) = U_dc + V_rf·cos(Ωt), the ring potential in volts.
pub fn instantaneous_ring_potential(op: &OperatingPoint, t: f64) -> f64 {
    op.u_dc + op.v_rf * (op.drive_angular_frequency * t).cos()
}
