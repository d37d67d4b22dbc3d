//! `PTGRID01` binary dump and axis-profile CSV export.
//!
//! Dump layout, all little-endian:
//!
//! | bytes | content |
//! |---|---|
//! | 8 | magic `PTGRID01` |
//! | 3 × u32 | nx, ny, nz |
//! | 2 × f64 | extent, r0 (m) |
//! | nx·ny·nz × f64 | node values, x fastest |
//! | nx·ny·nz × u8 | node class ([`NodeClass`] discriminant) |

use std::io::{Read, Write};

use super::grid::GridSpec;
use super::mask::{ElectrodeMask, NodeClass};
use super::solver::PotentialGrid;
use crate::error::{Error, Result};
use crate::model::ElectrodePotentials;

pub const MAGIC: &[u8; 8] = b"PTGRID01";

pub fn write_grid_dump<W: Write>(grid: &PotentialGrid, mut w: W) -> Result<()> {
    let spec = grid.spec();
    w.write_all(MAGIC)?;
    for n in spec.dims() {
        let n = u32::try_from(n).map_err(|_| Error::Format("node count exceeds u32".into()))?;
        w.write_all(&n.to_le_bytes())?;
    }
    w.write_all(&spec.extent.to_le_bytes())?;
    w.write_all(&grid.mask.r0.to_le_bytes())?;
    let mut buf = Vec::with_capacity(spec.len() * 8);
    for v in &grid.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    let classes: Vec<u8> = grid.mask.classes.iter().map(|c| *c as u8).collect();
    w.write_all(&classes)?;
    w.flush()?;
    Ok(())
}

/// Raw contents of a dump.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub spec: GridSpec,
    pub r0: f64,
    pub values: Vec<f64>,
    pub classes: Vec<NodeClass>,
}

impl GridDump {
    /// Rebuilds a [`PotentialGrid`]. Electrode potentials are recovered from
    /// the stored node values; filament placement is not part of the format.
    pub fn into_potential_grid(self) -> PotentialGrid {
        let first = |class: NodeClass, default: f64| {
            self.classes
                .iter()
                .position(|c| *c == class)
                .map_or(default, |idx| self.values[idx])
        };
        let defaults = ElectrodePotentials::default();
        let potentials = ElectrodePotentials {
            ring: first(NodeClass::Ring, defaults.ring),
            endcap: first(NodeClass::UpperCap, defaults.endcap),
            filament: first(NodeClass::Filament, defaults.filament),
        };
        PotentialGrid {
            mask: ElectrodeMask {
                spec: self.spec,
                classes: self.classes,
                potentials,
                r0: self.r0,
                z0: self.r0 / std::f64::consts::SQRT_2,
                filament: None,
            },
            values: self.values,
            converged_residual: f64::NAN,
            iterations: 0,
        }
    }
}

pub fn read_grid_dump<R: Read>(mut r: R) -> Result<GridDump> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut u32buf = [0u8; 4];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u32buf)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let mut f64buf = [0u8; 8];
    r.read_exact(&mut f64buf)?;
    let extent = f64::from_le_bytes(f64buf);
    r.read_exact(&mut f64buf)?;
    let r0 = f64::from_le_bytes(f64buf);

    let spec = GridSpec {
        nx: dims[0],
        ny: dims[1],
        nz: dims[2],
        extent,
    };
    let n = spec.len();
    let mut raw = vec![0u8; n * 8];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let mut raw = vec![0u8; n];
    r.read_exact(&mut raw)?;
    let classes = raw
        .into_iter()
        .map(|b| NodeClass::from_byte(b).ok_or_else(|| Error::Format(format!("unknown node class {b}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridDump {
        spec,
        r0,
        values,
        classes,
    })
}

/// Writes the potential along the x, y and z lines through the centre,
/// alongside the ideal quadrupole value ½ + (x²+y²−2z²)/(2r0²).
pub fn write_axis_profiles<W: Write>(grid: &PotentialGrid, mut w: W) -> Result<()> {
    let spec = grid.spec();
    let r0_sq = grid.mask.r0 * grid.mask.r0;
    let c = spec.center();
    writeln!(w, "axis,coordinate_m,potential,ideal_potential,node_class")?;
    for (axis, name) in ["x", "y", "z"].into_iter().enumerate() {
        for n in 0..spec.dims()[axis] {
            let mut idx = c;
            idx[axis] = n;
            let [x, y, z] = spec.position(idx[0], idx[1], idx[2]);
            let ideal = 0.5 + (x * x + y * y - 2.0 * z * z) / (2.0 * r0_sq);
            writeln!(
                w,
                "{name},{:.9e},{:.12e},{:.12e},{}",
                spec.coord(axis, n),
                grid.value(idx[0], idx[1], idx[2]),
                ideal,
                grid.mask.class_at(idx[0], idx[1], idx[2]) as u8
            )?;
        }
    }
    Ok(())
}
