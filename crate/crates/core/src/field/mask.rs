use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{Error, Result};
use crate::model::{ElectrodePotentials, FilamentConfig, TrapGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum NodeClass {
    Free = 0,
    Ring = 1,
    UpperCap = 2,
    LowerCap = 3,
    Filament = 4,
    OuterBoundary = 5,
}

impl NodeClass {
    pub const ALL: [NodeClass; 6] = [
        NodeClass::Free,
        NodeClass::Ring,
        NodeClass::UpperCap,
        NodeClass::LowerCap,
        NodeClass::Filament,
        NodeClass::OuterBoundary,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }

    pub fn is_electrode(self) -> bool {
        !matches!(self, NodeClass::Free | NodeClass::OuterBoundary)
    }
}

/// Per-node classification of the grid plus the potential each fixed class holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeMask {
    pub spec: GridSpec,
    pub classes: Vec<NodeClass>,
    pub potentials: ElectrodePotentials,
    pub r0: f64,
    pub z0: f64,
    pub filament: Option<FilamentConfig>,
}

impl ElectrodeMask {
    /// Dirichlet value for a fixed class, `None` for free nodes.
    pub fn fixed_value(&self, class: NodeClass) -> Option<f64> {
        match class {
            NodeClass::Free => None,
            NodeClass::Ring => Some(self.potentials.ring),
            NodeClass::UpperCap | NodeClass::LowerCap => Some(self.potentials.endcap),
            NodeClass::Filament => Some(self.potentials.filament),
            NodeClass::OuterBoundary => Some(0.0),
        }
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    pub fn class_at(&self, i: usize, j: usize, k: usize) -> NodeClass {
        self.classes[self.spec.index(i, j, k)]
    }

    /// Range of fixed potentials, i.e. the bounds of the discrete maximum principle.
    pub fn fixed_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for class in NodeClass::ALL {
            if let Some(v) = self.fixed_value(class) {
                if self.count(class) > 0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }
}

/// Node index range covering `[lo, hi]` along one axis. Falls back to the
/// single nearest node when the interval is thinner than the spacing.
fn covered_nodes(spec: &GridSpec, axis: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
    let n = spec.dims()[axis];
    let h = spec.spacing()[axis];
    let to_index = |x: f64| (x + spec.extent) / h;
    let first = to_index(lo).ceil().max(0.0);
    let last = to_index(hi).floor().min((n - 1) as f64);
    if first <= last {
        return Some((first as usize, last as usize));
    }
    let mid = to_index(0.5 * (lo + hi)).round();
    if (0.0..=(n - 1) as f64).contains(&mid) {
        Some((mid as usize, mid as usize))
    } else {
        None
    }
}

/// Classifies every node of `spec` against the hyperbolic electrodes and the filament slab.
pub fn discretize_geometry(geom: &TrapGeometry, spec: &GridSpec) -> Result<ElectrodeMask> {
    geom.validate()?;
    if spec.extent < geom.r0 {
        return Err(Error::DegenerateGeometry(format!(
            "box half-width {:.4e} m is smaller than r0 = {:.4e} m",
            spec.extent, geom.r0
        )));
    }
    spec.validate(geom.r0)?;

    let r0_sq = geom.r0 * geom.r0;
    let cap_sq = 2.0 * geom.z0 * geom.z0;
    let trunc_sq = geom.truncation_radius * geom.truncation_radius;
    let mut classes = vec![NodeClass::Free; spec.len()];

    for k in 0..spec.nz {
        let z = spec.coord(2, k);
        for j in 0..spec.ny {
            let y = spec.coord(1, j);
            for i in 0..spec.nx {
                let idx = spec.index(i, j, k);
                let x = spec.coord(0, i);
                let rho_sq = x * x + y * y;
                if rho_sq > trunc_sq {
                    if spec.is_outer(i, j, k) {
                        classes[idx] = NodeClass::OuterBoundary;
                    }
                    continue;
                }
                if rho_sq - 2.0 * z * z >= r0_sq {
                    classes[idx] = NodeClass::Ring;
                } else if 2.0 * z * z - rho_sq >= cap_sq {
                    classes[idx] = if z > 0.0 {
                        NodeClass::UpperCap
                    } else {
                        NodeClass::LowerCap
                    };
                } else if spec.is_outer(i, j, k) {
                    classes[idx] = NodeClass::OuterBoundary;
                }
            }
        }
    }

    if let Some(f) = &geom.filament {
        let (zb, zt) = f.z_range(geom.z0);
        let xs = covered_nodes(spec, 0, f.lateral_offset_x - 0.5 * f.length, f.lateral_offset_x + 0.5 * f.length);
        let ys = covered_nodes(spec, 1, -0.5 * f.width, 0.5 * f.width);
        let zs = covered_nodes(spec, 2, zb, zt);
        if let (Some(xs), Some(ys), Some(zs)) = (xs, ys, zs) {
            for k in zs.0..=zs.1 {
                for j in ys.0..=ys.1 {
                    for i in xs.0..=xs.1 {
                        if !spec.is_outer(i, j, k) {
                            classes[spec.index(i, j, k)] = NodeClass::Filament;
                        }
                    }
                }
            }
        }
    }

    let mask = ElectrodeMask {
        spec: *spec,
        classes,
        potentials: geom.electrode_potentials,
        r0: geom.r0,
        z0: geom.z0,
        filament: geom.filament,
    };

    let mut required = vec![NodeClass::Ring, NodeClass::UpperCap, NodeClass::LowerCap];
    if geom.filament.is_some() {
        required.push(NodeClass::Filament);
    }
    for class in required {
        if mask.count(class) == 0 {
            return Err(Error::DegenerateGeometry(format!(
                "no {class:?} nodes on the grid; grid too coarse or box too small"
            )));
        }
    }
    let [ci, cj, ck] = spec.center();
    if mask.class_at(ci, cj, ck) != NodeClass::Free {
        return Err(Error::DegenerateGeometry("trap centre is inside an electrode".into()));
    }
    Ok(mask)
}
