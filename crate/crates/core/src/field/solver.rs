//! Red-black successive over-relaxation on the 7-point Laplace stencil.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::grid::GridSpec;
use super::mask::{ElectrodeMask, NodeClass};
use crate::error::{invalid, Error, Result};
use crate::exec::ExecMode;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the largest node change over a full sweep is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relaxation factor; `None` picks 2/(1+π/n) for the largest node count n.
    pub omega: Option<f64>,
    pub exec: ExecMode,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            omega: None,
            exec: ExecMode::default(),
        }
    }
}

pub fn default_omega(spec: &GridSpec) -> f64 {
    let n = spec.nx.max(spec.ny).max(spec.nz) as f64;
    2.0 / (1.0 + PI / n)
}

/// Solved basis potential on the grid. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub mask: ElectrodeMask,
    pub values: Vec<f64>,
    /// Largest node change during the final sweep.
    pub converged_residual: f64,
    pub iterations: usize,
}

impl PotentialGrid {
    pub fn spec(&self) -> &GridSpec {
        &self.mask.spec
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.mask.spec.index(i, j, k)]
    }

    pub fn center_value(&self) -> f64 {
        let [i, j, k] = self.mask.spec.center();
        self.value(i, j, k)
    }

    /// Free nodes within `radius` of the trap centre as (position, value).
    pub fn free_nodes_within(&self, radius: f64) -> Vec<([f64; 3], f64)> {
        let spec = &self.mask.spec;
        let r_sq = radius * radius;
        let mut out = Vec::new();
        for (idx, class) in self.mask.classes.iter().enumerate() {
            if *class != NodeClass::Free {
                continue;
            }
            let [i, j, k] = spec.unravel(idx);
            let p = spec.position(i, j, k);
            if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= r_sq {
                out.push((p, self.values[idx]));
            }
        }
        out
    }

    /// Builds a grid whose free nodes hold `f(x, y, z)`; electrode nodes keep their fixed values.
    pub fn from_fn(mask: ElectrodeMask, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let spec = mask.spec;
        let values = (0..spec.len())
            .map(|idx| match mask.fixed_value(mask.classes[idx]) {
                Some(v) => v,
                None => {
                    let [i, j, k] = spec.unravel(idx);
                    let [x, y, z] = spec.position(i, j, k);
                    f(x, y, z)
                }
            })
            .collect();
        Self {
            mask,
            values,
            converged_residual: 0.0,
            iterations: 0,
        }
    }
}

pub fn solve_laplace(mask: &ElectrodeMask, tolerance: f64, max_iterations: usize) -> Result<PotentialGrid> {
    solve_laplace_with(
        mask,
        &SolverOptions {
            tolerance,
            max_iterations,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_laplace_with(mask: &ElectrodeMask, opts: &SolverOptions) -> Result<PotentialGrid> {
    if !(opts.tolerance > 0.0) {
        return Err(invalid("solver.tolerance", "must be positive"));
    }
    let omega = opts.omega.unwrap_or_else(|| default_omega(&mask.spec));
    if !(omega > 0.0 && omega < 2.0) {
        return Err(invalid("solver.omega", format!("must lie in (0, 2), got {omega}")));
    }

    let mut values = initial_guess(mask);
    let stencil = Stencil::new(&mask.spec, omega);
    let free: Vec<bool> = mask.classes.iter().map(|c| *c == NodeClass::Free).collect();

    let mut scratch = if opts.exec.is_parallel() {
        values.clone()
    } else {
        Vec::new()
    };
    let mut residual = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        residual = 0.0;
        for color in 0..2 {
            let delta = if opts.exec.is_parallel() {
                half_sweep_parallel(&stencil, &free, &mut values, &mut scratch, color)
            } else {
                half_sweep_in_place(&stencil, &free, &mut values, color)
            };
            residual = residual.max(delta);
        }
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.tolerance {
            return Ok(PotentialGrid {
                mask: mask.clone(),
                values,
                converged_residual: residual,
                iterations: iteration,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual,
    })
}

/// Free nodes start from the ideal quadrupole solution clamped to the electrode range.
fn initial_guess(mask: &ElectrodeMask) -> Vec<f64> {
    let spec = &mask.spec;
    let (lo, hi) = mask.fixed_range();
    let p = mask.potentials;
    let r0_sq = mask.r0 * mask.r0;
    (0..spec.len())
        .map(|idx| match mask.fixed_value(mask.classes[idx]) {
            Some(v) => v,
            None => {
                let [i, j, k] = spec.unravel(idx);
                let [x, y, z] = spec.position(i, j, k);
                let s = 0.5 + (x * x + y * y - 2.0 * z * z) / (2.0 * r0_sq);
                (p.endcap + (p.ring - p.endcap) * s).clamp(lo, hi)
            }
        })
        .collect()
}

struct Stencil {
    nx: usize,
    ny: usize,
    nz: usize,
    wx: f64,
    wy: f64,
    wz: f64,
    omega: f64,
}

impl Stencil {
    fn new(spec: &GridSpec, omega: f64) -> Self {
        let h = spec.spacing();
        let inv = h.map(|h| 1.0 / (h * h));
        let norm = 2.0 * (inv[0] + inv[1] + inv[2]);
        Self {
            nx: spec.nx,
            ny: spec.ny,
            nz: spec.nz,
            wx: inv[0] / norm,
            wy: inv[1] / norm,
            wz: inv[2] / norm,
            omega,
        }
    }

    #[inline]
    fn plane(&self) -> usize {
        self.nx * self.ny
    }

    /// Relaxes every free node of `color` in plane `k` in place. Colour-c
    /// nodes only read colour-(1-c) neighbours, so update order is irrelevant.
    #[inline]
    fn relax_plane(&self, k: usize, color: usize, free: &[bool], below: &[f64], above: &[f64], cur: &mut [f64]) -> f64 {
        let nx = self.nx;
        let base = k * self.plane();
        let mut max_delta = 0.0f64;
        for j in 1..self.ny - 1 {
            let row = j * nx;
            let start = 1 + (1 + j + k + color) % 2;
            let mut i = start;
            while i < nx - 1 {
                let p = row + i;
                if free[base + p] {
                    let old = cur[p];
                    let gs = self.wx * (cur[p - 1] + cur[p + 1])
                        + self.wy * (cur[p - nx] + cur[p + nx])
                        + self.wz * (below[p] + above[p]);
                    let new = old + self.omega * (gs - old);
                    cur[p] = new;
                    max_delta = max_delta.max((new - old).abs());
                }
                i += 2;
            }
        }
        max_delta
    }
}

fn half_sweep_in_place(st: &Stencil, free: &[bool], values: &mut [f64], color: usize) -> f64 {
    let plane = st.plane();
    let mut max_delta = 0.0f64;
    for k in 1..st.nz - 1 {
        let (head, rest) = values.split_at_mut(k * plane);
        let (cur, tail) = rest.split_at_mut(plane);
        let below = &head[(k - 1) * plane..];
        let d = st.relax_plane(k, color, free, below, &tail[..plane], cur);
        max_delta = max_delta.max(d);
    }
    max_delta
}

#[cfg(feature = "parallel")]
fn half_sweep_parallel(st: &Stencil, free: &[bool], values: &mut Vec<f64>, scratch: &mut Vec<f64>, color: usize) -> f64 {
    use rayon::prelude::*;
    let plane = st.plane();
    let src: &[f64] = values;
    let max_delta = scratch
        .par_chunks_mut(plane)
        .enumerate()
        .map(|(k, out)| {
            let cur = &src[k * plane..(k + 1) * plane];
            out.copy_from_slice(cur);
            if k == 0 || k == st.nz - 1 {
                return 0.0;
            }
            let below = &src[(k - 1) * plane..k * plane];
            let above = &src[(k + 1) * plane..(k + 2) * plane];
            st.relax_plane(k, color, free, below, above, out)
        })
        .reduce(|| 0.0f64, f64::max);
    std::mem::swap(values, scratch);
    max_delta
}

#[cfg(not(feature = "parallel"))]
fn half_sweep_parallel(st: &Stencil, free: &[bool], values: &mut Vec<f64>, _scratch: &mut Vec<f64>, color: usize) -> f64 {
    half_sweep_in_place(st, free, values, color)
}

/// Trilinear interpolation of the node values at (x, y, z) metres.
pub fn sample_potential(grid: &PotentialGrid, x: f64, y: f64, z: f64) -> Result<f64> {
    let spec = &grid.mask.spec;
    if !(x.is_finite() && y.is_finite() && z.is_finite()) || !spec.contains([x, y, z]) {
        return Err(Error::OutsideGrid { x, y, z });
    }
    let h = spec.spacing();
    let dims = spec.dims();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for (axis, c) in [x, y, z].into_iter().enumerate() {
        let s = (c + spec.extent) / h[axis];
        let cell = (s.floor() as usize).min(dims[axis] - 2);
        base[axis] = cell;
        frac[axis] = s - cell as f64;
    }
    let nearest = |axis: usize| base[axis] + usize::from(frac[axis] >= 0.5);
    if grid.mask.class_at(nearest(0), nearest(1), nearest(2)).is_electrode() {
        return Err(Error::InsideElectrode { x, y, z });
    }
    let mut acc = 0.0;
    for dk in 0..2 {
        let wz = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
        for dj in 0..2 {
            let wy = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
            for di in 0..2 {
                let wx = if di == 0 { 1.0 - frac[0] } else { frac[0] };
                let w = wx * wy * wz;
                if w != 0.0 {
                    acc += w * grid.value(base[0] + di, base[1] + dj, base[2] + dk);
                }
            }
        }
    }
    Ok(acc)
}
