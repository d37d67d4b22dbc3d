use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Uniform node lattice over the cube [-extent, extent]³ centred on the trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Half-width of the simulation box, m.
    pub extent: f64,
}

pub const MIN_NODES: usize = 33;

impl GridSpec {
    pub fn cubic(n: usize, extent: f64) -> Self {
        Self {
            nx: n,
            ny: n,
            nz: n,
            extent,
        }
    }

    /// 129³ nodes over ±1.2·r0.
    pub fn default_for(r0: f64) -> Self {
        Self::cubic(129, 1.2 * r0)
    }

    pub fn validate(&self, r0: f64) -> Result<()> {
        for (name, n) in [("grid.nx", self.nx), ("grid.ny", self.ny), ("grid.nz", self.nz)] {
            if n < MIN_NODES || n % 2 == 0 {
                return Err(invalid(name, format!("node count must be odd and >= {MIN_NODES}, got {n}")));
            }
        }
        if !(self.extent.is_finite() && self.extent >= 1.05 * r0) {
            return Err(invalid(
                "grid.extent",
                format!("must be >= 1.05·r0 = {:.4e} m, got {:.4e} m", 1.05 * r0, self.extent),
            ));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.dims().map(|n| 2.0 * self.extent / (n - 1) as f64)
    }

    /// Flat index, x fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        [i, j, k]
    }

    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        -self.extent + i as f64 * self.spacing()[axis]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let h = self.spacing();
        [
            -self.extent + i as f64 * h[0],
            -self.extent + j as f64 * h[1],
            -self.extent + k as f64 * h[2],
        ]
    }

    pub fn center(&self) -> [usize; 3] {
        [self.nx / 2, self.ny / 2, self.nz / 2]
    }

    pub fn is_outer(&self, i: usize, j: usize, k: usize) -> bool {
        i == 0 || j == 0 || k == 0 || i == self.nx - 1 || j == self.ny - 1 || k == self.nz - 1
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        p.iter().all(|c| c.abs() <= self.extent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_node_sits_at_origin() {
        let g = GridSpec::cubic(129, 0.024);
        let [i, j, k] = g.center();
        assert_eq!(g.position(i, j, k), [0.0, 0.0, 0.0]);
        assert_eq!(g.unravel(g.index(3, 5, 7)), [3, 5, 7]);
    }

    #[test]
    fn validation() {
        assert!(GridSpec::cubic(129, 0.024).validate(0.02).is_ok());
        assert!(GridSpec::cubic(128, 0.024).validate(0.02).is_err());
        assert!(GridSpec::cubic(31, 0.024).validate(0.02).is_err());
        assert!(GridSpec::cubic(129, 0.019).validate(0.02).is_err());
    }
}
