//! Finite-difference electrostatics for the trap electrodes.
//!
//! The geometry is rasterized onto a uniform node lattice and the basis
//! potential (ring at 1, end-caps and filament at 0, box faces at 0) is
//! relaxed with red-black SOR.

mod grid;
mod io;
mod mask;
mod solver;

pub use grid::{GridSpec, MIN_NODES};
pub use io::{read_grid_dump, write_axis_profiles, write_grid_dump, GridDump, MAGIC};
pub use mask::{discretize_geometry, ElectrodeMask, NodeClass};
pub use solver::{
    default_omega, sample_potential, solve_laplace, solve_laplace_with, PotentialGrid, SolverOptions,
    DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE,
};

use crate::error::Result;
use crate::model::TrapGeometry;

/// Discretize and solve in one call.
pub fn solve_geometry(geom: &TrapGeometry, spec: &GridSpec, opts: &SolverOptions) -> Result<PotentialGrid> {
    let mask = discretize_geometry(geom, spec)?;
    solve_laplace_with(&mask, opts)
}

/// The closed-form potential of the ideal hyperbolic trap in ring-basis units.
pub fn ideal_basis_potential(r0: f64, x: f64, y: f64, z: f64) -> f64 {
    0.5 + (x * x + y * y - 2.0 * z * z) / (2.0 * r0 * r0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::exec::ExecMode;
    use crate::model::{make_paper_trap, ElectrodePotentials};

    fn coarse_ideal() -> PotentialGrid {
        let geom = make_paper_trap().without_filament();
        let spec = GridSpec::cubic(49, 1.2 * geom.r0);
        solve_geometry(&geom, &spec, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn grounded_electrodes_give_zero_field() {
        let mut geom = make_paper_trap();
        geom.electrode_potentials = ElectrodePotentials {
            ring: 0.0,
            endcap: 0.0,
            filament: 0.0,
        };
        let grid = solve_geometry(&geom, &GridSpec::cubic(33, 1.2 * geom.r0), &SolverOptions::default()).unwrap();
        assert!(grid.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ideal_center_and_quadrupole_ordering() {
        let grid = coarse_ideal();
        let r0 = grid.mask.r0;
        let z0 = grid.mask.z0;
        let center = grid.center_value();
        // The grounded box faces across the ring/cap gaps pull the centre a few percent low.
        assert!((center - 0.5).abs() < 0.05, "center {center}");
        let on_axis = sample_potential(&grid, 0.0, 0.0, 0.5 * z0).unwrap();
        let radial = sample_potential(&grid, 0.5 * r0, 0.0, 0.0).unwrap();
        assert!(on_axis < center && center < radial);
    }

    #[test]
    fn electrode_nodes_keep_fixed_values_and_max_principle_holds() {
        let grid = coarse_ideal();
        for (class, v) in grid.mask.classes.iter().zip(&grid.values) {
            match grid.mask.fixed_value(*class) {
                Some(fixed) => assert_eq!(*v, fixed),
                None => assert!((0.0..=1.0).contains(v)),
            }
        }
        assert!(grid.converged_residual <= DEFAULT_TOLERANCE);
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree_bitwise() {
        let geom = make_paper_trap();
        let mask = discretize_geometry(&geom, &GridSpec::cubic(41, 1.2 * geom.r0)).unwrap();
        let seq = solve_laplace_with(
            &mask,
            &SolverOptions {
                exec: ExecMode::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        let par = solve_laplace_with(
            &mask,
            &SolverOptions {
                exec: ExecMode::Parallel,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(seq.iterations, par.iterations);
        assert_eq!(seq.values, par.values);
    }

    #[test]
    fn non_convergence_reports_residual() {
        let geom = make_paper_trap();
        let mask = discretize_geometry(&geom, &GridSpec::cubic(33, 1.2 * geom.r0)).unwrap();
        match solve_laplace(&mask, 1e-12, 3) {
            Err(Error::NotConverged { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn sampling_at_nodes_and_midpoints() {
        let grid = coarse_ideal();
        let spec = *grid.spec();
        let (i, j, k) = (20, 23, 25);
        let [x, y, z] = spec.position(i, j, k);
        assert_eq!(sample_potential(&grid, x, y, z).unwrap(), grid.value(i, j, k));
        let h = spec.spacing()[0];
        let mid = sample_potential(&grid, x + 0.5 * h, y, z).unwrap();
        let expect = 0.5 * (grid.value(i, j, k) + grid.value(i + 1, j, k));
        assert!((mid - expect).abs() < 1e-15);
    }

    #[test]
    fn sampling_rejects_outside_and_electrode_points() {
        let geom = make_paper_trap();
        let spec = GridSpec::cubic(65, 1.2 * geom.r0);
        let mask = discretize_geometry(&geom, &spec).unwrap();
        let grid = PotentialGrid::from_fn(mask, |_, _, _| 0.25);
        assert!(matches!(
            sample_potential(&grid, 2.0 * geom.r0, 0.0, 0.0),
            Err(Error::OutsideGrid { .. })
        ));
        let (zb, zt) = geom.filament.unwrap().z_range(geom.z0);
        assert!(matches!(
            sample_potential(&grid, 6.0e-3, 0.0, 0.5 * (zb + zt)),
            Err(Error::InsideElectrode { .. })
        ));
    }

    #[test]
    fn dump_roundtrip() {
        let grid = coarse_ideal();
        let mut buf = Vec::new();
        write_grid_dump(&grid, &mut buf).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 12 + 16 + grid.values.len() * 9);
        let back = read_grid_dump(buf.as_slice()).unwrap();
        assert_eq!(back.spec, *grid.spec());
        assert_eq!(back.values, grid.values);
        assert_eq!(back.classes, grid.mask.classes);
        let rebuilt = back.into_potential_grid();
        assert_eq!(rebuilt.mask.potentials, grid.mask.potentials);

        buf[0] = b'X';
        assert!(matches!(read_grid_dump(buf.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn axis_profile_csv_has_three_lines_of_nodes() {
        let grid = coarse_ideal();
        let mut out = Vec::new();
        write_axis_profiles(&grid, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 49);
        assert!(text.starts_with("axis,coordinate_m,potential"));
    }
}
