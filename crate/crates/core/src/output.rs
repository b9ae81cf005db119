//! Field snapshots (legacy VTK) and diagnostics CSV.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::IoError;
use crate::grid::{CellField, Grid2D};
use crate::harness::fmt_float;
use crate::stepper::{Diagnostics, State};

pub const DIAGNOSTICS_HEADER: &str =
    "step,t,energy,mass,dissipation,boundary_flux,source_mass,div_residual,energy_residual,mass_residual";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError {
        path: path.to_path_buf(),
        source,
    }
}

/// One CSV line (no newline) for `diag` at `step`.
pub fn diagnostics_row(step: usize, d: &Diagnostics) -> String {
    let mut s = step.to_string();
    for v in [
        d.t,
        d.energy,
        d.mass,
        d.dissipation,
        d.boundary_flux,
        d.source_mass,
        d.div_residual,
        d.energy_residual,
        d.mass_residual,
    ] {
        s.push(',');
        s.push_str(&fmt_float(v));
    }
    s
}

pub fn diagnostics_csv(rows: &[(usize, Diagnostics)]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(DIAGNOSTICS_HEADER);
    s.push('\n');
    for (k, d) in rows {
        s.push_str(&diagnostics_row(*k, d));
        s.push('\n');
    }
    s
}

pub fn write_csv_diagnostics(rows: &[(usize, Diagnostics)], path: &Path) -> Result<(), IoError> {
    std::fs::write(path, diagnostics_csv(rows)).map_err(io_err(path))
}

/// Legacy ASCII VTK structured-points file with cell scalars `phi`, `mu`,
/// `sigma`, `p` and the cell-averaged velocity.
pub fn vtk_string(state: &State, g: &Grid2D) -> String {
    let n = g.n_cells();
    let mut s = String::with_capacity(n * 96);
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "tumour state t={}", fmt_float(state.t));
    s.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", g.nx + 1, g.ny + 1);
    s.push_str("ORIGIN 0 0 0\n");
    let _ = writeln!(s, "SPACING {} {} 1", fmt_float(g.dx), fmt_float(g.dy));
    let _ = writeln!(s, "CELL_DATA {n}");
    let scalar = |s: &mut String, name: &str, f: &CellField| {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.as_slice() {
            s.push_str(&fmt_float(*v));
            s.push('\n');
        }
    };
    scalar(&mut s, "phi", &state.phi);
    scalar(&mut s, "mu", &state.mu);
    scalar(&mut s, "sigma", &state.sigma);
    scalar(&mut s, "p", &state.p);
    let (vx, vy) = state.vel.cell_averaged(g);
    s.push_str("VECTORS velocity double\n");
    for c in 0..n {
        let _ = writeln!(s, "{} {} 0", fmt_float(vx[c]), fmt_float(vy[c]));
    }
    s
}

pub fn write_vtk(state: &State, g: &Grid2D, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, vtk_string(state, g)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SolveStats;

    #[test]
    fn zero_state_vtk_has_one_entry_per_cell() {
        let g = Grid2D::unit_square(4).unwrap();
        let st = State::uniform(&g, 0.0, 0.0, 0.0);
        let text = vtk_string(&st, &g);
        assert!(text.contains("DATASET STRUCTURED_POINTS"));
        assert!(text.contains("CELL_DATA 16"));
        for name in ["phi", "mu", "sigma", "p"] {
            let start = text.find(&format!("SCALARS {name} double 1")).unwrap();
            let values: Vec<&str> = text[start..].lines().skip(2).take(16).collect();
            assert!(values.iter().all(|v| *v == "0.0"), "{name}: {values:?}");
        }
        let vstart = text.find("VECTORS velocity").unwrap();
        assert_eq!(text[vstart..].lines().skip(1).filter(|l| !l.is_empty()).count(), 16);
    }

    #[test]
    fn csv_header_and_round_trip() {
        let st = SolveStats {
            iterations: 1,
            residual: 0.0,
            converged: true,
        };
        let d = Diagnostics {
            t: 0.1 + 0.2,
            energy: -1.0 / 3.0,
            mass: 1e-300,
            dissipation: 12345.678,
            boundary_flux: -0.0,
            source_mass: f64::MIN_POSITIVE,
            div_residual: 2.5e-17,
            energy_residual: 7.0,
            mass_residual: 1e22,
            suggested_dt: 1.0,
            nutrient_stats: st,
            ch_stats: st,
            flow_stats: st,
        };
        let csv = diagnostics_csv(&[(3, d)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(DIAGNOSTICS_HEADER));
        let vals: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|s| s.parse().unwrap()).collect();
        let expect = [
            d.t,
            d.energy,
            d.mass,
            d.dissipation,
            d.boundary_flux,
            d.source_mass,
            d.div_residual,
            d.energy_residual,
            d.mass_residual,
        ];
        for (a, b) in vals.iter().zip(expect) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
