//! Quasi-static nutrient equation `-lap(sigma) + h(phi) sigma = 0` with a Robin
//! (or, for the infinite-permeability reference, Dirichlet) boundary closure.
//!
//! Both closures eliminate a ghost value across each boundary face. For Robin
//! data the ghost satisfies
//! `(s_g - s_i) / d = K (s_inf - (s_g + s_i) / 2)` with `d` the centre-to-ghost
//! spacing, which adds `K / (d (1 + K d / 2))` to the diagonal and keeps the
//! operator symmetric positive definite. The Dirichlet ghost `2 s_inf - s_i`
//! is the `K -> inf` limit of the same expression.

use crate::error::{SolveFailure, SolverError};
use crate::grid::{BoundaryField, CellField, Grid2D, Side};
use crate::linalg::{cg_solve_with, LinearSystem, SolveOptions, SolveStats, TripletBuilder};
use crate::model::{ModelSpec, ScalarFn};

pub const NUTRIENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NutrientClosure {
    Robin { k: f64 },
    Dirichlet,
}

impl NutrientClosure {
    /// Diagonal weight of one boundary face with normal spacing `d`.
    fn face_coefficient(self, d: f64) -> f64 {
        match self {
            NutrientClosure::Robin { k } => k / (d * (1.0 + 0.5 * k * d)),
            NutrientClosure::Dirichlet => 2.0 / (d * d),
        }
    }
}

fn normal_spacing(g: &Grid2D, side: Side) -> f64 {
    match side {
        Side::Bottom | Side::Top => g.dy,
        Side::Left | Side::Right => g.dx,
    }
}

/// Assembles `(-lap_h + diag(h(phi)) + boundary closure) sigma = extra + boundary data`.
pub fn assemble_nutrient(
    g: &Grid2D,
    phi: &CellField,
    h: &ScalarFn,
    sigma_inf: &BoundaryField,
    closure: NutrientClosure,
    extra_rhs: Option<&CellField>,
) -> LinearSystem {
    let n = g.n_cells();
    let (ax, ay) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    let mut t = TripletBuilder::with_capacity(n, 5 * n);
    let mut rhs = match extra_rhs {
        Some(f) => f.as_slice().to_vec(),
        None => vec![0.0; n],
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let mut diag = h.eval(phi[c]);
            if i > 0 {
                t.add(c, g.cell(i - 1, j), -ax);
                diag += ax;
            }
            if i + 1 < g.nx {
                t.add(c, g.cell(i + 1, j), -ax);
                diag += ax;
            }
            if j > 0 {
                t.add(c, g.cell(i, j - 1), -ay);
                diag += ay;
            }
            if j + 1 < g.ny {
                t.add(c, g.cell(i, j + 1), -ay);
                diag += ay;
            }
            t.add(c, c, diag);
        }
    }
    for bf in g.boundary_faces() {
        let c = g.cell(bf.cell.0, bf.cell.1);
        let w = closure.face_coefficient(normal_spacing(g, bf.side));
        t.add(c, c, w);
        rhs[c] += w * sigma_inf.values[bf.index];
    }
    LinearSystem {
        matrix: t.build(),
        rhs,
    }
}

/// General nutrient solve returning the solver statistics.
pub fn solve_nutrient(
    g: &Grid2D,
    phi: &CellField,
    h: &ScalarFn,
    sigma_inf: &BoundaryField,
    closure: NutrientClosure,
    extra_rhs: Option<&CellField>,
) -> Result<(CellField, SolveStats), SolverError> {
    solve_nutrient_with_tol(g, phi, h, sigma_inf, closure, extra_rhs, NUTRIENT_TOL)
}

pub fn solve_nutrient_with_tol(
    g: &Grid2D,
    phi: &CellField,
    h: &ScalarFn,
    sigma_inf: &BoundaryField,
    closure: NutrientClosure,
    extra_rhs: Option<&CellField>,
    tol: f64,
) -> Result<(CellField, SolveStats), SolverError> {
    if !phi.fits(g) || sigma_inf.len() != g.n_boundary_faces() || extra_rhs.is_some_and(|f| !f.fits(g)) {
        return Err(SolverError::Shape("nutrient"));
    }
    if !phi.is_finite() || !sigma_inf.is_finite() || extra_rhs.is_some_and(|f| !f.is_finite()) {
        return Err(SolverError::NonFinite("nutrient"));
    }
    if let NutrientClosure::Robin { k } = closure {
        if !(k.is_finite() && k > 0.0) {
            return Err(SolverError::Singular(format!("(A1): Robin coefficient K={k} must be > 0")));
        }
    }
    let sys = assemble_nutrient(g, phi, h, sigma_inf, closure, extra_rhs);
    if !sys.matrix.is_finite() {
        return Err(SolverError::NonFinite("nutrient (h evaluation)"));
    }
    let (x, stats) = cg_solve_with(&sys.matrix, &sys.rhs, &SolveOptions::with_tol(tol));
    if !stats.converged {
        return Err(SolveFailure {
            system: "nutrient",
            stats,
        }
        .into());
    }
    Ok((CellField::from_vec(g, x).expect("length matches grid"), stats))
}

pub fn solve_nutrient_robin(
    g: &Grid2D,
    phi: &CellField,
    spec: &ModelSpec,
    sigma_inf: &BoundaryField,
    extra_rhs: Option<&CellField>,
) -> Result<CellField, SolverError> {
    let closure = NutrientClosure::Robin { k: spec.params.k };
    solve_nutrient(g, phi, &spec.sources.h, sigma_inf, closure, extra_rhs).map(|(s, _)| s)
}

pub fn solve_nutrient_dirichlet(
    g: &Grid2D,
    phi: &CellField,
    spec: &ModelSpec,
    sigma_inf: &BoundaryField,
    extra_rhs: Option<&CellField>,
) -> Result<CellField, SolverError> {
    solve_nutrient(g, phi, &spec.sources.h, sigma_inf, NutrientClosure::Dirichlet, extra_rhs)
        .map(|(s, _)| s)
}

/// Per-face trace gap `sigma_face - sigma_inf` of a Robin solution and its
/// discrete `L2(boundary)` norm. `sigma_face` is the ghost-cell midpoint value
/// of the closure with permeability `k`; `k = inf` gives the Dirichlet trace.
pub fn boundary_trace(
    g: &Grid2D,
    sigma: &CellField,
    sigma_inf: &BoundaryField,
    k: f64,
) -> (BoundaryField, f64) {
    let values = g
        .boundary_faces()
        .map(|bf| {
            let d = normal_spacing(g, bf.side);
            let interior = sigma.at(bf.cell.0, bf.cell.1);
            let s_inf = sigma_inf.values[bf.index];
            if k.is_infinite() {
                0.0
            } else {
                (interior - s_inf) / (1.0 + 0.5 * k * d)
            }
        })
        .collect();
    let gap = BoundaryField { values };
    let norm = gap.l2_norm(g);
    (gap, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{cell_inner, l2_norm};
    use crate::model::SourceSpec;
    use std::f64::consts::PI;

    fn spec_with(h: f64, k: f64) -> ModelSpec {
        let mut spec = ModelSpec::default();
        spec.sources = SourceSpec {
            h: ScalarFn::Constant(h),
            ..SourceSpec::zero()
        };
        spec.params.k = k;
        spec
    }

    #[test]
    fn constant_solution_without_consumption() {
        let g = Grid2D::new(10, 7, 1.0, 0.8).unwrap();
        let phi = CellField::zeros(&g);
        let spec = spec_with(0.0, 3.0);
        let b = BoundaryField::constant(&g, 0.7);
        let s = solve_nutrient_robin(&g, &phi, &spec, &b, None).unwrap();
        assert!(s.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-9));
        let d = solve_nutrient_dirichlet(&g, &phi, &spec, &b, None).unwrap();
        assert!(d.as_slice().iter().all(|v| (v - 0.7).abs() < 1e-9));
        let (gap, norm) = boundary_trace(&g, &s, &b, 3.0);
        assert!(gap.values.iter().all(|v| v.abs() < 1e-9));
        assert!(norm < 1e-9);
    }

    /// Closed-form 1D Robin solution of `-s'' + s = 0` on `[0, 1]`, `s' = K (1 - s)` outward.
    fn robin_1d(x: f64, k: f64) -> f64 {
        k * (x - 0.5).cosh() / ((0.5f64).sinh() + k * (0.5f64).cosh())
    }

    #[test]
    fn one_dimensional_robin_profile_is_second_order() {
        let k = 2.0;
        let err = |n: usize| {
            let g = Grid2D::new(n, 4, 1.0, 0.25).unwrap();
            // sigma_inf = 1 on vertical sides; on horizontal sides the exact
            // profile keeps the Robin flux at zero
            let b = BoundaryField {
                values: g
                    .boundary_faces()
                    .map(|bf| match bf.side {
                        Side::Left | Side::Right => 1.0,
                        Side::Bottom | Side::Top => robin_1d(bf.center.0, k),
                    })
                    .collect(),
            };
            let phi = CellField::zeros(&g);
            let s = solve_nutrient_robin(&g, &phi, &spec_with(1.0, k), &b, None).unwrap();
            (0..g.nx)
                .flat_map(|i| (0..g.ny).map(move |j| (i, j)))
                .map(|(i, j)| (s.at(i, j) - robin_1d(g.cell_center(i, j).0, k)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        assert!(e1 < 1e-3);
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn large_permeability_approaches_dirichlet() {
        let g = Grid2D::unit_square(32).unwrap();
        let phi = CellField::zeros(&g);
        let spec = spec_with(1.0, 1e4);
        let b = BoundaryField::constant(&g, 1.0);
        let r = solve_nutrient_robin(&g, &phi, &spec, &b, None).unwrap();
        let d = solve_nutrient_dirichlet(&g, &phi, &spec, &b, None).unwrap();
        let diff = r.zip_map(&d, |a, b| a - b).max_abs();
        assert!(diff <= 1e-3, "{diff}");
    }

    #[test]
    fn dirichlet_harmonic_polynomial() {
        let err = |n: usize| {
            let g = Grid2D::unit_square(n).unwrap();
            let exact = |x: f64, y: f64| x * x - y * y;
            let b = BoundaryField::from_fn(&g, exact);
            let s = solve_nutrient_dirichlet(&g, &CellField::zeros(&g), &spec_with(0.0, 1.0), &b, None)
                .unwrap();
            let e = s.zip_map(&CellField::from_fn(&g, exact), |a, b| a - b);
            l2_norm(&g, &e)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn trace_gap_shrinks_with_permeability() {
        let g = Grid2D::unit_square(32).unwrap();
        let phi = CellField::zeros(&g);
        let b = BoundaryField::constant(&g, 1.0);
        let gap = |k: f64| {
            let s = solve_nutrient_robin(&g, &phi, &spec_with(1.0, k), &b, None).unwrap();
            boundary_trace(&g, &s, &b, k).1
        };
        assert!(gap(1000.0) < gap(10.0));
    }

    #[test]
    fn discrete_maximum_principle() {
        let g = Grid2D::unit_square(24).unwrap();
        let phi = CellField::from_fn(&g, |x, y| (3.0 * x).sin() * y);
        let mut spec = spec_with(0.0, 5.0);
        spec.sources.h = ScalarFn::SmoothBlend { low: 0.5, high: 4.0 };
        let b = BoundaryField::from_fn(&g, |x, y| 1.0 + (PI * x).sin() * y);
        let s = solve_nutrient_robin(&g, &phi, &spec, &b, None).unwrap();
        let smax = s.as_slice().iter().copied().fold(f64::MIN, f64::max);
        let smin = s.as_slice().iter().copied().fold(f64::MAX, f64::min);
        assert!(smin >= -1e-10);
        assert!(smax <= b.max() + 1e-10);
    }

    #[test]
    fn robin_matrix_is_symmetric_positive_definite_without_consumption() {
        let g = Grid2D::new(9, 6, 1.0, 0.5).unwrap();
        let phi = CellField::zeros(&g);
        let sys = assemble_nutrient(
            &g,
            &phi,
            &ScalarFn::zero(),
            &BoundaryField::constant(&g, 0.0),
            NutrientClosure::Robin { k: 0.3 },
            None,
        );
        assert_eq!(sys.matrix.asymmetry(), 0.0);
        // constants are not in the kernel: <A 1, 1> > 0
        let one = vec![1.0; g.n_cells()];
        let a1 = sys.matrix.mul_vec(&one);
        let q: f64 = a1.iter().sum();
        assert!(q > 0.0);
        let f = CellField::from_fn(&g, |x, y| (x - y).sin());
        let af = CellField::from_vec(&g, sys.matrix.mul_vec(f.as_slice())).unwrap();
        assert!(cell_inner(&g, &af, &f) > 0.0);
    }

    #[test]
    fn rejects_non_finite_input() {
        let g = Grid2D::unit_square(4).unwrap();
        let mut phi = CellField::zeros(&g);
        phi[3] = f64::NAN;
        let r = solve_nutrient_robin(&g, &phi, &spec_with(1.0, 1.0), &BoundaryField::constant(&g, 1.0), None);
        assert_eq!(r, Err(SolverError::NonFinite("nutrient")));
    }
}
