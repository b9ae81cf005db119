//! Brinkman and Darcy flow on the MAC grid.
//!
//! The Brinkman system is assembled as the stationarity conditions of the
//! discrete functional
//!
//! ```text
//! 1/2 sum_cells [2 eta (exx^2 + eyy^2) + lambda div^2] dxdy
//!   + 1/2 sum_interior_nodes eta_n gxy^2 dxdy + 1/2 nu sum_faces |v_f|^2 w_f
//!   - sum_cells p (div - Gamma_v) dxdy - sum_faces F_f v_f w_f
//! ```
//!
//! with all boundary faces carrying velocity unknowns (face weight `w_f` is
//! `dxdy` inside, `dxdy/2` on the boundary). Shear strain lives on nodes and
//! boundary nodes are left out, which imposes zero tangential traction;
//! the boundary-face momentum rows balance the normal stress against the
//! adjacent cell pressure, which imposes zero normal traction. The result is a
//! symmetric saddle-point matrix whose velocity block is positive definite for
//! `nu > 0`, and the pressure needs no gauge.

use crate::error::{SolveFailure, SolverError};
use crate::grid::{
    average_to_faces, divergence_of_faces, gradient_to_faces, gradient_to_faces_dirichlet, norm2,
    BoundaryField, CellField, FaceField, Grid2D,
};
use crate::linalg::{
    bicgstab_solve_with, cg_solve_with, minres_solve_with, LinearSystem, Preconditioner, SolveOptions, SolveStats,
    TripletBuilder,
};
use crate::model::ModelSpec;
use crate::spectral::{solve_tridiagonal, Basis1D};

pub const FLOW_TOL: f64 = 1e-9;

/// Result of a flow solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub vel: FaceField,
    pub p: CellField,
    pub stats: SolveStats,
    /// `||div(vel) - Gamma_v||_2` over cells.
    pub div_residual: f64,
}

/// Pointwise viscosities sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct BrinkmanCoefficients {
    pub eta: CellField,
    pub lambda: CellField,
    pub nu: f64,
}

impl BrinkmanCoefficients {
    pub fn from_spec(phi: &CellField, spec: &ModelSpec) -> Self {
        BrinkmanCoefficients {
            eta: phi.map(|s| spec.viscosity.eta.eval(s)),
            lambda: phi.map(|s| spec.viscosity.lambda.eval(s)),
            nu: spec.params.nu,
        }
    }

    pub fn constant(g: &Grid2D, eta: f64, lambda: f64, nu: f64) -> Self {
        BrinkmanCoefficients {
            eta: CellField::constant(g, eta),
            lambda: CellField::constant(g, lambda),
            nu,
        }
    }
}

/// Layout of the monolithic unknown vector `[vx | vy | p]`.
#[derive(Debug, Clone, Copy)]
struct Layout {
    ow: usize,
    op: usize,
    n: usize,
}

impl Layout {
    fn new(g: &Grid2D) -> Self {
        let ow = g.n_xfaces();
        let op = ow + g.n_yfaces();
        Layout {
            ow,
            op,
            n: op + g.n_cells(),
        }
    }
}

/// `weight * a a^T` for a sparse row functional `a`.
fn add_outer(t: &mut TripletBuilder, a: &[(usize, f64)], weight: f64) {
    for &(r, ar) in a {
        for &(c, ac) in a {
            t.add(r, c, weight * ar * ac);
        }
    }
}

/// Eta at interior node `(i, j)`: mean of the four surrounding cells.
fn node_eta(eta: &CellField, i: usize, j: usize) -> f64 {
    0.25 * (eta.at(i - 1, j - 1) + eta.at(i, j - 1) + eta.at(i - 1, j) + eta.at(i, j))
}

fn face_weight_x(g: &Grid2D, i: usize) -> f64 {
    if i == 0 || i == g.nx {
        0.5 * g.cell_area()
    } else {
        g.cell_area()
    }
}

fn face_weight_y(g: &Grid2D, j: usize) -> f64 {
    if j == 0 || j == g.ny {
        0.5 * g.cell_area()
    } else {
        g.cell_area()
    }
}

/// Assembles the symmetric Brinkman saddle-point system.
pub fn assemble_brinkman(
    g: &Grid2D,
    coef: &BrinkmanCoefficients,
    force: &FaceField,
    gamma_v: &CellField,
) -> LinearSystem {
    let lay = Layout::new(g);
    let area = g.cell_area();
    let (idx, idy) = (1.0 / g.dx, 1.0 / g.dy);
    let mut t = TripletBuilder::with_capacity(lay.n, 40 * g.n_cells());
    let mut rhs = vec![0.0; lay.n];
    let u = |i: usize, j: usize| g.xface(i, j);
    let w = |i: usize, j: usize| lay.ow + g.yface(i, j);

    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let exx = [(u(i + 1, j), idx), (u(i, j), -idx)];
            let eyy = [(w(i, j + 1), idy), (w(i, j), -idy)];
            let div = [exx[0], exx[1], eyy[0], eyy[1]];
            let eta = coef.eta[c];
            add_outer(&mut t, &exx, 2.0 * eta * area);
            add_outer(&mut t, &eyy, 2.0 * eta * area);
            add_outer(&mut t, &div, coef.lambda[c] * area);
            let pc = lay.op + c;
            for &(f, a) in &div {
                t.add(f, pc, -area * a);
                t.add(pc, f, -area * a);
            }
            rhs[pc] = -area * gamma_v[c];
        }
    }
    for j in 1..g.ny {
        for i in 1..g.nx {
            let gxy = [
                (u(i, j), idy),
                (u(i, j - 1), -idy),
                (w(i, j), idx),
                (w(i - 1, j), -idx),
            ];
            add_outer(&mut t, &gxy, node_eta(&coef.eta, i, j) * area);
        }
    }
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let k = g.xface(i, j);
            let wf = face_weight_x(g, i);
            t.add(u(i, j), u(i, j), coef.nu * wf);
            rhs[u(i, j)] = wf * force.x[k];
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let k = g.yface(i, j);
            let wf = face_weight_y(g, j);
            t.add(w(i, j), w(i, j), coef.nu * wf);
            rhs[w(i, j)] = wf * force.y[k];
        }
    }
    LinearSystem {
        matrix: t.build(),
        rhs,
    }
}

/// Block-diagonal preconditioner for the saddle point, built from
/// cell-averaged `eta`, `lambda`:
///
/// - velocity: exact inverses of the `vx-vx` and `vy-vy` blocks (cosine modes
///   across, tridiagonal solves along each component),
/// - pressure: `nu (-lap_D)^-1 + (2 eta + lambda) I`, scaled by the cell area,
///   applied in sine modes.
///
/// Both blocks are symmetric positive definite, as MINRES requires.
fn saddle_point_preconditioner(g: &Grid2D, coef: &BrinkmanCoefficients) -> Preconditioner {
    let n_cells = g.n_cells() as f64;
    let eta = coef.eta.as_slice().iter().sum::<f64>() / n_cells;
    let lambda = coef.lambda.as_slice().iter().sum::<f64>() / n_cells;
    let nu = coef.nu;
    let (nx, ny) = (g.nx, g.ny);
    let (dx2, dy2) = (g.dx * g.dx, g.dy * g.dy);
    let area = g.cell_area();
    let lay = Layout::new(g);
    let cos_x = Basis1D::cosine(nx);
    let cos_y = Basis1D::cosine(ny);
    let sin_x = Basis1D::sine(nx);
    let sin_y = Basis1D::sine(ny);

    // tridiagonal along a velocity component with `m + 1` face positions
    let line = |m: usize, axial: f64, shear: f64| -> (Vec<f64>, Vec<f64>) {
        let diag = (0..=m)
            .map(|i| {
                let end = i == 0 || i == m;
                axial * if end { 1.0 } else { 2.0 }
                    + if end { 0.0 } else { shear }
                    + nu * area * if end { 0.5 } else { 1.0 }
            })
            .collect();
        (diag, vec![-axial; m])
    };
    let axial_x = (2.0 * eta + lambda) * area / dx2;
    let axial_y = (2.0 * eta + lambda) * area / dy2;
    let u_lines: Vec<_> = cos_y
        .eigenvalues()
        .iter()
        .map(|&e| line(nx, axial_x, eta * area / dy2 * e))
        .collect();
    let w_lines: Vec<_> = cos_x
        .eigenvalues()
        .iter()
        .map(|&e| line(ny, axial_y, eta * area / dx2 * e))
        .collect();
    let mut p_scale = vec![0.0; g.n_cells()];
    for q in 0..ny {
        for k in 0..nx {
            let kappa = sin_x.eigenvalues()[k] / dx2 + sin_y.eigenvalues()[q] / dy2;
            p_scale[q * nx + k] = (nu / kappa + 2.0 * eta + lambda) / area;
        }
    }

    Preconditioner::Operator(std::sync::Arc::new(move |r: &[f64], z: &mut [f64]| {
        let mut work = Vec::new();
        let mut col = Vec::new();
        // vx: (nx + 1) x ny, cosine in y then tridiagonal in x
        let (mx, my) = (nx + 1, ny);
        let zu = &mut z[..lay.ow];
        zu.copy_from_slice(&r[..lay.ow]);
        cos_y.along_y(zu, mx, my, false);
        for (q, (diag, off)) in u_lines.iter().enumerate() {
            solve_tridiagonal(diag, off, &mut zu[q * mx..(q + 1) * mx], &mut work);
        }
        cos_y.along_y(zu, mx, my, true);
        // vy: nx x (ny + 1), cosine in x then tridiagonal in y
        let (mx, my) = (nx, ny + 1);
        let zw = &mut z[lay.ow..lay.op];
        zw.copy_from_slice(&r[lay.ow..lay.op]);
        cos_x.along_x(zw, mx, my, false);
        for (k, (diag, off)) in w_lines.iter().enumerate() {
            col.clear();
            col.extend((0..my).map(|j| zw[j * mx + k]));
            solve_tridiagonal(diag, off, &mut col, &mut work);
            for j in 0..my {
                zw[j * mx + k] = col[j];
            }
        }
        cos_x.along_x(zw, mx, my, true);
        // pressure
        let zp = &mut z[lay.op..];
        zp.copy_from_slice(&r[lay.op..]);
        sin_x.along_x(zp, nx, ny, false);
        sin_y.along_y(zp, nx, ny, false);
        for (v, s) in zp.iter_mut().zip(&p_scale) {
            *v *= s;
        }
        sin_y.along_y(zp, nx, ny, true);
        sin_x.along_x(zp, nx, ny, true);
    }))
}

/// Continuity residual `||div(vel) - gamma||_2`.
pub fn divergence_residual(g: &Grid2D, vel: &FaceField, gamma_v: &CellField) -> f64 {
    divergence_of_faces(g, vel)
        .zip_map(gamma_v, |d, s| d - s)
        .norm2()
}

/// Keeps iterating a Krylov solve from its last iterate until the continuity
/// rows meet `tol * ||gamma||` as well as the global relative tolerance.
fn solve_with_continuity<F>(
    mut solve: F,
    initial: Option<Vec<f64>>,
    tol: f64,
    gamma_norm: f64,
    div_of: impl Fn(&[f64]) -> f64,
    system: &'static str,
) -> Result<(Vec<f64>, SolveStats, f64), SolverError>
where
    F: FnMut(f64, Option<Vec<f64>>) -> (Vec<f64>, SolveStats),
{
    let mut inner_tol = tol;
    let (mut x, mut stats) = solve(inner_tol, initial);
    let mut iterations = stats.iterations;
    for _ in 0..8 {
        if !stats.converged {
            break;
        }
        let div_res = div_of(&x);
        if gamma_norm == 0.0 || div_res <= tol * gamma_norm {
            stats.iterations = iterations;
            return Ok((x, stats, div_res));
        }
        inner_tol = (inner_tol * 0.1).max(1e-15);
        let (x2, s2) = solve(inner_tol, Some(x));
        x = x2;
        iterations += s2.iterations;
        stats = s2;
    }
    stats.iterations = iterations;
    if stats.converged {
        // continuity target unreachable in floating point: accept the last iterate
        let div_res = div_of(&x);
        return Ok((x, stats, div_res));
    }
    Err(SolveFailure { system, stats }.into())
}

/// Brinkman solve from explicit coefficients, face forcing and volume source.
pub fn solve_brinkman_with(
    g: &Grid2D,
    coef: &BrinkmanCoefficients,
    force: &FaceField,
    gamma_v: &CellField,
    tol: f64,
    initial: Option<&FlowSolution>,
) -> Result<FlowSolution, SolverError> {
    if !coef.eta.fits(g) || !coef.lambda.fits(g) || !force.fits(g) || !gamma_v.fits(g) {
        return Err(SolverError::Shape("brinkman"));
    }
    if !(coef.eta.is_finite() && coef.lambda.is_finite() && force.is_finite() && gamma_v.is_finite())
        || !coef.nu.is_finite()
    {
        return Err(SolverError::NonFinite("brinkman"));
    }
    if coef.nu <= 0.0 {
        // with traction-free boundaries rigid motions span the kernel when nu = 0
        return Err(SolverError::Singular(format!(
            "Brinkman operator needs nu > 0 (got nu={}, max eta={})",
            coef.nu,
            coef.eta.max_abs()
        )));
    }
    if coef.eta.as_slice().iter().any(|&e| e < 0.0) || coef.lambda.as_slice().iter().any(|&l| l < 0.0) {
        return Err(SolverError::Singular("negative viscosity".into()));
    }
    let lay = Layout::new(g);
    let sys = assemble_brinkman(g, coef, force, gamma_v);
    let precond = saddle_point_preconditioner(g, coef);
    let split = |x: &[f64]| {
        FaceField::from_parts(g, x[..lay.ow].to_vec(), x[lay.ow..lay.op].to_vec()).expect("layout")
    };
    let (x, stats, div_residual) = solve_with_continuity(
        |tol, x0| {
            let opts = SolveOptions {
                tol,
                max_iter: Some(20 * lay.n),
                preconditioner: precond.clone(),
                mean_free: false,
                initial_guess: x0,
            };
            let (x, stats) = minres_solve_with(&sys.matrix, &sys.rhs, &opts);
            if stats.converged {
                return (x, stats);
            }
            let retry = SolveOptions {
                initial_guess: Some(x),
                ..opts
            };
            let (x, mut stats2) = bicgstab_solve_with(&sys.matrix, &sys.rhs, &retry);
            stats2.iterations += stats.iterations;
            (x, stats2)
        },
        initial.filter(|f| f.vel.fits(g) && f.p.fits(g)).map(|f| {
            f.vel.x.iter().chain(&f.vel.y).chain(f.p.as_slice()).copied().collect()
        }),
        tol,
        gamma_v.norm2(),
        |x| divergence_residual(g, &split(x), gamma_v),
        "brinkman",
    )?;
    let vel = split(&x);
    let p = CellField::from_vec(g, x[lay.op..].to_vec()).expect("layout");
    Ok(FlowSolution {
        vel,
        p,
        stats,
        div_residual,
    })
}

/// Face forcing `(mu + chi sigma) grad(phi)` with two-cell averaged coefficient.
pub fn capillary_force(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    chi: f64,
) -> FaceField {
    let coeff = average_to_faces(g, &mu.zip_map(sigma, |m, s| m + chi * s));
    let grad = gradient_to_faces(g, phi);
    coeff.zip_map(&grad, |c, d| c * d)
}

fn total_force(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    extra_force: Option<&FaceField>,
) -> Result<FaceField, SolverError> {
    if !phi.fits(g) || !mu.fits(g) || !sigma.fits(g) || extra_force.is_some_and(|f| !f.fits(g)) {
        return Err(SolverError::Shape("flow forcing"));
    }
    let f = capillary_force(g, phi, mu, sigma, spec.params.chi);
    Ok(match extra_force {
        Some(e) => f.zip_map(e, |a, b| a + b),
        None => f,
    })
}

pub fn solve_brinkman(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    extra_force: Option<&FaceField>,
) -> Result<FlowSolution, SolverError> {
    solve_brinkman_from(g, phi, mu, sigma, spec, extra_force, FLOW_TOL, None)
}

/// [`solve_brinkman`] with an explicit tolerance and optional warm start.
#[allow(clippy::too_many_arguments)]
pub fn solve_brinkman_from(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    extra_force: Option<&FaceField>,
    tol: f64,
    initial: Option<&FlowSolution>,
) -> Result<FlowSolution, SolverError> {
    let force = total_force(g, phi, mu, sigma, spec, extra_force)?;
    let gamma = spec.sources.gamma_v_field(phi, sigma);
    let coef = BrinkmanCoefficients::from_spec(phi, spec);
    solve_brinkman_with(g, &coef, &force, &gamma, tol, initial)
}

/// Pressure system of the Darcy limit: `-lap_D p = nu Gamma_v - div F` with
/// `p = 0` on the boundary.
pub fn assemble_darcy_pressure(g: &Grid2D, nu: f64, force: &FaceField, gamma_v: &CellField) -> LinearSystem {
    let div_f = divergence_of_faces(g, force);
    let rhs = gamma_v.zip_map(&div_f, |s, d| nu * s - d);
    crate::elliptic::assemble_nutrient(
        g,
        &CellField::zeros(g),
        &crate::model::ScalarFn::zero(),
        &BoundaryField::constant(g, 0.0),
        crate::elliptic::NutrientClosure::Dirichlet,
        Some(&rhs),
    )
}

/// Darcy velocity `(F - grad p) / nu`, with the Dirichlet closure `p = 0` on
/// boundary faces.
pub fn darcy_velocity(g: &Grid2D, nu: f64, p: &CellField, force: &FaceField) -> FaceField {
    let grad = gradient_to_faces_dirichlet(g, p, &BoundaryField::constant(g, 0.0));
    force.zip_map(&grad, |f, d| (f - d) / nu)
}

pub fn solve_darcy_with(
    g: &Grid2D,
    nu: f64,
    force: &FaceField,
    gamma_v: &CellField,
    tol: f64,
    initial: Option<&FlowSolution>,
) -> Result<FlowSolution, SolverError> {
    if !force.fits(g) || !gamma_v.fits(g) {
        return Err(SolverError::Shape("darcy"));
    }
    if !(force.is_finite() && gamma_v.is_finite() && nu.is_finite()) {
        return Err(SolverError::NonFinite("darcy"));
    }
    if nu <= 0.0 {
        return Err(SolverError::Singular(format!("(A1): Darcy needs nu > 0, got {nu}")));
    }
    let sys = assemble_darcy_pressure(g, nu, force, gamma_v);
    let (x, stats, div_residual) = solve_with_continuity(
        |tol, x0| {
            cg_solve_with(
                &sys.matrix,
                &sys.rhs,
                &SolveOptions {
                    tol,
                    initial_guess: x0,
                    ..Default::default()
                },
            )
        },
        initial.filter(|f| f.p.fits(g)).map(|f| f.p.as_slice().to_vec()),
        tol,
        gamma_v.norm2(),
        |x| {
            let p = CellField::from_vec(g, x.to_vec()).expect("layout");
            divergence_residual(g, &darcy_velocity(g, nu, &p, force), gamma_v)
        },
        "darcy pressure",
    )?;
    let p = CellField::from_vec(g, x).expect("layout");
    let vel = darcy_velocity(g, nu, &p, force);
    Ok(FlowSolution {
        vel,
        p,
        stats,
        div_residual,
    })
}

pub fn solve_darcy(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    extra_force: Option<&FaceField>,
) -> Result<FlowSolution, SolverError> {
    solve_darcy_from(g, phi, mu, sigma, spec, extra_force, FLOW_TOL, None)
}

/// [`solve_darcy`] with an explicit tolerance and optional warm start.
#[allow(clippy::too_many_arguments)]
pub fn solve_darcy_from(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    extra_force: Option<&FaceField>,
    tol: f64,
    initial: Option<&FlowSolution>,
) -> Result<FlowSolution, SolverError> {
    let force = total_force(g, phi, mu, sigma, spec, extra_force)?;
    let gamma = spec.sources.gamma_v_field(phi, sigma);
    solve_darcy_with(g, spec.params.nu, &force, &gamma, tol, initial)
}

/// Shear rate `dvx/dy + dvy/dx` at node `(i, j)`; boundary nodes use
/// one-sided differences.
fn node_shear(g: &Grid2D, vel: &FaceField, i: usize, j: usize) -> f64 {
    let (ja, jb) = match j {
        0 => (0, 1),
        j if j == g.ny => (g.ny - 2, g.ny - 1),
        j => (j - 1, j),
    };
    let (ia, ib) = match i {
        0 => (0, 1),
        i if i == g.nx => (g.nx - 2, g.nx - 1),
        i => (i - 1, i),
    };
    (vel.x[g.xface(i, jb)] - vel.x[g.xface(i, ja)]) / g.dy
        + (vel.y[g.yface(ib, j)] - vel.y[g.yface(ia, j)]) / g.dx
}

/// Discrete `int 2 eta |Dv|^2 + lambda (div v)^2 + nu |v|^2`.
///
/// Normal strains are taken at cell centres, shear strain at nodes and then
/// averaged to cells (four corners each), friction with the face weights of
/// the momentum operator.
pub fn viscous_dissipation(g: &Grid2D, vel: &FaceField, phi: &CellField, spec: &ModelSpec) -> f64 {
    let coef = BrinkmanCoefficients::from_spec(phi, spec);
    viscous_dissipation_with(g, vel, &coef)
}

pub fn viscous_dissipation_with(g: &Grid2D, vel: &FaceField, coef: &BrinkmanCoefficients) -> f64 {
    let area = g.cell_area();
    let mut shear2 = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            shear2[j * (g.nx + 1) + i] = node_shear(g, vel, i, j).powi(2);
        }
    }
    let mut total = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let exx = (vel.x[g.xface(i + 1, j)] - vel.x[g.xface(i, j)]) / g.dx;
            let eyy = (vel.y[g.yface(i, j + 1)] - vel.y[g.yface(i, j)]) / g.dy;
            let n = |a: usize, b: usize| shear2[b * (g.nx + 1) + a];
            let g2 = 0.25 * (n(i, j) + n(i + 1, j) + n(i, j + 1) + n(i + 1, j + 1));
            // 2 eta |D|^2 = 2 eta (exx^2 + eyy^2) + eta gxy^2
            total += (2.0 * coef.eta[c] * (exx * exx + eyy * eyy)
                + coef.eta[c] * g2
                + coef.lambda[c] * (exx + eyy).powi(2))
                * area;
        }
    }
    let mut friction = 0.0;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            friction += face_weight_x(g, i) * vel.x[g.xface(i, j)].powi(2);
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            friction += face_weight_y(g, j) * vel.y[g.yface(i, j)].powi(2);
        }
    }
    total + coef.nu * friction
}

/// Viscous part only: `int 2 eta |Dv|^2` (no bulk or friction terms).
pub fn shear_energy(g: &Grid2D, vel: &FaceField, coef: &BrinkmanCoefficients) -> f64 {
    let bare = BrinkmanCoefficients {
        eta: coef.eta.clone(),
        lambda: CellField::zeros(g),
        nu: 0.0,
    };
    viscous_dissipation_with(g, vel, &bare)
}

/// Euclidean norm of the stacked face values.
pub fn face_difference_norm(a: &FaceField, b: &FaceField) -> f64 {
    let d = a.zip_map(b, |x, y| x - y);
    norm2(&d.x.iter().chain(&d.y).copied().collect::<Vec<_>>())
}
