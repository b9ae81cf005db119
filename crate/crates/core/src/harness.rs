//! Experiment drivers: manufactured-solution convergence, the Robin and
//! viscosity limits, continuous dependence, and the spinodal energy benchmark.
//!
//! Every driver returns a [`SweepResult`] whose CSV columns are
//! `<parameter>,error,<extra columns...>` with the extra columns listed per
//! driver below.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::elliptic::{boundary_trace, solve_nutrient, NutrientClosure};
use crate::error::{ConfigError, Error, IoError, ModelError};
use crate::flow::{
    capillary_force, shear_energy, solve_brinkman_with, solve_darcy_with, BrinkmanCoefficients, FLOW_TOL,
};
use crate::grid::{face_inner, h1_norm, l2_norm, BoundaryField, CellField, FaceField, Grid2D};
use crate::model::{InitialPhase, MobilitySpec, ModelSpec, ScalarFn, SigmaInf, SourceSpec, ViscositySpec};
use crate::stepper::{chemical_potential, initial_state, simulate, Diagnostics, FlowMode, State, StepConfig};

/// One parameter sweep with its fitted log-log slope.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub name: String,
    pub parameter: String,
    pub values: Vec<f64>,
    /// Primary error quantity per parameter value.
    pub errors: Vec<f64>,
    /// Additional named columns, each as long as `values`.
    pub columns: Vec<(String, Vec<f64>)>,
    /// Least-squares slope of `ln(error)` against `ln(value)`.
    pub slope: f64,
    /// Errors strictly decrease along the sweep (or are all exactly zero).
    pub monotonic: bool,
}

impl SweepResult {
    fn new(name: &str, parameter: &str, values: Vec<f64>, errors: Vec<f64>) -> Self {
        let slope = loglog_slope(&values, &errors);
        let monotonic = strictly_decreasing(&errors);
        SweepResult {
            name: name.into(),
            parameter: parameter.into(),
            values,
            errors,
            columns: Vec::new(),
            slope,
            monotonic,
        }
    }

    fn with_column(mut self, name: &str, data: Vec<f64>) -> Self {
        self.columns.push((name.into(), data));
        self
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Observed order of a convergence sweep in the mesh size (`slope` vs `h`).
    pub fn order(&self) -> f64 {
        self.slope
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},error", self.parameter);
        for (n, _) in &self.columns {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for (k, v) in self.values.iter().enumerate() {
            let _ = write!(s, "{}", fmt_float(*v));
            let _ = write!(s, ",{}", fmt_float(self.errors[k]));
            for (_, c) in &self.columns {
                let _ = write!(s, ",{}", fmt_float(c[k]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv()).map_err(|source| IoError {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl std::fmt::Display for SweepResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}: slope={:.4} monotonic={}", self.name, self.slope, self.monotonic)?;
        write!(f, "{:>12} {:>14}", self.parameter, "error")?;
        for (n, _) in &self.columns {
            write!(f, " {n:>14}")?;
        }
        writeln!(f)?;
        for (k, v) in self.values.iter().enumerate() {
            write!(f, "{v:>12.4e} {:>14.6e}", self.errors[k])?;
            for (_, c) in &self.columns {
                write!(f, " {:>14.6e}", c[k])?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs;
/// `NaN` when fewer than two such pairs exist.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0) || v.windows(2).all(|w| w[1] < w[0])
}

fn precondition(msg: String) -> Error {
    ConfigError::Semantic(msg).into()
}

fn check_sweep(name: &str, v: &[f64], increasing: bool) -> Result<(), Error> {
    let ordered = v
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
    if v.len() < 3 || !ordered || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        let dir = if increasing { "increasing" } else { "decreasing" };
        return Err(precondition(format!("{name} must be >= 3 strictly {dir} non-negative values, got {v:?}")));
    }
    Ok(())
}

fn face_l2(g: &Grid2D, a: &FaceField) -> f64 {
    face_inner(g, a, a).sqrt()
}

// ---------------------------------------------------------------------------
// Manufactured solutions

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsProblem {
    /// `-lap s + s = f` with Robin closure `K = 10`, exact `cos(pi x) cos(pi y)`.
    Nutrient,
    /// Darcy pressure `sin(pi x) sin(pi y)` with zero forcing.
    Darcy,
    /// Brinkman with a polynomial velocity carrying nonzero divergence.
    Brinkman,
}

impl std::str::FromStr for MmsProblem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nutrient" => Ok(MmsProblem::Nutrient),
            "darcy" => Ok(MmsProblem::Darcy),
            "brinkman" => Ok(MmsProblem::Brinkman),
            other => Err(format!("unknown MMS problem `{other}` (nutrient, darcy, brinkman)")),
        }
    }
}

impl std::fmt::Display for MmsProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MmsProblem::Nutrient => "nutrient",
            MmsProblem::Darcy => "darcy",
            MmsProblem::Brinkman => "brinkman",
        })
    }
}

pub const MMS_BASE_N: usize = 32;
const MMS_ROBIN_K: f64 = 10.0;

/// Convergence sweep on `levels` successively refined unit-square grids
/// starting at `32 x 32`.
pub fn mms_convergence(problem: MmsProblem, levels: usize) -> Result<SweepResult, Error> {
    mms_convergence_from(problem, MMS_BASE_N, levels)
}

/// Columns: `n`, and for the flow problems `pressure_error` (Brinkman),
/// `div_residual` and `gamma_norm`. The swept parameter is the mesh size `h`.
pub fn mms_convergence_from(problem: MmsProblem, base_n: usize, levels: usize) -> Result<SweepResult, Error> {
    if levels < 3 || base_n < 3 {
        return Err(precondition(format!("mms sweep needs >= 3 levels from n >= 3, got {levels} from {base_n}")));
    }
    let mut hs = Vec::new();
    let mut ns = Vec::new();
    let mut errs = Vec::new();
    let mut p_errs = Vec::new();
    let mut divs = Vec::new();
    let mut gammas = Vec::new();
    for l in 0..levels {
        let n = base_n << l;
        let g = Grid2D::unit_square(n)?;
        let out = mms_single(problem, &g)?;
        hs.push(g.dx);
        ns.push(n as f64);
        errs.push(out.error);
        p_errs.push(out.pressure_error);
        divs.push(out.div_residual);
        gammas.push(out.gamma_norm);
    }
    let mut r = SweepResult::new(&format!("mms-{problem}"), "h", hs, errs).with_column("n", ns);
    match problem {
        MmsProblem::Nutrient => {}
        MmsProblem::Darcy => {
            r = r.with_column("div_residual", divs).with_column("gamma_norm", gammas);
        }
        MmsProblem::Brinkman => {
            r = r
                .with_column("pressure_error", p_errs)
                .with_column("div_residual", divs)
                .with_column("gamma_norm", gammas);
        }
    }
    // error decreases as h decreases, i.e. increases along the h column
    r.monotonic = r.errors.windows(2).all(|w| w[1] < w[0]);
    Ok(r)
}

struct MmsOutcome {
    error: f64,
    pressure_error: f64,
    div_residual: f64,
    gamma_norm: f64,
}

/// Manufactured data of one MMS problem on `g`: operator inputs and exact
/// solution samples. Exposed so tests can replay the same systems.
#[derive(Debug, Clone)]
pub struct MmsData {
    pub exact: CellField,
    pub rhs: CellField,
    pub boundary: BoundaryField,
    pub force: FaceField,
    pub exact_velocity: FaceField,
    pub coef: Option<BrinkmanCoefficients>,
}

pub fn mms_data(problem: MmsProblem, g: &Grid2D) -> MmsData {
    match problem {
        MmsProblem::Nutrient => {
            let exact = CellField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos());
            MmsData {
                rhs: exact.map(|s| (2.0 * PI * PI + 1.0) * s),
                boundary: BoundaryField::from_fn(g, |x, y| (PI * x).cos() * (PI * y).cos()),
                exact,
                force: FaceField::zeros(g),
                exact_velocity: FaceField::zeros(g),
                coef: None,
            }
        }
        MmsProblem::Darcy => {
            let exact = CellField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
            let exact_velocity = FaceField::from_fn(
                g,
                |x, y| -PI * (PI * x).cos() * (PI * y).sin(),
                |x, y| -PI * (PI * x).sin() * (PI * y).cos(),
            );
            MmsData {
                rhs: exact.map(|p| 2.0 * PI * PI * p),
                boundary: BoundaryField::constant(g, 0.0),
                exact,
                force: FaceField::zeros(g),
                exact_velocity,
                coef: None,
            }
        }
        MmsProblem::Brinkman => {
            let coef = BrinkmanCoefficients::constant(g, 1.0, 1.0, 1.0);
            MmsData {
                exact: CellField::from_fn(g, brinkman_p),
                rhs: CellField::from_fn(g, |x, y| du(x) + du(y)),
                boundary: BoundaryField::constant(g, 0.0),
                force: FaceField::from_fn(g, brinkman_fx, brinkman_fy),
                exact_velocity: FaceField::from_fn(g, brinkman_vx, brinkman_vy),
                coef: Some(coef),
            }
        }
    }
}

fn mms_single(problem: MmsProblem, g: &Grid2D) -> Result<MmsOutcome, Error> {
    let d = mms_data(problem, g);
    let zero_phi = CellField::zeros(g);
    match problem {
        MmsProblem::Nutrient => {
            let (s, _) = solve_nutrient(
                g,
                &zero_phi,
                &ScalarFn::Constant(1.0),
                &d.boundary,
                NutrientClosure::Robin { k: MMS_ROBIN_K },
                Some(&d.rhs),
            )?;
            let err = l2_norm(g, &s.zip_map(&d.exact, |a, b| a - b));
            Ok(MmsOutcome {
                error: err,
                pressure_error: 0.0,
                div_residual: 0.0,
                gamma_norm: 0.0,
            })
        }
        MmsProblem::Darcy => {
            let sol = solve_darcy_with(g, 1.0, &d.force, &d.rhs, FLOW_TOL, None)?;
            Ok(MmsOutcome {
                error: l2_norm(g, &sol.p.zip_map(&d.exact, |a, b| a - b)),
                pressure_error: 0.0,
                div_residual: sol.div_residual,
                gamma_norm: d.rhs.norm2(),
            })
        }
        MmsProblem::Brinkman => {
            let coef = d.coef.as_ref().expect("brinkman data carries coefficients");
            let sol = solve_brinkman_with(g, coef, &d.force, &d.rhs, FLOW_TOL, None)?;
            Ok(MmsOutcome {
                error: face_l2(g, &sol.vel.zip_map(&d.exact_velocity, |a, b| a - b)),
                pressure_error: l2_norm(g, &sol.p.zip_map(&d.exact, |a, b| a - b)),
                div_residual: sol.div_residual,
                gamma_norm: d.rhs.norm2(),
            })
        }
    }
}

// Polynomial Brinkman pair with eta = lambda = nu = 1: U vanishes with its
// derivative at 0 and 1, X to third order, so the traction is zero on the
// boundary and the exact pressure is `lambda div v + x(1-x)y(1-y)`.
fn u(x: f64) -> f64 {
    (x * (1.0 - x)).powi(2)
}
fn du(x: f64) -> f64 {
    2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)
}
fn d2u(x: f64) -> f64 {
    2.0 - 12.0 * x + 12.0 * x * x
}
fn xx(x: f64) -> f64 {
    (x * (1.0 - x)).powi(3)
}
fn dxx(x: f64) -> f64 {
    3.0 * (x * (1.0 - x)).powi(2) * (1.0 - 2.0 * x)
}
fn d2xx(x: f64) -> f64 {
    let q = x * (1.0 - x);
    6.0 * q * (1.0 - 2.0 * x).powi(2) - 6.0 * q * q
}
fn d3xx(x: f64) -> f64 {
    let q = x * (1.0 - x);
    let r = 1.0 - 2.0 * x;
    6.0 * r.powi(3) - 36.0 * q * r
}
fn brinkman_vx(x: f64, y: f64) -> f64 {
    u(x) + xx(x) * dxx(y)
}
fn brinkman_vy(x: f64, y: f64) -> f64 {
    u(y) - dxx(x) * xx(y)
}
fn brinkman_p(x: f64, y: f64) -> f64 {
    du(x) + du(y) + x * (1.0 - x) * y * (1.0 - y)
}
fn brinkman_fx(x: f64, y: f64) -> f64 {
    -(2.0 * d2u(x) + d2xx(x) * dxx(y) + xx(x) * d3xx(y)) + (1.0 - 2.0 * x) * y * (1.0 - y) + brinkman_vx(x, y)
}
fn brinkman_fy(x: f64, y: f64) -> f64 {
    -(2.0 * d2u(y) - d3xx(x) * xx(y) - dxx(x) * d2xx(y)) + (1.0 - 2.0 * y) * x * (1.0 - x) + brinkman_vy(x, y)
}

// ---------------------------------------------------------------------------
// Singular limits

/// Robin-to-Dirichlet sweep at frozen `phi`. Error is the boundary gap
/// `||sigma_K - sigma_inf||_{L2(boundary)}`; columns `interior_distance`
/// (`||sigma_K - sigma_D||_2` against the Dirichlet solution) and
/// `scaled_gap` (`gap * sqrt(K)`). `monotonic` requires both the gap and
/// the interior distance to decrease strictly.
pub fn robin_limit_study(
    g: &Grid2D,
    phi: &CellField,
    spec: &ModelSpec,
    k_values: &[f64],
) -> Result<SweepResult, Error> {
    check_sweep("K values", k_values, true)?;
    if k_values[0] <= 0.0 {
        return Err(precondition("K values must be positive".into()));
    }
    let s_inf = spec.sigma_inf.at(g, 0.0)?;
    let h = &spec.sources.h;
    let (dirichlet, _) = solve_nutrient(g, phi, h, &s_inf, NutrientClosure::Dirichlet, None)?;
    let mut gaps = Vec::new();
    let mut dist = Vec::new();
    let mut scaled = Vec::new();
    for &k in k_values {
        let (s, _) = solve_nutrient(g, phi, h, &s_inf, NutrientClosure::Robin { k }, None)?;
        let (_, gap) = boundary_trace(g, &s, &s_inf, k);
        gaps.push(gap);
        scaled.push(gap * k.sqrt());
        dist.push(l2_norm(g, &s.zip_map(&dirichlet, |a, b| a - b)));
    }
    let interior_monotonic = strictly_decreasing(&dist);
    let mut r = SweepResult::new("robin-limit", "K", k_values.to_vec(), gaps)
        .with_column("interior_distance", dist)
        .with_column("scaled_gap", scaled);
    r.monotonic &= interior_monotonic;
    Ok(r)
}

/// Frozen fields for the flow limits.
#[derive(Debug, Clone)]
pub struct FrozenFields {
    pub phi: CellField,
    pub mu: CellField,
    pub sigma: CellField,
}

/// Smooth circular tumour of radius `0.25` centred in the domain with its
/// chemical potential and Robin nutrient.
pub fn smooth_tumour(g: &Grid2D, spec: &ModelSpec) -> Result<FrozenFields, Error> {
    let eps = spec.params.epsilon;
    let (cx, cy) = (0.5 * g.lx, 0.5 * g.ly);
    let phi = CellField::from_fn(g, |x, y| {
        let r = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        ((0.25 - r) / (std::f64::consts::SQRT_2 * eps)).tanh()
    });
    let s_inf = spec.sigma_inf.at(g, 0.0)?;
    let (sigma, _) = solve_nutrient(
        g,
        &phi,
        &spec.sources.h,
        &s_inf,
        NutrientClosure::Robin { k: spec.params.k },
        None,
    )?;
    let mu = chemical_potential(g, &phi, &sigma, spec).map_err(|source| Error::Step { step: 0, source })?;
    Ok(FrozenFields { phi, mu, sigma })
}

/// Smooth analytic frozen fields whose capillary force has a rotational part:
/// `phi = 0.6 cos(pi x) cos(pi y)`, `mu = 0.5 sin(pi x) + phi`,
/// `sigma = 1 - 0.2 (x^2 + y^2)` on the unit square.
pub fn smooth_frozen_fields(g: &Grid2D) -> FrozenFields {
    let (lx, ly) = (g.lx, g.ly);
    let phi = CellField::from_fn(g, |x, y| 0.6 * (PI * x / lx).cos() * (PI * y / ly).cos());
    let mu = CellField::from_fn(g, |x, y| 0.5 * (PI * x / lx).sin() + 0.6 * (PI * x / lx).cos() * (PI * y / ly).cos());
    let sigma = CellField::from_fn(g, |x, y| 1.0 - 0.2 * ((x / lx).powi(2) + (y / ly).powi(2)));
    FrozenFields { phi, mu, sigma }
}

/// Model used by the flow-limit and mass-balance experiments: proliferating
/// tumour (`Gamma_v > 0` where nutrient-rich), mild apoptosis, `eta = 1`,
/// `lambda = 0.5`.
pub fn growth_spec() -> ModelSpec {
    ModelSpec {
        viscosity: ViscositySpec::constant(1.0, 0.5),
        mobility: MobilitySpec::constant(0.05),
        sources: SourceSpec {
            b_v: ScalarFn::SmoothBlend { low: 0.0, high: 0.5 },
            f_v: ScalarFn::SmoothBlend { low: 0.0, high: -0.1 },
            b_phi: ScalarFn::SmoothBlend { low: 0.0, high: 0.4 },
            f_phi: ScalarFn::SmoothBlend { low: 0.0, high: -0.1 },
            h: ScalarFn::SmoothBlend { low: 0.2, high: 1.0 },
        },
        ..ModelSpec::default()
    }
}

/// [`growth_spec`] with `eta = 0.01`, `lambda = 0.005`: friction dominates
/// viscosity on the unit square already at scale 1, so the sweep starts inside
/// the regime where the Darcy problem is the relevant limit.
pub fn viscosity_limit_spec() -> ModelSpec {
    ModelSpec {
        viscosity: ViscositySpec::constant(0.01, 0.005),
        ..growth_spec()
    }
}

/// Brinkman-to-Darcy sweep: viscosities scaled by `s` at frozen fields,
/// compared with the Darcy solve of the same data. Error is
/// `||v_s - v_darcy||_2`; columns `pressure_gap`, `shear_energy`
/// (`int 2 s eta |D v_s|^2`), `div_residual` and `gamma_norm`. `monotonic`
/// requires both gaps and the shear energy to decrease strictly.
pub fn viscosity_limit_study(
    g: &Grid2D,
    fields: &FrozenFields,
    spec: &ModelSpec,
    scales: &[f64],
) -> Result<SweepResult, Error> {
    check_sweep("viscosity scales", scales, false)?;
    if scales[scales.len() - 1] <= 0.0 {
        return Err(precondition("viscosity scales must be positive".into()));
    }
    let force = capillary_force(g, &fields.phi, &fields.mu, &fields.sigma, spec.params.chi);
    let gamma = spec.sources.gamma_v_field(&fields.phi, &fields.sigma);
    let nu = spec.params.nu;
    let darcy = solve_darcy_with(g, nu, &force, &gamma, FLOW_TOL, None)?;
    let mut vgap = Vec::new();
    let mut pgap = Vec::new();
    let mut shear = Vec::new();
    let mut divs = Vec::new();
    let mut prev = None;
    for &s in scales {
        let mut scaled = spec.clone();
        scaled.viscosity = spec.viscosity.scaled(s);
        let coef = BrinkmanCoefficients::from_spec(&fields.phi, &scaled);
        let sol = solve_brinkman_with(g, &coef, &force, &gamma, FLOW_TOL, prev.as_ref())?;
        vgap.push(face_l2(g, &sol.vel.zip_map(&darcy.vel, |a, b| a - b)));
        pgap.push(l2_norm(g, &sol.p.zip_map(&darcy.p, |a, b| a - b)));
        shear.push(shear_energy(g, &sol.vel, &coef));
        divs.push(sol.div_residual);
        prev = Some(sol);
    }
    let p_monotonic = strictly_decreasing(&pgap) && strictly_decreasing(&shear);
    let mut r = SweepResult::new("viscosity-limit", "scale", scales.to_vec(), vgap)
        .with_column("pressure_gap", pgap)
        .with_column("shear_energy", shear)
        .with_column("div_residual", divs)
        .with_column("gamma_norm", vec![gamma.norm2(); scales.len()]);
    r.monotonic &= p_monotonic;
    Ok(r)
}

/// Coupled-trajectory variant of [`viscosity_limit_study`]: full runs of
/// `n_steps` from `phi0` with scaled viscosities against a Darcy run. Error
/// is the final-time `||v_s - v_darcy||_2`; columns `phi_gap` (final
/// `||phi_s - phi_darcy||_2`) and `shear_energy`. Only monotonicity of the
/// velocity gap is asserted through `monotonic`.
pub fn viscosity_limit_trajectory_study(
    g: &Grid2D,
    spec: &ModelSpec,
    phi0: &CellField,
    scales: &[f64],
    n_steps: usize,
    cfg: &StepConfig,
) -> Result<SweepResult, Error> {
    check_sweep("viscosity scales", scales, false)?;
    let darcy_cfg = StepConfig {
        flow_mode: FlowMode::Darcy,
        ..*cfg
    };
    let brinkman_cfg = StepConfig {
        flow_mode: FlowMode::Brinkman,
        ..*cfg
    };
    let darcy = trajectory(g, phi0.clone(), spec, &darcy_cfg, n_steps)?;
    let d_end = darcy.last().expect("trajectory holds the initial state");
    let mut vgap = Vec::new();
    let mut phigap = Vec::new();
    let mut shear = Vec::new();
    for &s in scales {
        let mut scaled = spec.clone();
        scaled.viscosity = spec.viscosity.scaled(s);
        let run = trajectory(g, phi0.clone(), &scaled, &brinkman_cfg, n_steps)?;
        let end = run.last().expect("trajectory holds the initial state");
        vgap.push(face_l2(g, &end.vel.zip_map(&d_end.vel, |a, b| a - b)));
        phigap.push(l2_norm(g, &end.phi.zip_map(&d_end.phi, |a, b| a - b)));
        shear.push(shear_energy(g, &end.vel, &BrinkmanCoefficients::from_spec(&end.phi, &scaled)));
    }
    Ok(SweepResult::new("viscosity-limit-trajectory", "scale", scales.to_vec(), vgap)
        .with_column("phi_gap", phigap)
        .with_column("shear_energy", shear))
}

// ---------------------------------------------------------------------------
// Continuous dependence

/// Smooth zero-flux perturbation direction for `phi0`.
pub fn perturbation_direction(g: &Grid2D) -> CellField {
    CellField::from_fn(g, |x, y| (PI * x / g.lx).cos() * (PI * y / g.ly).cos())
}

fn trajectory(
    g: &Grid2D,
    phi0: CellField,
    spec: &ModelSpec,
    cfg: &StepConfig,
    n_steps: usize,
) -> Result<Vec<State>, Error> {
    let s0 = initial_state(g, phi0, spec, cfg).map_err(|source| Error::Step { step: 0, source })?;
    let mut out = vec![s0.clone()];
    simulate(g, s0, spec, cfg, n_steps, |_, s, _| out.push(s.clone()))?;
    Ok(out)
}

/// Paired runs from `phi0` and `phi0 + delta w` with `w` from
/// [`perturbation_direction`]. Error is the measured ratio
/// `sup_t ||phi_1 - phi_2||_{H1} / ||delta w||_{H1}`; column `sup_h1_gap`.
/// Requires constant mobility.
pub fn continuous_dependence_study(
    g: &Grid2D,
    spec: &ModelSpec,
    phi0: &CellField,
    deltas: &[f64],
    n_steps: usize,
    cfg: &StepConfig,
) -> Result<SweepResult, Error> {
    if !spec.mobility.is_constant() {
        return Err(ModelError::Invalid("continuous dependence needs constant mobility".into()).into());
    }
    check_sweep("deltas", deltas, false)?;
    let w = perturbation_direction(g);
    let w_norm = h1_norm(g, &w);
    let base = trajectory(g, phi0.clone(), spec, cfg, n_steps)?;
    let mut ratios = Vec::new();
    let mut gaps = Vec::new();
    for &d in deltas {
        if d == 0.0 {
            ratios.push(0.0);
            gaps.push(0.0);
            continue;
        }
        let pert = trajectory(g, phi0.zip_map(&w, |a, b| a + d * b), spec, cfg, n_steps)?;
        let sup = base
            .iter()
            .zip(&pert)
            .map(|(a, b)| h1_norm(g, &a.phi.zip_map(&b.phi, |x, y| x - y)))
            .fold(0.0, f64::max);
        gaps.push(sup);
        ratios.push(sup / (d.abs() * w_norm));
    }
    let mut r = SweepResult::new("continuous-dependence", "delta", deltas.to_vec(), ratios)
        .with_column("sup_h1_gap", gaps);
    r.monotonic = ratio_spread(&r.errors) <= 10.0;
    Ok(r)
}

/// Perturbs only the ambient nutrient level by `delta zeta` with a smooth
/// positive boundary profile `zeta`. Error is the measured constant
/// `sup_t ||sigma_1 - sigma_2||_2 / ||delta zeta||_{L2(boundary)}`; column
/// `sup_phi_h1_gap`.
pub fn sigma_inf_dependence_study(
    g: &Grid2D,
    spec: &ModelSpec,
    phi0: &CellField,
    deltas: &[f64],
    n_steps: usize,
    cfg: &StepConfig,
) -> Result<SweepResult, Error> {
    check_sweep("deltas", deltas, false)?;
    let zeta = |x: f64, y: f64| 1.0 + 0.5 * (PI * x / g.lx).cos() * (PI * y / g.ly).cos();
    let zeta_norm = BoundaryField::from_fn(g, zeta).l2_norm(g);
    let base = trajectory(g, phi0.clone(), spec, cfg, n_steps)?;
    let mut consts = Vec::new();
    let mut phi_gaps = Vec::new();
    for &d in deltas {
        let mut pspec = spec.clone();
        pspec.sigma_inf = perturbed_sigma_inf(g, &spec.sigma_inf, d, zeta)?;
        let pert = trajectory(g, phi0.clone(), &pspec, cfg, n_steps)?;
        let (mut s_gap, mut p_gap) = (0.0_f64, 0.0_f64);
        for (a, b) in base.iter().zip(&pert) {
            s_gap = s_gap.max(l2_norm(g, &a.sigma.zip_map(&b.sigma, |x, y| x - y)));
            p_gap = p_gap.max(h1_norm(g, &a.phi.zip_map(&b.phi, |x, y| x - y)));
        }
        consts.push(if d == 0.0 { 0.0 } else { s_gap / (d.abs() * zeta_norm) });
        phi_gaps.push(p_gap);
    }
    let mut r = SweepResult::new("sigma-inf-dependence", "delta", deltas.to_vec(), consts)
        .with_column("sup_phi_h1_gap", phi_gaps);
    r.monotonic = ratio_spread(&r.errors) <= 10.0;
    Ok(r)
}

fn perturbed_sigma_inf(
    g: &Grid2D,
    base: &SigmaInf,
    delta: f64,
    zeta: impl Fn(f64, f64) -> f64,
) -> Result<SigmaInf, Error> {
    Ok(match base {
        SigmaInf::TimeDependent(f) => {
            let f = f.clone();
            let (lx, ly) = (g.lx, g.ly);
            SigmaInf::TimeDependent(std::sync::Arc::new(move |t, x, y| {
                f(t, x, y) + delta * (1.0 + 0.5 * (PI * x / lx).cos() * (PI * y / ly).cos())
            }))
        }
        other => {
            let b = other.at(g, 0.0)?;
            let z = BoundaryField::from_fn(g, zeta);
            SigmaInf::PerFace(b.values.iter().zip(&z.values).map(|(a, c)| a + delta * c).collect())
        }
    })
}

/// `max / min` over the nonzero entries; `1` when there are none.
pub fn ratio_spread(v: &[f64]) -> f64 {
    let nz: Vec<f64> = v.iter().copied().filter(|x| *x != 0.0).map(f64::abs).collect();
    if nz.is_empty() {
        return 1.0;
    }
    let max = nz.iter().copied().fold(0.0, f64::max);
    let min = nz.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

// ---------------------------------------------------------------------------
// Spinodal energy benchmark

/// Spinodal decomposition without sources or chemotaxis on a `64 x 64` unit
/// square: `epsilon = 0.1`, constant mobility `0.05`, `eta = nu = 1`,
/// `lambda = 0`, `phi0 = 0.01 U(-1, 1)` with seed 42.
pub fn spinodal_spec() -> ModelSpec {
    let mut spec = ModelSpec::default();
    spec.params.epsilon = 0.1;
    spec.params.chi = 0.0;
    spec.params.nu = 1.0;
    spec.sources = SourceSpec::zero();
    spec.viscosity = ViscositySpec::constant(1.0, 0.0);
    spec.mobility = MobilitySpec::constant(0.05);
    spec.phi0 = InitialPhase::RandomPerturbation {
        mean: 0.0,
        amplitude: 0.01,
        seed: 42,
    };
    spec
}

pub const SPINODAL_N: usize = 64;
pub const SPINODAL_T: f64 = 0.02;

/// Runs the spinodal benchmark to `t_final` with step `dt`, returning the
/// per-step diagnostics.
pub fn spinodal_run(dt: f64, t_final: f64, flow_mode: FlowMode) -> Result<Vec<Diagnostics>, Error> {
    let g = Grid2D::unit_square(SPINODAL_N)?;
    let spec = spinodal_spec();
    let cfg = StepConfig {
        dt,
        flow_mode,
        ..StepConfig::default()
    };
    let steps = (t_final / dt).round() as usize;
    let s0 = initial_state(&g, spec.phi0.sample(&g), &spec, &cfg).map_err(|source| Error::Step { step: 0, source })?;
    let mut diags = Vec::with_capacity(steps);
    simulate(&g, s0, &spec, &cfg, steps, |_, _, d| diags.push(*d))?;
    Ok(diags)
}

/// Energy-residual convergence in `dt`: the residual of the step ending at
/// `t_final` for each `dt`. Columns `max_energy_increase` (largest step-wise
/// energy growth, non-positive for a dissipative run) and `steps`.
pub fn energy_convergence(dts: &[f64], t_final: f64) -> Result<SweepResult, Error> {
    let mut res = Vec::new();
    let mut growth = Vec::new();
    let mut steps = Vec::new();
    for &dt in dts {
        let d = spinodal_run(dt, t_final, FlowMode::Brinkman)?;
        res.push(d.last().map_or(f64::NAN, |x| x.energy_residual));
        growth.push(d.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max));
        steps.push(d.len() as f64);
    }
    Ok(SweepResult::new("energy-residual", "dt", dts.to_vec(), res)
        .with_column("max_energy_increase", growth)
        .with_column("steps", steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &y) + 1.5).abs() < 1e-12);
        assert!(loglog_slope(&[1.0], &[1.0]).is_nan());
    }

    #[test]
    fn brinkman_mms_derivatives_match_finite_differences() {
        let h = 1e-5;
        for &x in &[0.1, 0.37, 0.8] {
            assert!(((u(x + h) - u(x - h)) / (2.0 * h) - du(x)).abs() < 1e-8);
            assert!(((du(x + h) - du(x - h)) / (2.0 * h) - d2u(x)).abs() < 1e-8);
            assert!(((xx(x + h) - xx(x - h)) / (2.0 * h) - dxx(x)).abs() < 1e-8);
            assert!(((dxx(x + h) - dxx(x - h)) / (2.0 * h) - d2xx(x)).abs() < 1e-8);
            assert!(((d2xx(x + h) - d2xx(x - h)) / (2.0 * h) - d3xx(x)).abs() < 1e-7);
        }
    }

    #[test]
    fn csv_round_trips_floats() {
        let r = SweepResult::new("t", "h", vec![0.1, 0.05], vec![1e-7 / 3.0, 2e-9]).with_column("n", vec![10.0, 20.0]);
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("h,error,n"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first, vec![0.1, 1e-7 / 3.0, 10.0]);
    }

    #[test]
    fn ratio_spread_ignores_zeros() {
        assert_eq!(ratio_spread(&[0.0, 2.0, 4.0]), 2.0);
        assert_eq!(ratio_spread(&[0.0]), 1.0);
    }
}
