//! Time stepping of the coupled system: nutrient, Cahn-Hilliard, then flow.

use crate::elliptic::{solve_nutrient_with_tol, NutrientClosure, NUTRIENT_TOL};
use crate::error::{SolverError, Stage, StepError};
use crate::flow::{solve_brinkman_from, solve_darcy_from, viscous_dissipation, FlowSolution, FLOW_TOL};
use crate::grid::{
    advect_upwind, average_to_faces, boundary_flux_integral, cell_inner, divergence_of_faces, face_inner,
    gradient_to_faces, integrate_cells, laplacian_neumann, CellField, FaceField, Grid2D,
};
use crate::linalg::{
    bicgstab_solve_with, LinearSystem, Preconditioner, SolveOptions, SolveStats, TripletBuilder,
};
use crate::spectral::CosineBasis;
use std::sync::Arc;
use crate::model::ModelSpec;

pub const CH_TOL: f64 = 1e-9;
/// Stabilisation `S`: `sup |psi''|` of the quartic well on `[-1, 1]`.
pub const DEFAULT_STABILIZATION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowMode {
    #[default]
    Brinkman,
    Darcy,
}

impl std::str::FromStr for FlowMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brinkman" => Ok(FlowMode::Brinkman),
            "darcy" => Ok(FlowMode::Darcy),
            other => Err(format!("unknown flow mode `{other}` (expected brinkman or darcy)")),
        }
    }
}

impl std::fmt::Display for FlowMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FlowMode::Brinkman => "brinkman",
            FlowMode::Darcy => "darcy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub stabilization: f64,
    pub nutrient_tol: f64,
    pub ch_tol: f64,
    pub flow_tol: f64,
    pub flow_mode: FlowMode,
    /// Refuse steps whose `dt` exceeds the advective CFL bound.
    pub strict_cfl: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 1e-4,
            stabilization: DEFAULT_STABILIZATION,
            nutrient_tol: NUTRIENT_TOL,
            ch_tol: CH_TOL,
            flow_tol: FLOW_TOL,
            flow_mode: FlowMode::Brinkman,
            strict_cfl: false,
        }
    }
}

impl StepConfig {
    pub fn with_dt(dt: f64) -> Self {
        StepConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), StepError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(StepError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.stabilization.is_finite() && self.stabilization >= 0.0) {
            return Err(StepError::Config(format!(
                "stabilization S must be non-negative, got {}",
                self.stabilization
            )));
        }
        for (name, tol) in [
            ("nutrient_tol", self.nutrient_tol),
            ("ch_tol", self.ch_tol),
            ("flow_tol", self.flow_tol),
        ] {
            if !(tol.is_finite() && tol > 0.0 && tol < 1.0) {
                return Err(StepError::Config(format!("{name} must lie in (0, 1), got {tol}")));
            }
        }
        Ok(())
    }
}

/// The solution quintuple at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub phi: CellField,
    pub mu: CellField,
    pub sigma: CellField,
    pub p: CellField,
    pub vel: FaceField,
}

impl State {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.phi.is_finite()
            && self.mu.is_finite()
            && self.sigma.is_finite()
            && self.p.is_finite()
            && self.vel.is_finite()
    }

    pub fn fits(&self, g: &Grid2D) -> bool {
        self.phi.fits(g) && self.mu.fits(g) && self.sigma.fits(g) && self.p.fits(g) && self.vel.fits(g)
    }

    /// Spatially uniform state at rest.
    pub fn uniform(g: &Grid2D, phi: f64, mu: f64, sigma: f64) -> Self {
        State {
            t: 0.0,
            phi: CellField::constant(g, phi),
            mu: CellField::constant(g, mu),
            sigma: CellField::constant(g, sigma),
            p: CellField::zeros(g),
            vel: FaceField::zeros(g),
        }
    }

    fn flow(&self) -> FlowSolution {
        FlowSolution {
            vel: self.vel.clone(),
            p: self.p.clone(),
            stats: SolveStats {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
            div_residual: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub dissipation: f64,
    /// Outflow of `phi` through the boundary during the step.
    pub boundary_flux: f64,
    pub source_mass: f64,
    pub div_residual: f64,
    pub energy_residual: f64,
    pub mass_residual: f64,
    /// Advective CFL bound `0.5 min(dx, dy) / max|v|` for the next step.
    pub suggested_dt: f64,
    pub nutrient_stats: SolveStats,
    pub ch_stats: SolveStats,
    pub flow_stats: SolveStats,
}

/// `int eps^-1 psi(phi) + eps/2 |grad phi|^2`.
pub fn energy(g: &Grid2D, phi: &CellField, spec: &ModelSpec) -> f64 {
    let eps = spec.params.epsilon;
    let bulk = integrate_cells(g, &phi.map(|s| spec.potential.psi(s)));
    let grad = gradient_to_faces(g, phi);
    bulk / eps + 0.5 * eps * face_inner(g, &grad, &grad)
}

/// `int m(phi) |grad mu|^2` with two-cell averaged face mobility.
pub fn chemical_dissipation(g: &Grid2D, phi: &CellField, mu: &CellField, spec: &ModelSpec) -> f64 {
    let m = average_to_faces(g, &phi.map(|s| spec.mobility.m.eval(s)));
    let grad = gradient_to_faces(g, mu);
    face_inner(g, &m.zip_map(&grad, |a, b| a * b), &grad)
}

/// Advective CFL bound, infinite for a fluid at rest.
pub fn cfl_bound(g: &Grid2D, vel: &FaceField) -> f64 {
    let vmax = vel.max_abs();
    if vmax > 0.0 {
        0.5 * g.dx.min(g.dy) / vmax
    } else {
        f64::INFINITY
    }
}

fn nutrient(
    g: &Grid2D,
    phi: &CellField,
    spec: &ModelSpec,
    t: f64,
    tol: f64,
) -> Result<(CellField, SolveStats), StepError> {
    let sigma_inf = spec
        .sigma_inf
        .at(g, t)
        .map_err(|e| StepError::at(Stage::Nutrient)(SolverError::Singular(e.to_string())))?;
    let closure = NutrientClosure::Robin { k: spec.params.k };
    solve_nutrient_with_tol(g, phi, &spec.sources.h, &sigma_inf, closure, None, tol)
        .map_err(StepError::at(Stage::Nutrient))
}

fn psi_prime(phi: &CellField, spec: &ModelSpec) -> Result<CellField, StepError> {
    let d = phi.map(|s| spec.potential.dpsi(s));
    if !d.is_finite() {
        return Err(StepError::at(Stage::CahnHilliard)(SolverError::NonFinite(
            "psi' evaluation",
        )));
    }
    Ok(d)
}

/// Chemical potential `eps^-1 psi'(phi) - eps lap(phi) - chi sigma`.
pub fn chemical_potential(
    g: &Grid2D,
    phi: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
) -> Result<CellField, StepError> {
    let eps = spec.params.epsilon;
    let chi = spec.params.chi;
    let d = psi_prime(phi, spec)?;
    let lap = laplacian_neumann(g, phi);
    let mut mu = d.zip_map(&lap, |d, l| d / eps - eps * l);
    for c in 0..g.n_cells() {
        mu[c] -= chi * sigma[c];
    }
    Ok(mu)
}

/// `div(m grad mu)` with zero boundary flux.
fn mobility_divergence(g: &Grid2D, m_faces: &FaceField, mu: &CellField) -> CellField {
    let grad = gradient_to_faces(g, mu);
    divergence_of_faces(g, &m_faces.zip_map(&grad, |a, b| a * b))
}

/// Monolithic `(phi, mu)` system of one stabilised semi-implicit step.
/// Unknowns are ordered `[phi | mu]`.
pub fn assemble_ch(g: &Grid2D, state: &State, spec: &ModelSpec, cfg: &StepConfig) -> Result<LinearSystem, StepError> {
    let n = g.n_cells();
    let eps = spec.params.epsilon;
    let chi = spec.params.chi;
    let dt = cfg.dt;
    let s = cfg.stabilization;
    let m_faces = average_to_faces(g, &state.phi.map(|v| spec.mobility.m.eval(v)));
    if !m_faces.is_finite() {
        return Err(StepError::at(Stage::CahnHilliard)(SolverError::NonFinite("mobility")));
    }
    let d = psi_prime(&state.phi, spec)?;
    let adv = advect_upwind(g, &state.phi, &state.vel);
    let gamma_phi = spec.sources.gamma_phi_field(&state.phi, &state.sigma);

    let mut t = TripletBuilder::with_capacity(2 * n, 14 * n);
    let mut rhs = vec![0.0; 2 * n];
    let (idx2, idy2) = (1.0 / (g.dx * g.dx), 1.0 / (g.dy * g.dy));
    // neighbours across interior faces: (cell, coefficient for -div(m grad) , coefficient for -lap)
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let mut nbrs: [(usize, f64, f64); 4] = [(0, 0.0, 0.0); 4];
            let mut k = 0;
            if i > 0 {
                nbrs[k] = (g.cell(i - 1, j), m_faces.x[g.xface(i, j)] * idx2, idx2);
                k += 1;
            }
            if i + 1 < g.nx {
                nbrs[k] = (g.cell(i + 1, j), m_faces.x[g.xface(i + 1, j)] * idx2, idx2);
                k += 1;
            }
            if j > 0 {
                nbrs[k] = (g.cell(i, j - 1), m_faces.y[g.yface(i, j)] * idy2, idy2);
                k += 1;
            }
            if j + 1 < g.ny {
                nbrs[k] = (g.cell(i, j + 1), m_faces.y[g.yface(i, j + 1)] * idy2, idy2);
                k += 1;
            }
            // phi row: phi/dt - div(m grad mu) = phi^n/dt - adv + Gamma_phi
            t.add(c, c, 1.0 / dt);
            // mu row: mu - (S/eps) phi + eps lap(phi) = (psi'(phi^n) - S phi^n)/eps - chi sigma
            t.add(n + c, n + c, 1.0);
            t.add(n + c, c, -s / eps);
            for &(nb, mw, lw) in &nbrs[..k] {
                t.add(c, n + c, mw);
                t.add(c, n + nb, -mw);
                t.add(n + c, c, -eps * lw);
                t.add(n + c, nb, eps * lw);
            }
            rhs[c] = state.phi[c] / dt - adv[c] + gamma_phi[c];
            rhs[n + c] = (d[c] - s * state.phi[c]) / eps - chi * state.sigma[c];
        }
    }
    Ok(LinearSystem {
        matrix: t.build(),
        rhs,
    })
}

fn mean_interior_mobility(g: &Grid2D, m_faces: &FaceField) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..g.ny {
        for i in 1..g.nx {
            sum += m_faces.x[g.xface(i, j)];
            count += 1;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            sum += m_faces.y[g.yface(i, j)];
            count += 1;
        }
    }
    sum / count as f64
}

/// Exact inverse of the Cahn-Hilliard block system with mobility frozen at
/// `m_bar`, applied mode by mode in the cosine basis.
pub fn ch_preconditioner(g: &Grid2D, spec: &ModelSpec, cfg: &StepConfig, m_bar: f64) -> Preconditioner {
    let n = g.n_cells();
    let basis = CosineBasis::new(g);
    let eps = spec.params.epsilon;
    let (dt, s) = (cfg.dt, cfg.stabilization);
    Preconditioner::Operator(Arc::new(move |r: &[f64], z: &mut [f64]| {
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        basis.forward(&r[..n], &mut a);
        basis.forward(&r[n..], &mut b);
        for (k, &lam) in basis.eigenvalues().iter().enumerate() {
            let coupling = s / eps + eps * lam;
            let det = 1.0 / dt + m_bar * lam * coupling;
            let phi = (a[k] - m_bar * lam * b[k]) / det;
            b[k] += coupling * phi;
            a[k] = phi;
        }
        let (zp, zm) = z.split_at_mut(n);
        basis.inverse(&a, zp);
        basis.inverse(&b, zm);
    }))
}

/// One stabilised semi-implicit Cahn-Hilliard update using `state.vel` for
/// convection and `state.sigma` for the nutrient. Returns `(phi, mu)`.
///
/// The new `phi` is rebuilt from the conservative flux form with the solved
/// `mu`, so the discrete mass balance holds to round-off.
pub fn ch_update(
    g: &Grid2D,
    state: &State,
    spec: &ModelSpec,
    cfg: &StepConfig,
) -> Result<(CellField, CellField), StepError> {
    ch_update_with_stats(g, state, spec, cfg).map(|(phi, mu, _)| (phi, mu))
}

pub fn ch_update_with_stats(
    g: &Grid2D,
    state: &State,
    spec: &ModelSpec,
    cfg: &StepConfig,
) -> Result<(CellField, CellField, SolveStats), StepError> {
    if !state.fits(g) {
        return Err(StepError::at(Stage::CahnHilliard)(SolverError::Shape("cahn-hilliard")));
    }
    if !state.is_finite() {
        return Err(StepError::at(Stage::CahnHilliard)(SolverError::NonFinite("cahn-hilliard")));
    }
    let n = g.n_cells();
    let sys = assemble_ch(g, state, spec, cfg)?;
    let guess: Vec<f64> = state.phi.as_slice().iter().chain(state.mu.as_slice()).copied().collect();
    let m_faces = average_to_faces(g, &state.phi.map(|v| spec.mobility.m.eval(v)));
    let (x, stats) = bicgstab_solve_with(
        &sys.matrix,
        &sys.rhs,
        &SolveOptions {
            tol: cfg.ch_tol,
            max_iter: Some(20 * 2 * n),
            preconditioner: ch_preconditioner(g, spec, cfg, mean_interior_mobility(g, &m_faces)),
            initial_guess: Some(guess),
            ..Default::default()
        },
    );
    if !stats.converged {
        return Err(StepError::at(Stage::CahnHilliard)(
            crate::error::SolveFailure {
                system: "cahn-hilliard",
                stats,
            }
            .into(),
        ));
    }
    let mu = CellField::from_vec(g, x[n..].to_vec()).expect("layout");
    let diffusion = mobility_divergence(g, &m_faces, &mu);
    let adv = advect_upwind(g, &state.phi, &state.vel);
    let gamma_phi = spec.sources.gamma_phi_field(&state.phi, &state.sigma);
    let mut phi = state.phi.clone();
    for c in 0..n {
        phi[c] += cfg.dt * (diffusion[c] - adv[c] + gamma_phi[c]);
    }
    if !phi.is_finite() || !mu.is_finite() {
        return Err(StepError::at(Stage::CahnHilliard)(SolverError::NonFinite("cahn-hilliard")));
    }
    Ok((phi, mu, stats))
}

#[allow(clippy::too_many_arguments)]
fn flow(
    g: &Grid2D,
    phi: &CellField,
    mu: &CellField,
    sigma: &CellField,
    spec: &ModelSpec,
    cfg: &StepConfig,
    initial: Option<&FlowSolution>,
) -> Result<FlowSolution, StepError> {
    match cfg.flow_mode {
        FlowMode::Brinkman => solve_brinkman_from(g, phi, mu, sigma, spec, None, cfg.flow_tol, initial),
        FlowMode::Darcy => solve_darcy_from(g, phi, mu, sigma, spec, None, cfg.flow_tol, initial),
    }
    .map_err(StepError::at(Stage::Flow))
}

/// Initial state from `phi0`: nutrient, chemical potential, then one flow solve.
pub fn initial_state(
    g: &Grid2D,
    phi0: CellField,
    spec: &ModelSpec,
    cfg: &StepConfig,
) -> Result<State, StepError> {
    cfg.check()?;
    if !phi0.fits(g) {
        return Err(StepError::at(Stage::Initialisation)(SolverError::Shape("initial phase")));
    }
    if !phi0.is_finite() {
        return Err(StepError::at(Stage::Initialisation)(SolverError::NonFinite("initial phase")));
    }
    let (sigma, _) = nutrient(g, &phi0, spec, 0.0, cfg.nutrient_tol)?;
    let mu = chemical_potential(g, &phi0, &sigma, spec)?;
    let fl = flow(g, &phi0, &mu, &sigma, spec, cfg, None)?;
    Ok(State {
        t: 0.0,
        phi: phi0,
        mu,
        sigma,
        p: fl.p,
        vel: fl.vel,
    })
}

/// Advances one step: `sigma^n` from `phi^n`, Cahn-Hilliard with `v^n`, then
/// flow at `(phi^{n+1}, mu^{n+1}, sigma^n)`. The returned state carries
/// `sigma^n`, the nutrient the new `mu` and `v` were computed with.
pub fn step(
    g: &Grid2D,
    state: &State,
    spec: &ModelSpec,
    cfg: &StepConfig,
) -> Result<(State, Diagnostics), StepError> {
    cfg.check()?;
    if cfg.strict_cfl {
        let bound = cfl_bound(g, &state.vel);
        if cfg.dt > bound {
            return Err(StepError::Cfl { dt: cfg.dt, bound });
        }
    }
    let (sigma, nutrient_stats) = nutrient(g, &state.phi, spec, state.t, cfg.nutrient_tol)?;
    let lagged = State {
        sigma,
        ..state.clone()
    };
    let (phi, mu, ch_stats) = ch_update_with_stats(g, &lagged, spec, cfg)?;
    let fl = flow(g, &phi, &mu, &lagged.sigma, spec, cfg, Some(&state.flow()))?;
    let next = State {
        t: state.t + cfg.dt,
        phi,
        mu,
        sigma: lagged.sigma,
        p: fl.p,
        vel: fl.vel,
    };
    let diag = Diagnostics {
        t: next.t,
        energy: energy(g, &next.phi, spec),
        mass: integrate_cells(g, &next.phi),
        dissipation: chemical_dissipation(g, &next.phi, &next.mu, spec)
            + flow_dissipation(g, &next.vel, &next.phi, spec, cfg.flow_mode),
        boundary_flux: boundary_flux_integral(g, &state.phi, &state.vel),
        source_mass: source_mass(g, &state.phi, &next.sigma, spec),
        div_residual: fl.div_residual,
        energy_residual: energy_residual_with(g, state, &next, spec, cfg.dt, cfg.flow_mode),
        mass_residual: mass_balance_residual(g, state, &next, spec, cfg.dt),
        suggested_dt: cfl_bound(g, &next.vel),
        nutrient_stats,
        ch_stats,
        flow_stats: fl.stats,
    };
    Ok((next, diag))
}

/// `int Gamma_phi - phi Gamma_v`.
pub fn source_mass(g: &Grid2D, phi: &CellField, sigma: &CellField, spec: &ModelSpec) -> f64 {
    let gp = spec.sources.gamma_phi_field(phi, sigma);
    let gv = spec.sources.gamma_v_field(phi, sigma);
    let mut s = 0.0;
    for c in 0..g.n_cells() {
        s += gp[c] - phi[c] * gv[c];
    }
    s * g.cell_area()
}

/// Residual of the discrete energy balance over one step:
///
/// `|dE/dt + int m|grad mu|^2 + D_visc(v) - rhs|` where `rhs` collects the
/// chemotaxis term `-chi int m grad mu . grad sigma`, the source work
/// `int (Gamma_phi - phi Gamma_v)(mu + chi sigma)` and the pressure work
/// `int p Gamma_v`. Quantities are paired as the scheme uses them: `mu`,
/// `sigma` from `next`, and `phi`, `v`, `p` from `prev`.
pub fn energy_residual(g: &Grid2D, prev: &State, next: &State, spec: &ModelSpec, dt: f64) -> f64 {
    energy_residual_with(g, prev, next, spec, dt, FlowMode::Brinkman)
}

/// Dissipation of the flow model: `D_visc` for Brinkman, `nu int |v|^2` for
/// Darcy, which has no viscous stress.
pub fn flow_dissipation(g: &Grid2D, vel: &FaceField, phi: &CellField, spec: &ModelSpec, mode: FlowMode) -> f64 {
    match mode {
        FlowMode::Brinkman => viscous_dissipation(g, vel, phi, spec),
        FlowMode::Darcy => spec.params.nu * face_inner(g, vel, vel),
    }
}

/// [`energy_residual`] for the given flow model.
pub fn energy_residual_with(
    g: &Grid2D,
    prev: &State,
    next: &State,
    spec: &ModelSpec,
    dt: f64,
    mode: FlowMode,
) -> f64 {
    let chi = spec.params.chi;
    let de = (energy(g, &next.phi, spec) - energy(g, &prev.phi, spec)) / dt;
    let m_faces = average_to_faces(g, &prev.phi.map(|s| spec.mobility.m.eval(s)));
    let grad_mu = gradient_to_faces(g, &next.mu);
    let flux = m_faces.zip_map(&grad_mu, |a, b| a * b);
    let chemical = face_inner(g, &flux, &grad_mu);
    let viscous = flow_dissipation(g, &prev.vel, &prev.phi, spec, mode);

    let chemotaxis = if chi != 0.0 {
        -chi * face_inner(g, &flux, &gradient_to_faces(g, &next.sigma))
    } else {
        0.0
    };
    let gp = spec.sources.gamma_phi_field(&prev.phi, &next.sigma);
    let gv = spec.sources.gamma_v_field(&prev.phi, &next.sigma);
    let mut source = CellField::zeros(g);
    let mut potential = CellField::zeros(g);
    for c in 0..g.n_cells() {
        source[c] = gp[c] - prev.phi[c] * gv[c];
        potential[c] = next.mu[c] + chi * next.sigma[c];
    }
    let source_work = cell_inner(g, &source, &potential);
    let pressure_work = cell_inner(g, &prev.p, &gv);
    (de + chemical + viscous - (chemotaxis + source_work + pressure_work)).abs()
}

/// `|(int phi^{n+1} - int phi^n)/dt + boundary flux - int Gamma_phi|`.
pub fn mass_balance_residual(g: &Grid2D, prev: &State, next: &State, spec: &ModelSpec, dt: f64) -> f64 {
    let dm = (integrate_cells(g, &next.phi) - integrate_cells(g, &prev.phi)) / dt;
    let flux = boundary_flux_integral(g, &prev.phi, &prev.vel);
    let src = integrate_cells(g, &spec.sources.gamma_phi_field(&prev.phi, &next.sigma));
    (dm + flux - src).abs()
}

/// Runs `n_steps` steps, calling `observe` after each one.
pub fn simulate(
    g: &Grid2D,
    state: State,
    spec: &ModelSpec,
    cfg: &StepConfig,
    n_steps: usize,
    mut observe: impl FnMut(usize, &State, &Diagnostics),
) -> Result<State, crate::error::Error> {
    let mut state = state;
    for k in 1..=n_steps {
        let (next, diag) = step(g, &state, spec, cfg).map_err(|source| crate::error::Error::Step { step: k, source })?;
        observe(k, &next, &diag);
        state = next;
    }
    Ok(state)
}
