//! JSON run configuration.
//!
//! Parsing is strict: unknown keys are errors reported with line and column.
//! Every block except `grid` may be omitted; omitted fields take the defaults
//! documented on each field. Minimal example:
//!
//! ```json
//! { "grid": { "nx": 64, "ny": 64 } }
//! ```
//!
//! Scalar evaluators (`eta`, sources, ...) are written as one of
//! `{"constant": c}`, `{"blend": {"low": a, "high": b}}` (tanh blend between
//! host and tumour values) or `{"linear": {"slope": a, "intercept": b}}`.

use serde::Deserialize;

use crate::error::{ConfigError, ModelError};
use crate::grid::Grid2D;
use crate::model::{
    default_quartic_potential, validate, InitialPhase, MobilitySpec, ModelParams, ModelSpec, PotentialSpec,
    ScalarFn, SigmaInf, SourceSpec, ViscositySpec, DEFAULT_SAMPLES, DEFAULT_SAMPLE_RANGE,
};
use crate::stepper::{FlowMode, StepConfig, DEFAULT_STABILIZATION};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub stepping: SteppingConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Seed of the random initial perturbation. Default 42.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Domain width. Default 1.
    #[serde(default = "one")]
    pub lx: f64,
    /// Domain height. Default 1.
    #[serde(default = "one")]
    pub ly: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarConfig {
    Constant(f64),
    Blend { low: f64, high: f64 },
    Linear { slope: f64, intercept: f64 },
}

impl ScalarConfig {
    fn build(self) -> ScalarFn {
        match self {
            ScalarConfig::Constant(c) => ScalarFn::Constant(c),
            ScalarConfig::Blend { low, high } => ScalarFn::SmoothBlend { low, high },
            ScalarConfig::Linear { slope, intercept } => ScalarFn::Linear { slope, intercept },
        }
    }

    /// Range of values on the real line, for the declared bounds of
    /// viscosity and mobility. Linear evaluators have none.
    fn range(self) -> (f64, f64) {
        match self {
            ScalarConfig::Constant(c) => (c, c),
            ScalarConfig::Blend { low, high } => (low.min(high), low.max(high)),
            ScalarConfig::Linear { slope, intercept } if slope == 0.0 => (intercept, intercept),
            ScalarConfig::Linear { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Default 0.05.
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    /// Friction coefficient. Default 1.
    #[serde(default = "one")]
    pub nu: f64,
    /// Robin permeability. Default 10.
    #[serde(default = "d_k")]
    pub k: f64,
    /// Chemotaxis. Default 0.
    #[serde(default)]
    pub chi: f64,
    /// Default 1.
    #[serde(default = "one")]
    pub t_final: f64,
    /// Default quartic double well.
    #[serde(default)]
    pub potential: PotentialConfig,
    /// Default `{"eta": {"constant": 1}, "lambda": {"constant": 0}}`.
    #[serde(default)]
    pub viscosity: ViscosityConfig,
    /// Default `{"constant": 1}`.
    #[serde(default = "d_mobility")]
    pub mobility: ScalarConfig,
    /// Default: no sources, `h = 1`.
    #[serde(default)]
    pub sources: SourcesConfig,
    /// Default `{"constant": 1}`.
    #[serde(default)]
    pub sigma_inf: SigmaInfConfig,
    /// Default random perturbation of amplitude 0.01 about 0.
    #[serde(default)]
    pub phi0: Phi0Config,
}

fn d_epsilon() -> f64 {
    0.05
}
fn d_k() -> f64 {
    10.0
}
fn d_mobility() -> ScalarConfig {
    ScalarConfig::Constant(1.0)
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            epsilon: d_epsilon(),
            nu: 1.0,
            k: d_k(),
            chi: 0.0,
            t_final: 1.0,
            potential: PotentialConfig::default(),
            viscosity: ViscosityConfig::default(),
            mobility: d_mobility(),
            sources: SourcesConfig::default(),
            sigma_inf: SigmaInfConfig::default(),
            phi0: Phi0Config::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    /// `(1 - s^2)^2 / 4`.
    #[default]
    Quartic,
    /// `psi1 + psi2` from coefficient lists in increasing degree, with the
    /// declared growth exponent and curvature bounds.
    Polynomial {
        psi1: Vec<f64>,
        psi2: Vec<f64>,
        rho: f64,
        r1: f64,
        r2: f64,
        r3: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscosityConfig {
    pub eta: ScalarConfig,
    #[serde(default = "zero_scalar")]
    pub lambda: ScalarConfig,
}

fn zero_scalar() -> ScalarConfig {
    ScalarConfig::Constant(0.0)
}

impl Default for ViscosityConfig {
    fn default() -> Self {
        ViscosityConfig {
            eta: ScalarConfig::Constant(1.0),
            lambda: zero_scalar(),
        }
    }
}

/// Each field defaults to `{"constant": 0}` except `h` (`{"constant": 1}`).
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesConfig {
    #[serde(default = "zero_scalar")]
    pub b_v: ScalarConfig,
    #[serde(default = "zero_scalar")]
    pub f_v: ScalarConfig,
    #[serde(default = "zero_scalar")]
    pub b_phi: ScalarConfig,
    #[serde(default = "zero_scalar")]
    pub f_phi: ScalarConfig,
    #[serde(default = "d_h")]
    pub h: ScalarConfig,
}

fn d_h() -> ScalarConfig {
    ScalarConfig::Constant(1.0)
}

impl Default for SourcesConfig {
    fn default() -> Self {
        SourcesConfig {
            b_v: zero_scalar(),
            f_v: zero_scalar(),
            b_phi: zero_scalar(),
            f_phi: zero_scalar(),
            h: d_h(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaInfConfig {
    Constant(f64),
    /// One value per boundary face: bottom, right, top, left, each in
    /// increasing coordinate order.
    PerFace(Vec<f64>),
}

impl Default for SigmaInfConfig {
    fn default() -> Self {
        SigmaInfConfig::Constant(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Phi0Config {
    Constant {
        value: f64,
    },
    /// `mean + amplitude U(-1, 1)` per cell, seeded by the top-level `seed`.
    Random {
        #[serde(default)]
        mean: f64,
        amplitude: f64,
    },
    /// `tanh((radius - r) / (sqrt(2) epsilon))` about `(cx, cy)`; the centre
    /// defaults to the middle of the domain.
    Tumour {
        radius: f64,
        cx: Option<f64>,
        cy: Option<f64>,
    },
}

impl Default for Phi0Config {
    fn default() -> Self {
        Phi0Config::Random {
            mean: 0.0,
            amplitude: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingConfig {
    /// Default 1e-4.
    #[serde(default = "d_dt")]
    pub dt: f64,
    /// Default 100.
    #[serde(default = "d_steps")]
    pub n_steps: usize,
    /// Stabilisation constant. Default 2.
    #[serde(default = "d_stab")]
    pub stabilization: f64,
    /// Relative tolerances, default 1e-10 (nutrient) and 1e-9 (others).
    #[serde(default = "d_nut_tol")]
    pub nutrient_tol: f64,
    #[serde(default = "d_tol")]
    pub ch_tol: f64,
    #[serde(default = "d_tol")]
    pub flow_tol: f64,
    /// `brinkman` (default) or `darcy`.
    #[serde(default)]
    pub flow_mode: FlowModeConfig,
    /// Refuse steps above the advective CFL bound. Default false.
    #[serde(default)]
    pub strict_cfl: bool,
}

fn d_dt() -> f64 {
    1e-4
}
fn d_steps() -> usize {
    100
}
fn d_stab() -> f64 {
    DEFAULT_STABILIZATION
}
fn d_nut_tol() -> f64 {
    crate::elliptic::NUTRIENT_TOL
}
fn d_tol() -> f64 {
    1e-9
}

impl Default for SteppingConfig {
    fn default() -> Self {
        SteppingConfig {
            dt: d_dt(),
            n_steps: d_steps(),
            stabilization: d_stab(),
            nutrient_tol: d_nut_tol(),
            ch_tol: d_tol(),
            flow_tol: d_tol(),
            flow_mode: FlowModeConfig::default(),
            strict_cfl: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowModeConfig {
    #[default]
    Brinkman,
    Darcy,
}

impl From<FlowModeConfig> for FlowMode {
    fn from(m: FlowModeConfig) -> Self {
        match m {
            FlowModeConfig::Brinkman => FlowMode::Brinkman,
            FlowModeConfig::Darcy => FlowMode::Darcy,
        }
    }
}

impl From<FlowMode> for FlowModeConfig {
    fn from(m: FlowMode) -> Self {
        match m {
            FlowMode::Brinkman => FlowModeConfig::Brinkman,
            FlowMode::Darcy => FlowModeConfig::Darcy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Default `out`.
    #[serde(default = "d_dir")]
    pub directory: String,
    /// Write `fields_<step>.vtk` every this many steps (and at step 0);
    /// 0 disables snapshots. Default 0.
    #[serde(default)]
    pub dump_stride: usize,
    /// Append a row to `diagnostics.csv` every this many steps. Default 1.
    #[serde(default = "d_stride")]
    pub diagnostics_stride: usize,
}

fn d_dir() -> String {
    "out".into()
}
fn d_stride() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: d_dir(),
            dump_stride: 0,
            diagnostics_stride: d_stride(),
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let cfg: SimConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.check()?;
    Ok(cfg)
}

impl SimConfig {
    /// Semantic checks: grid shape, model parameters, potential exponents
    /// and step settings. The full assumption audit runs separately.
    pub fn check(&self) -> Result<(), ConfigError> {
        self.grid()?;
        let spec = self.model_spec();
        spec.params.check()?;
        // hard rejections (growth exponent, quadratic split) surface here
        validate(&spec, (-1.0, 1.0), 3)?;
        if let SigmaInfConfig::PerFace(v) = &self.model.sigma_inf {
            let expected = 2 * (self.grid.nx + self.grid.ny);
            if v.len() != expected {
                return Err(ConfigError::Semantic(format!(
                    "sigma_inf.per_face needs {expected} values, got {}",
                    v.len()
                )));
            }
        }
        self.step_config()
            .check()
            .map_err(|e| ConfigError::Semantic(e.to_string()))?;
        if self.output.diagnostics_stride == 0 {
            return Err(ConfigError::Semantic("output.diagnostics_stride must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D, ConfigError> {
        Ok(Grid2D::new(self.grid.nx, self.grid.ny, self.grid.lx, self.grid.ly)?)
    }

    pub fn model_spec(&self) -> ModelSpec {
        let m = &self.model;
        let potential = match &m.potential {
            PotentialConfig::Quartic => default_quartic_potential(),
            PotentialConfig::Polynomial {
                psi1,
                psi2,
                rho,
                r1,
                r2,
                r3,
            } => PotentialSpec::polynomial_split(psi1.clone(), psi2.clone(), *rho, *r1, *r2, *r3),
        };
        let (eta0, eta1) = m.viscosity.eta.range();
        let viscosity = ViscositySpec {
            eta: m.viscosity.eta.build(),
            eta0,
            eta1,
            lambda: m.viscosity.lambda.build(),
            lambda0: m.viscosity.lambda.range().1,
        };
        let (m0, m1) = m.mobility.range();
        let mobility = MobilitySpec {
            m: m.mobility.build(),
            m0,
            m1,
        };
        let s = &m.sources;
        let sources = SourceSpec {
            b_v: s.b_v.build(),
            f_v: s.f_v.build(),
            b_phi: s.b_phi.build(),
            f_phi: s.f_phi.build(),
            h: s.h.build(),
        };
        let sigma_inf = match &m.sigma_inf {
            SigmaInfConfig::Constant(c) => SigmaInf::Constant(*c),
            SigmaInfConfig::PerFace(v) => SigmaInf::PerFace(v.clone()),
        };
        let phi0 = match m.phi0 {
            Phi0Config::Constant { value } => InitialPhase::Constant(value),
            Phi0Config::Random { mean, amplitude } => InitialPhase::RandomPerturbation {
                mean,
                amplitude,
                seed: self.seed,
            },
            Phi0Config::Tumour { radius, cx, cy } => {
                let (cx, cy) = (cx.unwrap_or(0.5 * self.grid.lx), cy.unwrap_or(0.5 * self.grid.ly));
                let w = std::f64::consts::SQRT_2 * m.epsilon;
                InitialPhase::expression(move |x, y| {
                    ((radius - ((x - cx).powi(2) + (y - cy).powi(2)).sqrt()) / w).tanh()
                })
            }
        };
        ModelSpec {
            params: ModelParams {
                epsilon: m.epsilon,
                nu: m.nu,
                k: m.k,
                chi: m.chi,
                t_final: m.t_final,
            },
            potential,
            viscosity,
            mobility,
            sources,
            sigma_inf,
            phi0,
        }
    }

    pub fn step_config(&self) -> StepConfig {
        let s = &self.stepping;
        StepConfig {
            dt: s.dt,
            stabilization: s.stabilization,
            nutrient_tol: s.nutrient_tol,
            ch_tol: s.ch_tol,
            flow_tol: s.flow_tol,
            flow_mode: s.flow_mode.into(),
            strict_cfl: s.strict_cfl,
        }
    }

    /// Full assumption audit of the configured model on the default range.
    pub fn audit(&self) -> Result<crate::model::ValidationReport, ModelError> {
        validate(&self.model_spec(), DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config(r#"{ "grid": { "nx": 64, "ny": 64 } }"#).unwrap();
        assert_eq!(cfg.grid.lx, 1.0);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.model.k, 10.0);
        assert_eq!(cfg.stepping.flow_mode, FlowModeConfig::Brinkman);
        assert_eq!(cfg.output.diagnostics_stride, 1);
        assert!(cfg.audit().unwrap().all_passed());
    }

    #[test]
    fn negative_permeability_names_a1() {
        let err = parse_config(r#"{ "grid": { "nx": 8, "ny": 8 }, "model": { "k": -1 } }"#).unwrap_err();
        assert!(err.to_string().contains("(A1)"), "{err}");
    }

    #[test]
    fn unknown_key_reports_location() {
        let text = "{\n  \"grid\": { \"nx\": 8, \"ny\": 8 },\n  \"model\": { \"viscocity\": 1 }\n}";
        match parse_config(text).unwrap_err() {
            ConfigError::Parse { line, column, message } => {
                assert_eq!(line, 3);
                assert!(column > 0);
                assert!(message.contains("viscocity"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quadratic_split_is_rejected() {
        let text = r#"{ "grid": { "nx": 8, "ny": 8 }, "model": { "potential": {
            "kind": "polynomial", "psi1": [0, 0, 0.5], "psi2": [0, 0, -1],
            "rho": 2, "r1": 1, "r2": 1, "r3": 2 } } }"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("(A5)"), "{err}");
    }

    #[test]
    fn variants_parse() {
        let text = r#"{ "grid": { "nx": 8, "ny": 8 }, "seed": 7, "model": {
            "viscosity": { "eta": { "blend": { "low": 1, "high": 2 } } },
            "sources": { "b_phi": { "constant": 0.5 } },
            "phi0": { "kind": "tumour", "radius": 0.2 } },
            "stepping": { "flow_mode": "darcy" } }"#;
        let cfg = parse_config(text).unwrap();
        let spec = cfg.model_spec();
        assert_eq!(spec.viscosity.eta1, 2.0);
        assert_eq!(cfg.step_config().flow_mode, FlowMode::Darcy);
    }
}
