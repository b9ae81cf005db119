//! Continuous-model ingredients: parameters, double-well potential with its
//! convex/concave split, viscosities, mobility, source terms, boundary
//! nutrient datum and initial phase field, plus a sampling-based audit of the
//! structural assumptions (A1)-(A5) each ingredient must satisfy.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ModelError;
use crate::grid::{BoundaryField, CellField, Grid2D};

pub type ScalarFnPtr = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Pure scalar function of one variable.
#[derive(Clone)]
pub enum ScalarFn {
    Constant(f64),
    /// `low + (high - low) * (1 + tanh(s)) / 2`.
    SmoothBlend { low: f64, high: f64 },
    /// `slope * s + intercept`; unbounded unless `slope == 0`.
    Linear { slope: f64, intercept: f64 },
    Custom { name: String, f: ScalarFnPtr },
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Constant(c) => write!(f, "Constant({c})"),
            ScalarFn::SmoothBlend { low, high } => write!(f, "SmoothBlend({low}, {high})"),
            ScalarFn::Linear { slope, intercept } => write!(f, "Linear({slope}, {intercept})"),
            ScalarFn::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl ScalarFn {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        ScalarFn::Constant(0.0)
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::SmoothBlend { low, high } => low + (high - low) * 0.5 * (1.0 + s.tanh()),
            ScalarFn::Linear { slope, intercept } => slope * s + intercept,
            ScalarFn::Custom { f, .. } => f(s),
        }
    }

    /// Exact for the built-in forms; central difference for custom ones.
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            ScalarFn::Constant(_) => 0.0,
            ScalarFn::SmoothBlend { low, high } => {
                let sech = 1.0 / s.cosh();
                (high - low) * 0.5 * sech * sech
            }
            ScalarFn::Linear { slope, .. } => *slope,
            ScalarFn::Custom { f, .. } => {
                let h = 1e-6 * (1.0 + s.abs());
                (f(s + h) - f(s - h)) / (2.0 * h)
            }
        }
    }

    /// `Some(false)` when the form is known to be unbounded on the real line.
    fn known_bounded(&self) -> Option<bool> {
        match self {
            ScalarFn::Constant(_) | ScalarFn::SmoothBlend { .. } => Some(true),
            ScalarFn::Linear { slope, .. } => Some(*slope == 0.0),
            ScalarFn::Custom { .. } => None,
        }
    }

    pub fn scaled(&self, k: f64) -> ScalarFn {
        match self {
            ScalarFn::Constant(c) => ScalarFn::Constant(k * c),
            ScalarFn::SmoothBlend { low, high } => ScalarFn::SmoothBlend {
                low: k * low,
                high: k * high,
            },
            ScalarFn::Linear { slope, intercept } => ScalarFn::Linear {
                slope: k * slope,
                intercept: k * intercept,
            },
            ScalarFn::Custom { name, f } => {
                let f = f.clone();
                ScalarFn::Custom {
                    name: format!("{k}*{name}"),
                    f: Arc::new(move |s| k * f(s)),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Interface thickness scale.
    pub epsilon: f64,
    /// Permeability (friction) coefficient in the momentum balance.
    pub nu: f64,
    /// Boundary permeability of the nutrient Robin condition.
    pub k: f64,
    /// Chemotaxis coefficient.
    pub chi: f64,
    pub t_final: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.05,
            nu: 1.0,
            k: 10.0,
            chi: 0.0,
            t_final: 1.0,
        }
    }
}

impl ModelParams {
    /// Violations of (A1), one message per offending parameter.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("epsilon", self.epsilon),
            ("nu", self.nu),
            ("K", self.k),
            ("t_final", self.t_final),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            out.push(format!("chi must be finite and >= 0, got {}", self.chi));
        }
        out
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self.violations().first() {
            None => Ok(()),
            Some(msg) => Err(ModelError::Parameters(msg.clone())),
        }
    }
}

/// Polynomial with coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    QuarticDoubleWell,
    Custom,
}

#[derive(Clone)]
pub enum PotentialForm {
    /// `psi = psi1 + psi2` with polynomial parts.
    PolynomialSplit {
        psi1: Polynomial,
        psi2: Polynomial,
        // cached derivatives
        d1: [Polynomial; 2],
        d2: [Polynomial; 2],
    },
    /// Opaque evaluators for `psi`, `psi'`, `psi''` and the split curvatures.
    Custom {
        psi: ScalarFnPtr,
        dpsi: ScalarFnPtr,
        d2psi: ScalarFnPtr,
        psi1_dd: ScalarFnPtr,
        psi2_dd: ScalarFnPtr,
    },
}

impl fmt::Debug for PotentialForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialForm::PolynomialSplit { psi1, psi2, .. } => f
                .debug_struct("PolynomialSplit")
                .field("psi1", psi1)
                .field("psi2", psi2)
                .finish(),
            PotentialForm::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// Double-well potential with the split `psi = psi1 + psi2`, growth exponent
/// `rho` and the curvature bounds `R1 (1+|s|^(rho-2)) <= psi1'' <= R2 (...)`,
/// `|psi2''| <= R3`.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub form: PotentialForm,
    pub rho: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

/// `psi(s) = (1 - s^2)^2 / 4` split as `psi1 = s^4/4 + s^2/2`,
/// `psi2 = 1/4 - s^2`, so `psi1'' = 3 s^2 + 1` and `psi2'' = -2`.
pub fn default_quartic_potential() -> PotentialSpec {
    let mut p = PotentialSpec::polynomial_split(
        vec![0.0, 0.0, 0.5, 0.0, 0.25],
        vec![0.25, 0.0, -1.0],
        4.0,
        1.0,
        3.0,
        2.0,
    );
    p.kind = PotentialKind::QuarticDoubleWell;
    p
}

impl PotentialSpec {
    pub fn polynomial_split(psi1: Vec<f64>, psi2: Vec<f64>, rho: f64, r1: f64, r2: f64, r3: f64) -> Self {
        let psi1 = Polynomial(psi1);
        let psi2 = Polynomial(psi2);
        let d1 = [psi1.derivative(), psi2.derivative()];
        let d2 = [d1[0].derivative(), d1[1].derivative()];
        PotentialSpec {
            kind: PotentialKind::Custom,
            form: PotentialForm::PolynomialSplit { psi1, psi2, d1, d2 },
            rho,
            r1,
            r2,
            r3,
        }
    }

    pub fn psi(&self, s: f64) -> f64 {
        match &self.form {
            PotentialForm::PolynomialSplit { psi1, psi2, .. } => psi1.eval(s) + psi2.eval(s),
            PotentialForm::Custom { psi, .. } => psi(s),
        }
    }

    pub fn dpsi(&self, s: f64) -> f64 {
        match &self.form {
            PotentialForm::PolynomialSplit { d1, .. } => d1[0].eval(s) + d1[1].eval(s),
            PotentialForm::Custom { dpsi, .. } => dpsi(s),
        }
    }

    pub fn d2psi(&self, s: f64) -> f64 {
        match &self.form {
            PotentialForm::PolynomialSplit { d2, .. } => d2[0].eval(s) + d2[1].eval(s),
            PotentialForm::Custom { d2psi, .. } => d2psi(s),
        }
    }

    /// `(psi1', psi2')` when the split parts are available in closed form.
    pub fn split_first_derivatives(&self, s: f64) -> Option<(f64, f64)> {
        match &self.form {
            PotentialForm::PolynomialSplit { d1, .. } => Some((d1[0].eval(s), d1[1].eval(s))),
            PotentialForm::Custom { .. } => None,
        }
    }

    pub fn psi1_dd(&self, s: f64) -> f64 {
        match &self.form {
            PotentialForm::PolynomialSplit { d2, .. } => d2[0].eval(s),
            PotentialForm::Custom { psi1_dd, .. } => psi1_dd(s),
        }
    }

    pub fn psi2_dd(&self, s: f64) -> f64 {
        match &self.form {
            PotentialForm::PolynomialSplit { d2, .. } => d2[1].eval(s),
            PotentialForm::Custom { psi2_dd, .. } => psi2_dd(s),
        }
    }

    fn growth_weight(&self, s: f64) -> f64 {
        1.0 + s.abs().powf(self.rho - 2.0)
    }
}

/// Shear viscosity `eta in [eta0, eta1]` and bulk viscosity `lambda in [0, lambda0]`.
#[derive(Debug, Clone)]
pub struct ViscositySpec {
    pub eta: ScalarFn,
    pub eta0: f64,
    pub eta1: f64,
    pub lambda: ScalarFn,
    pub lambda0: f64,
}

impl ViscositySpec {
    pub fn constant(eta: f64, lambda: f64) -> Self {
        ViscositySpec {
            eta: ScalarFn::Constant(eta),
            eta0: eta,
            eta1: eta,
            lambda: ScalarFn::Constant(lambda),
            lambda0: lambda,
        }
    }

    /// Tanh blends between the host (`s -> -inf`) and tumour (`s -> +inf`) values.
    pub fn smooth_blend(eta: (f64, f64), lambda: (f64, f64)) -> Self {
        ViscositySpec {
            eta: ScalarFn::SmoothBlend {
                low: eta.0,
                high: eta.1,
            },
            eta0: eta.0.min(eta.1),
            eta1: eta.0.max(eta.1),
            lambda: ScalarFn::SmoothBlend {
                low: lambda.0,
                high: lambda.1,
            },
            lambda0: lambda.0.max(lambda.1),
        }
    }

    /// Both viscosities multiplied by `s`, with bounds rescaled accordingly.
    pub fn scaled(&self, s: f64) -> Self {
        ViscositySpec {
            eta: self.eta.scaled(s),
            eta0: self.eta0 * s,
            eta1: self.eta1 * s,
            lambda: self.lambda.scaled(s),
            lambda0: self.lambda0 * s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MobilitySpec {
    pub m: ScalarFn,
    pub m0: f64,
    pub m1: f64,
}

impl MobilitySpec {
    pub fn constant(m: f64) -> Self {
        MobilitySpec {
            m: ScalarFn::Constant(m),
            m0: m,
            m1: m,
        }
    }

    pub fn smooth_blend(low: f64, high: f64) -> Self {
        MobilitySpec {
            m: ScalarFn::SmoothBlend { low, high },
            m0: low.min(high),
            m1: low.max(high),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.m, ScalarFn::Constant(_))
    }
}

/// `Gamma_v = b_v(phi) sigma + f_v(phi)`, `Gamma_phi = b_phi(phi) sigma + f_phi(phi)`
/// and the nutrient consumption coefficient `h(phi) >= 0`.
#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub b_v: ScalarFn,
    pub f_v: ScalarFn,
    pub b_phi: ScalarFn,
    pub f_phi: ScalarFn,
    pub h: ScalarFn,
}

impl Default for SourceSpec {
    /// No sources, unit consumption.
    fn default() -> Self {
        SourceSpec {
            b_v: ScalarFn::zero(),
            f_v: ScalarFn::zero(),
            b_phi: ScalarFn::zero(),
            f_phi: ScalarFn::zero(),
            h: ScalarFn::Constant(1.0),
        }
    }
}

impl SourceSpec {
    pub fn zero() -> Self {
        SourceSpec {
            h: ScalarFn::zero(),
            ..Default::default()
        }
    }

    #[inline]
    pub fn gamma_v(&self, phi: f64, sigma: f64) -> f64 {
        self.b_v.eval(phi) * sigma + self.f_v.eval(phi)
    }

    #[inline]
    pub fn gamma_phi(&self, phi: f64, sigma: f64) -> f64 {
        self.b_phi.eval(phi) * sigma + self.f_phi.eval(phi)
    }

    pub fn gamma_v_field(&self, phi: &CellField, sigma: &CellField) -> CellField {
        phi.zip_map(sigma, |p, s| self.gamma_v(p, s))
    }

    pub fn gamma_phi_field(&self, phi: &CellField, sigma: &CellField) -> CellField {
        phi.zip_map(sigma, |p, s| self.gamma_phi(p, s))
    }

    pub fn has_sources(&self) -> bool {
        [&self.b_v, &self.f_v, &self.b_phi, &self.f_phi]
            .iter()
            .any(|f| !matches!(f, ScalarFn::Constant(c) if *c == 0.0))
    }
}

pub fn eval_source_gamma_v(spec: &SourceSpec, phi: f64, sigma: f64) -> f64 {
    spec.gamma_v(phi, sigma)
}

pub fn eval_source_gamma_phi(spec: &SourceSpec, phi: f64, sigma: f64) -> f64 {
    spec.gamma_phi(phi, sigma)
}

pub type TimeBoundaryFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Ambient nutrient level on the boundary.
#[derive(Clone)]
pub enum SigmaInf {
    Constant(f64),
    /// One value per boundary face in `BoundaryField` order.
    PerFace(Vec<f64>),
    /// `f(t, x, y)` sampled at face midpoints at the current step time.
    TimeDependent(TimeBoundaryFn),
}

impl fmt::Debug for SigmaInf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaInf::Constant(c) => write!(f, "Constant({c})"),
            SigmaInf::PerFace(v) => write!(f, "PerFace(len={})", v.len()),
            SigmaInf::TimeDependent(_) => f.write_str("TimeDependent"),
        }
    }
}

impl SigmaInf {
    pub fn at(&self, g: &Grid2D, t: f64) -> Result<BoundaryField, ModelError> {
        let field = match self {
            SigmaInf::Constant(c) => BoundaryField::constant(g, *c),
            SigmaInf::PerFace(v) => BoundaryField::from_vec(g, v.clone())
                .map_err(|e| ModelError::Invalid(format!("sigma_inf: {e}")))?,
            SigmaInf::TimeDependent(f) => BoundaryField::from_fn(g, |x, y| f(t, x, y)),
        };
        if !field.is_finite() {
            return Err(ModelError::Invalid("sigma_inf has non-finite values".into()));
        }
        Ok(field)
    }
}

pub type ExprFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Initial phase field.
#[derive(Clone)]
pub enum InitialPhase {
    Constant(f64),
    Expression(ExprFn),
    /// `mean + amplitude * U(-1, 1)` per cell from a seeded ChaCha stream.
    RandomPerturbation { mean: f64, amplitude: f64, seed: u64 },
}

impl fmt::Debug for InitialPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialPhase::Constant(c) => write!(f, "Constant({c})"),
            InitialPhase::Expression(_) => f.write_str("Expression"),
            InitialPhase::RandomPerturbation {
                mean,
                amplitude,
                seed,
            } => write!(f, "Random(mean={mean}, amplitude={amplitude}, seed={seed})"),
        }
    }
}

impl InitialPhase {
    pub fn expression(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        InitialPhase::Expression(Arc::new(f))
    }

    pub fn sample(&self, g: &Grid2D) -> CellField {
        match self {
            InitialPhase::Constant(c) => CellField::constant(g, *c),
            InitialPhase::Expression(f) => CellField::from_fn(g, |x, y| f(x, y)),
            InitialPhase::RandomPerturbation {
                mean,
                amplitude,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                CellField::from_fn(g, |_, _| mean + amplitude * rng.random_range(-1.0..=1.0))
            }
        }
    }
}

/// Complete model description.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub params: ModelParams,
    pub potential: PotentialSpec,
    pub viscosity: ViscositySpec,
    pub mobility: MobilitySpec,
    pub sources: SourceSpec,
    pub sigma_inf: SigmaInf,
    pub phi0: InitialPhase,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            params: ModelParams::default(),
            potential: default_quartic_potential(),
            viscosity: ViscositySpec::constant(1.0, 0.0),
            mobility: MobilitySpec::constant(1.0),
            sources: SourceSpec::default(),
            sigma_inf: SigmaInf::Constant(1.0),
            phi0: InitialPhase::RandomPerturbation {
                mean: 0.0,
                amplitude: 0.01,
                seed: 42,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    A5,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::A1 => "(A1)",
            Assumption::A2 => "(A2)",
            Assumption::A3 => "(A3)",
            Assumption::A4 => "(A4)",
            Assumption::A5 => "(A5)",
        };
        f.write_str(s)
    }
}

/// Worst sample of a failed check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub at: f64,
    pub value: f64,
    /// Amount by which the bound is exceeded.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub label: String,
    pub passed: bool,
    pub worst: Option<Violation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub range: (f64, f64),
    pub n_samples: usize,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn failed_assumptions(&self) -> Vec<Assumption> {
        let mut v: Vec<_> = self.failures().map(|c| c.assumption).collect();
        v.dedup();
        v
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "assumption audit on [{}, {}] with {} samples",
            self.range.0, self.range.1, self.n_samples
        )?;
        for c in &self.checks {
            write!(
                f,
                "  {} {:<5} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.assumption,
                c.label
            )?;
            if let Some(w) = c.worst {
                write!(f, "  (worst s={}, value={}, excess={:e})", w.at, w.value, w.excess)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub const DEFAULT_SAMPLE_RANGE: (f64, f64) = (-5.0, 5.0);
pub const DEFAULT_SAMPLES: usize = 10_001;

struct Auditor<'a> {
    samples: &'a [f64],
    checks: Vec<AssumptionCheck>,
}

impl Auditor<'_> {
    fn record(&mut self, assumption: Assumption, label: impl Into<String>, worst: Option<Violation>) {
        self.checks.push(AssumptionCheck {
            assumption,
            label: label.into(),
            passed: worst.is_none(),
            worst,
        });
    }

    /// Evaluates `f`, rejects non-finite outputs, and records the worst sample
    /// where `excess(s, f(s)) > 0`.
    fn bound(
        &mut self,
        assumption: Assumption,
        label: &str,
        name: &'static str,
        f: impl Fn(f64) -> f64,
        excess: impl Fn(f64, f64) -> f64,
    ) -> Result<(), ModelError> {
        let mut worst: Option<Violation> = None;
        for &s in self.samples {
            let value = f(s);
            if !value.is_finite() {
                return Err(ModelError::NonFinite {
                    assumption: assumption_str(assumption),
                    name,
                    at: s,
                    value,
                });
            }
            let e = excess(s, value);
            if e > 0.0 && worst.is_none_or(|w| e > w.excess) {
                worst = Some(Violation { at: s, value, excess: e });
            }
        }
        self.record(assumption, label, worst);
        Ok(())
    }

    fn bounded(
        &mut self,
        assumption: Assumption,
        name: &'static str,
        func: &ScalarFn,
        with_derivative: bool,
    ) -> Result<(), ModelError> {
        let label = format!("{name} bounded");
        match func.known_bounded() {
            Some(false) => {
                let edge = *self.samples.last().unwrap();
                let value = func.eval(edge);
                self.record(
                    assumption,
                    label,
                    Some(Violation {
                        at: edge,
                        value,
                        excess: f64::INFINITY,
                    }),
                );
            }
            _ => self.bound(assumption, &label, name, |s| func.eval(s), |_, _| 0.0)?,
        }
        if with_derivative {
            let label = format!("{name}' bounded");
            self.bound(assumption, &label, name, |s| func.derivative(s), |_, _| 0.0)?;
        }
        Ok(())
    }
}

fn assumption_str(a: Assumption) -> &'static str {
    match a {
        Assumption::A1 => "(A1)",
        Assumption::A2 => "(A2)",
        Assumption::A3 => "(A3)",
        Assumption::A4 => "(A4)",
        Assumption::A5 => "(A5)",
    }
}

/// Audits every structural assumption by dense sampling of the evaluators on
/// `range`. Returns a per-check report; hard errors are reserved for
/// non-finite evaluator output and inadmissible growth exponents.
pub fn validate(
    spec: &ModelSpec,
    range: (f64, f64),
    n_samples: usize,
) -> Result<ValidationReport, ModelError> {
    let (a, b) = range;
    if n_samples < 2 || !(a.is_finite() && b.is_finite() && a < b) {
        return Err(ModelError::Sampling);
    }
    let pot = &spec.potential;
    if !(pot.rho.is_finite() && (2.0..=6.0).contains(&pot.rho)) {
        return Err(ModelError::GrowthExponent(pot.rho));
    }
    if pot.rho == 2.0 && 2.0 * pot.r1 <= pot.r3 {
        return Err(ModelError::QuadraticSplit {
            r1: pot.r1,
            r3: pot.r3,
        });
    }

    let h = (b - a) / (n_samples - 1) as f64;
    let samples: Vec<f64> = (0..n_samples).map(|k| a + k as f64 * h).collect();
    let mut au = Auditor {
        samples: &samples,
        checks: Vec::new(),
    };

    // (A1)
    let v = spec.params.violations();
    au.checks.push(AssumptionCheck {
        assumption: Assumption::A1,
        label: if v.is_empty() {
            "epsilon, nu, K, T > 0 and chi >= 0".into()
        } else {
            v.join("; ")
        },
        passed: v.is_empty(),
        worst: None,
    });

    // (A2)
    let mob = &spec.mobility;
    au.record(
        Assumption::A2,
        "m0 > 0",
        (mob.m0 <= 0.0 || !mob.m0.is_finite()).then_some(Violation {
            at: f64::NAN,
            value: mob.m0,
            excess: -mob.m0,
        }),
    );
    let (m0, m1) = (mob.m0, mob.m1);
    au.bound(Assumption::A2, "m0 <= m(s) <= m1", "m", |s| mob.m.eval(s), |_, v| (m0 - v).max(v - m1))?;

    // (A3)
    let visc = &spec.viscosity;
    au.record(
        Assumption::A3,
        "eta0 > 0",
        (visc.eta0 <= 0.0 || !visc.eta0.is_finite()).then_some(Violation {
            at: f64::NAN,
            value: visc.eta0,
            excess: -visc.eta0,
        }),
    );
    let (e0, e1, l0) = (visc.eta0, visc.eta1, visc.lambda0);
    au.bound(Assumption::A3, "eta0 <= eta(s) <= eta1", "eta", |s| visc.eta.eval(s), |_, v| {
        (e0 - v).max(v - e1)
    })?;
    au.bound(Assumption::A3, "0 <= lambda(s) <= lambda0", "lambda", |s| visc.lambda.eval(s), |_, v| {
        (-v).max(v - l0)
    })?;
    au.bound(Assumption::A3, "eta' bounded", "eta", |s| visc.eta.derivative(s), |_, _| 0.0)?;
    au.bound(Assumption::A3, "lambda' bounded", "lambda", |s| visc.lambda.derivative(s), |_, _| 0.0)?;

    // (A4)
    let src = &spec.sources;
    au.bounded(Assumption::A4, "b_v", &src.b_v, true)?;
    au.bounded(Assumption::A4, "f_v", &src.f_v, true)?;
    au.bounded(Assumption::A4, "b_phi", &src.b_phi, false)?;
    au.bounded(Assumption::A4, "f_phi", &src.f_phi, false)?;
    au.bounded(Assumption::A4, "h", &src.h, false)?;
    au.bound(Assumption::A4, "h(s) >= 0", "h", |s| src.h.eval(s), |_, v| -v)?;

    // (A5)
    au.bound(Assumption::A5, "psi(s) >= 0", "psi", |s| pot.psi(s), |_, v| -v)?;
    au.record(
        Assumption::A5,
        "0 < R1 < R2, R3 > 0",
        (!(pot.r1 > 0.0 && pot.r1 < pot.r2 && pot.r3 > 0.0)).then_some(Violation {
            at: f64::NAN,
            value: pot.r1,
            excess: f64::INFINITY,
        }),
    );
    let (r1, r2, r3) = (pot.r1, pot.r2, pot.r3);
    au.bound(
        Assumption::A5,
        "psi1 growth: R1(1+|s|^(rho-2)) <= psi1''(s) <= R2(1+|s|^(rho-2))",
        "psi1''",
        |s| pot.psi1_dd(s),
        |s, v| {
            let w = pot.growth_weight(s);
            (r1 * w - v).max(v - r2 * w)
        },
    )?;
    au.bound(Assumption::A5, "psi2 curvature: |psi2''(s)| <= R3", "psi2''", |s| pot.psi2_dd(s), |_, v| {
        v.abs() - r3
    })?;

    Ok(ValidationReport {
        range,
        n_samples,
        checks: au.checks,
    })
}

impl ModelSpec {
    /// Validates with the default sampling and converts any failure into an
    /// error naming the violated assumption.
    pub fn check(&self) -> Result<ValidationReport, ModelError> {
        let report = validate(self, DEFAULT_SAMPLE_RANGE, DEFAULT_SAMPLES)?;
        if let Some(f) = report.failures().next() {
            return Err(ModelError::Invalid(format!("{}: {} violated", f.assumption, f.label)));
        }
        Ok(report)
    }

    /// Maximum admissible stabilisation-free curvature `sup |psi''|` on `[a, b]`.
    pub fn max_abs_curvature(&self, a: f64, b: f64, n: usize) -> f64 {
        (0..n)
            .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
            .map(|s| self.potential.d2psi(s).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_spec() -> ModelSpec {
        ModelSpec {
            viscosity: ViscositySpec::constant(1.0, 1.0),
            sources: SourceSpec::zero(),
            ..Default::default()
        }
    }

    #[test]
    fn quartic_values() {
        let p = default_quartic_potential();
        assert_eq!(p.kind, PotentialKind::QuarticDoubleWell);
        assert_eq!(p.psi(1.0), 0.0);
        assert_eq!(p.psi(-1.0), 0.0);
        assert_eq!(p.psi(0.0), 0.25);
        assert_eq!(p.psi1_dd(2.0), 13.0);
        assert_eq!(p.psi2_dd(2.0), -2.0);
        let w = 1.0 + 2.0f64.powf(p.rho - 2.0);
        assert!(p.r1 * w <= 13.0 && 13.0 <= p.r2 * w);
        assert_eq!(p.r1 * w, 5.0);
        assert_eq!(p.r2 * w, 15.0);
        assert_eq!(p.d2psi(0.0), -1.0);
    }

    #[test]
    fn quartic_split_consistency() {
        let p = default_quartic_potential();
        for k in 0..=200 {
            let s = -5.0 + 0.05 * k as f64;
            let (a, b) = p.split_first_derivatives(s).unwrap();
            assert!((p.dpsi(s) - (a + b)).abs() <= 1e-15 * (1.0 + p.dpsi(s).abs()));
            assert!((p.dpsi(s) - (s * s * s - s)).abs() < 1e-12 * (1.0 + s.abs().powi(3)));
        }
    }

    #[test]
    fn quartic_coercive_lower_bound() {
        // psi(s) >= |s|^4 / 8 - 1
        let p = default_quartic_potential();
        for k in 0..=20_000 {
            let s = -10.0 + 1e-3 * k as f64;
            assert!(p.psi(s) >= s.abs().powf(4.0) / 8.0 - 1.0);
        }
    }

    #[test]
    fn sources() {
        let zero = SourceSpec::zero();
        assert_eq!(eval_source_gamma_v(&zero, 0.3, 7.0), 0.0);
        let lin = SourceSpec {
            b_v: ScalarFn::Constant(1.0),
            ..SourceSpec::zero()
        };
        assert_eq!(eval_source_gamma_v(&lin, 0.3, 0.5), 0.5);
        let blend = SourceSpec {
            b_v: ScalarFn::SmoothBlend { low: 0.0, high: 1.0 },
            f_v: ScalarFn::Constant(-0.1),
            ..SourceSpec::zero()
        };
        assert!((eval_source_gamma_v(&blend, 0.0, 1.0) - 0.4).abs() < 1e-15);
        let phi_src = SourceSpec {
            b_phi: ScalarFn::Constant(2.0),
            f_phi: ScalarFn::Constant(0.5),
            ..SourceSpec::zero()
        };
        assert_eq!(eval_source_gamma_phi(&phi_src, 0.1, 1.5), 3.5);
    }

    #[test]
    fn default_spec_passes() {
        let r = validate(&default_spec(), (-5.0, 5.0), 10_001).unwrap();
        assert!(r.all_passed(), "{r}");
        assert!(ModelSpec::default().check().is_ok());
    }

    #[test]
    fn psi2_curvature_violation_is_named() {
        let mut spec = default_spec();
        spec.potential = PotentialSpec::polynomial_split(
            vec![0.0, 0.0, 0.5, 0.0, 0.25],
            vec![0.0, 0.0, 2.5],
            4.0,
            1.0,
            3.0,
            2.0,
        );
        let r = validate(&spec, (-5.0, 5.0), 1001).unwrap();
        let failed: Vec<_> = r.failures().collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].assumption, Assumption::A5);
        assert!(failed[0].label.starts_with("psi2 curvature"));
        assert_eq!(failed[0].worst.unwrap().value, 5.0);
    }

    #[test]
    fn negative_h_fails_a4() {
        let mut spec = default_spec();
        spec.sources.h = ScalarFn::Linear {
            slope: 1.0,
            intercept: 0.0,
        };
        let r = validate(&spec, (-2.0, 2.0), 401).unwrap();
        let names: Vec<_> = r.failures().map(|c| (c.assumption, c.label.clone())).collect();
        assert!(names.iter().all(|(a, _)| *a == Assumption::A4));
        let nonneg = r.failures().find(|c| c.label == "h(s) >= 0").unwrap();
        assert_eq!(nonneg.worst.unwrap().at, -2.0);
    }

    #[test]
    fn hard_rejections() {
        let mut spec = default_spec();
        spec.potential.rho = 7.0;
        assert_eq!(validate(&spec, (-1.0, 1.0), 11), Err(ModelError::GrowthExponent(7.0)));

        let mut spec = default_spec();
        spec.potential = PotentialSpec::polynomial_split(vec![0.0, 0.0, 1.0], vec![0.0], 2.0, 1.0, 3.0, 2.0);
        assert!(matches!(
            validate(&spec, (-1.0, 1.0), 11),
            Err(ModelError::QuadraticSplit { .. })
        ));
        assert!(ModelError::QuadraticSplit { r1: 1.0, r3: 2.0 }
            .to_string()
            .contains("2R1>R3"));

        let mut spec = default_spec();
        spec.mobility.m = ScalarFn::custom("log", |s: f64| s.ln());
        assert!(matches!(
            validate(&spec, (-1.0, 1.0), 11),
            Err(ModelError::NonFinite { name: "m", .. })
        ));

        assert_eq!(validate(&default_spec(), (0.0, 1.0), 1), Err(ModelError::Sampling));
    }

    #[test]
    fn parameter_violation_fails_a1() {
        let mut spec = default_spec();
        spec.params.k = -1.0;
        let r = validate(&spec, (-1.0, 1.0), 11).unwrap();
        assert_eq!(r.failed_assumptions(), vec![Assumption::A1]);
        assert!(matches!(spec.params.check(), Err(ModelError::Parameters(_))));
    }

    #[test]
    fn validate_is_pure() {
        let spec = default_spec();
        let a = validate(&spec, (-3.0, 3.0), 501).unwrap();
        let b = validate(&spec, (-3.0, 3.0), 501).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn blend_bounds_and_scaling() {
        let v = ViscositySpec::smooth_blend((0.5, 2.0), (0.0, 1.0));
        let spec = ModelSpec {
            viscosity: v.clone(),
            ..default_spec()
        };
        assert!(validate(&spec, (-5.0, 5.0), 1001).unwrap().all_passed());
        let s = v.scaled(0.1);
        assert!((s.eta.eval(40.0) - 0.2).abs() < 1e-12);
        assert!((s.eta1 - 0.2).abs() < 1e-15);
    }

    #[test]
    fn random_initial_phase_is_seeded() {
        let g = Grid2D::unit_square(8).unwrap();
        let p = InitialPhase::RandomPerturbation {
            mean: 0.1,
            amplitude: 0.01,
            seed: 42,
        };
        let a = p.sample(&g);
        assert_eq!(a, p.sample(&g));
        assert!(a.as_slice().iter().all(|v| (v - 0.1).abs() <= 0.01));
        let q = InitialPhase::RandomPerturbation {
            mean: 0.1,
            amplitude: 0.01,
            seed: 43,
        };
        assert_ne!(a, q.sample(&g));
    }

    #[test]
    fn sigma_inf_variants() {
        let g = Grid2D::unit_square(4).unwrap();
        assert_eq!(SigmaInf::Constant(2.0).at(&g, 0.0).unwrap().values, vec![2.0; 16]);
        assert!(SigmaInf::PerFace(vec![1.0; 3]).at(&g, 0.0).is_err());
        let td = SigmaInf::TimeDependent(Arc::new(|t, x, _| t + x));
        let b = td.at(&g, 1.0).unwrap();
        assert!((b.values[0] - 1.125).abs() < 1e-15);
    }
}
