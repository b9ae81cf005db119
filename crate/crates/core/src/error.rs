use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::SolveStats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 3x3 cells, got {nx}x{ny}")]
    TooFewCells { nx: usize, ny: usize },
    #[error("domain lengths must be finite and positive, got lx={lx}, ly={ly}")]
    BadLength { lx: f64, ly: f64 },
    #[error("field length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Hard rejections raised while auditing or evaluating a model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("(A1): {0}")]
    Parameters(String),
    #[error("(A5): growth exponent rho={0} outside [2, 6]")]
    GrowthExponent(f64),
    #[error("(A5): 2R1>R3 required when rho=2 (R1={r1}, R3={r3})")]
    QuadraticSplit { r1: f64, r3: f64 },
    #[error("{assumption}: evaluator `{name}` returned {value} at s={at}")]
    NonFinite {
        assumption: &'static str,
        name: &'static str,
        at: f64,
        value: f64,
    },
    #[error("sampling needs at least 2 points on a non-empty interval")]
    Sampling,
    #[error("{0}")]
    Invalid(String),
}

/// Linear system that failed to converge.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{system} solve did not converge: {stats}")]
pub struct SolveFailure {
    pub system: &'static str,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    NotConverged(#[from] SolveFailure),
    #[error("non-finite input to {0}")]
    NonFinite(&'static str),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("field dimensions do not match the grid in {0}")]
    Shape(&'static str),
}

/// Stage of a coupled time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Nutrient,
    CahnHilliard,
    Flow,
    Initialisation,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Nutrient => "nutrient",
            Stage::CahnHilliard => "cahn-hilliard",
            Stage::Flow => "flow",
            Stage::Initialisation => "initialisation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("{stage} stage failed: {source}")]
    Solver {
        stage: Stage,
        #[source]
        source: SolverError,
    },
    #[error("dt={dt} violates the advective CFL bound {bound}")]
    Cfl { dt: f64, bound: f64 },
    #[error("invalid step configuration: {0}")]
    Config(String),
}

impl StepError {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(SolverError) -> StepError {
        move |source| StepError::Solver { stage, source }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config error: {0}")]
    Semantic(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error)]
#[error("I/O error on {path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Top-level error for simulation runs and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: StepError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("experiment check failed: {0}")]
    Check(String),
}

impl Error {
    /// Process exit code: 2 config, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Model(_) | Error::Grid(_) => 2,
            Error::Step {
                source: StepError::Config(_) | StepError::Cfl { .. },
                ..
            } => 2,
            Error::Io(_) => 4,
            Error::Step { .. } | Error::Solver(_) | Error::Check(_) => 3,
        }
    }
}
