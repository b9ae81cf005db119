//! Diffuse-interface tumour growth with Brinkman flow on a 2D MAC grid.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod flow;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod output;
pub mod run;
pub mod spectral;
pub mod stepper;

pub use error::{Error, ModelError, SolverError, StepError};
pub use grid::{BoundaryField, CellField, FaceField, Grid2D};
