//! Backward Euler / Taylor–Hood solver for the unsteady p(t,x)-Stokes
//! equations on the unit square, with manufactured solutions, error
//! quantities in the natural distance and an experimental-order-of-convergence
//! harness.
//!
//! Module map, bottom up: [`nfunc`] (pointwise stress and N-function
//! kernels), [`mesh`], [`quadrature`], [`fem`], [`sparse`], [`mms`],
//! [`assembly`], [`stepper`], [`convergence`], then the study driver
//! ([`config`], [`study`], [`report`], [`reference`]) and the property
//! suites in [`verify`].

pub mod assembly;
pub mod config;
pub mod convergence;
pub mod error;
pub mod fem;
pub mod mesh;
pub mod mms;
pub mod nfunc;
pub mod quadrature;
pub mod reference;
pub mod report;
pub mod sparse;
pub mod stepper;
pub mod study;
pub mod verify;

pub use config::{ExperimentConfig, MatrixSpec, OutputFormat};
pub use error::{Error, Result};
pub use report::ConvergenceReport;
pub use study::{run_study, run_study_with, RunEvent};
