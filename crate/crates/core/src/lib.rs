//! Monte-Carlo estimation of the homogenized conductivity of the random
//! conductance model on `Z^d`.
//!
//! A walk `Y` is run for `t` steps in an i.i.d. random environment; the
//! squared final displacement, weighted by the environment's origin weight
//! `p(ω)`, gives an estimator of the finite-time diffusivity `σ_t²`, which
//! converges to `2 ξ·A_hom^disc ξ` as `t` grows. The homogenized matrix of the
//! continuous-time walk is `A_hom = E[p] · A_hom^disc`.
//!
//! Modules:
//! - [`env_field`]: stateless, seeded conductance environments.
//! - [`walker`]: discrete- and continuous-time walks.
//! - [`estimator`]: mergeable weighted estimator and reports.
//! - [`oracle`]: exact transition-kernel iteration for validation.
//! - [`study`]: sweeps, fluctuation histograms, diagnostics, rate fits.
//! - [`config`]: textual parsers and the flat run configuration.

pub mod config;
pub mod env_field;
mod error;
pub mod estimator;
pub mod oracle;
pub mod output;
pub mod stats;
pub mod study;
pub mod walker;

pub use env_field::{ConductanceLaw, Edge, Environment, EnvironmentField, LatticePoint, Marginal};
pub use error::{Error, Result};
pub use estimator::{Direction, EstimateReport, EstimatorState};
pub use oracle::ExactKernel;
pub use study::{ExecOptions, Mode, StudyPlan, StudyRecord};
pub use walker::{Horizon, WalkOutcome, WalkRng};
