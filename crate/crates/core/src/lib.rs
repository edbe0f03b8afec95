//! Dirichlet-process mixtures of multinomial-logit experts.
//!
//! Each mixture component pairs independent Gaussian covariate densities with
//! an MNL (or hierarchy-composed corMNL) classifier, so the class boundary is
//! linear within a component and nonlinear overall. Inference is MCMC:
//! auxiliary-component Gibbs updates for the assignments, Hamiltonian
//! dynamics for the regression parameters and univariate slice sampling for
//! everything else.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the CLI and experiment harness use.

pub mod error;
pub mod matrix;
pub mod model;
pub mod predictor;
pub mod real;
pub mod data;
pub mod diagnostics;
pub mod engine;
pub mod samplers;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use real::Real;

pub type Dataset = model::Dataset<f64>;
pub type ComponentParams = model::ComponentParams<f64>;
pub type HyperState = model::HyperState<f64>;
