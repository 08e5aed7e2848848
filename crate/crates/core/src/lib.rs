//! Simulation and network inference for coupled stochastic Jansen-Rit
//! neural mass models.
//!
//! * [`model`]: parameters, coupling structures and the nonlinear forcing `G`.
//! * [`integrator`]: splitting schemes with exact Ornstein-Uhlenbeck blocks.
//! * [`summaries`]: densities, spectra, cross-correlations and the weighted
//!   IAE distance between them.
//! * [`inference`]: sequential Monte Carlo ABC over continuous parameters and
//!   binary coupling directions.
//! * [`config`] and [`cli`]: TOML configuration and the `jrnet` command line.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod inference;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod real;
pub mod rng;
pub mod stats;
pub mod summaries;

pub use error::{Error, Result};
pub use real::Real;

pub type PopulationParams64 = model::PopulationParams<f64>;
pub type ModelParams64 = model::ModelParams<f64>;
pub type CouplingStructure64 = model::CouplingStructure<f64>;
pub type State64 = integrator::State<f64>;
pub type OuPrecompute64 = integrator::OuPrecompute<f64>;
pub type MultiSeries64 = integrator::MultiSeries<f64>;

pub type ModelParams32 = model::ModelParams<f32>;
pub type MultiSeries32 = integrator::MultiSeries<f32>;
