//! Desk-scale numerics for a Brownian particle in a mobile Poissonian
//! medium with renormalized potential |x|^{-p}.
//!
//! The crate implements the model parameterization and its five (d, p)
//! regimes, the closed-form regime constants with quadrature cross-checks,
//! seedable path/cloud samplers, Monte Carlo estimators for the exponential
//! moment functionals (with the moment identity and Pascal-principle
//! verification suites), a direct compensated-sum simulator for truncated
//! potentials, Hardy-inequality variational numerics, and a batch CLI that
//! emits machine-readable JSON/CSV run records.

pub mod cli;
pub mod direct;
pub mod error;
pub mod functional;
pub mod params;
pub mod quad;
pub mod sampler;
pub mod special;
pub mod variational;

pub use error::{Error, Result};
pub use params::{classify_regime, validate, ModelParams, RawParams, Regime};
pub use sampler::{PathSample, PoissonCloud, SeedSpec, TimeGrid};
