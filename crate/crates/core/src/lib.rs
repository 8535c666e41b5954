//! Numerical laboratory for the diffusive logistic equation with a free
//! boundary in a shifting environment.

pub mod classifier;
pub mod config;
pub mod criticality;
pub mod elliptic;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod fbsolver;
pub mod ode;
pub mod output;
pub mod semiwave;
pub mod tridiag;

pub use environment::{EnvironmentProfile, Interpolation, ModelParams};
pub use error::{Error, Result};
