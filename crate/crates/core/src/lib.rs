//! Variable-order subordinated pseudo-differential symbols on the periodic
//! torus: symbol calculus checks, spectral solvers and Feller-property
//! probes.

pub mod config;
pub mod error;
pub mod experiment;
pub mod feller;
pub mod jet;
pub mod ndf;
pub mod report;
pub mod sampling;
pub mod smooth;
pub mod symcalc;
pub mod torus;

pub use error::{Error, Result};
