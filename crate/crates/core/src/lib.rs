//! Matrix-product-state dynamics of the spin-boson model with a thermalized
//! Drude bath, mapped onto a chain by orthogonal polynomials.

pub mod chainmap;
pub mod config;
pub mod error;
pub mod experiment;
pub mod mps;
pub mod oracle;
pub mod propagate;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
