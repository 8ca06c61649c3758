//! Numerical laboratory for the Polchinski renormalisation-group flow.

pub mod error;
pub mod experiment;
pub mod hj;
pub mod ising;
pub mod lattice;
pub mod linalg;
pub mod lsi;
pub mod mcmc;
pub mod model;
pub mod pde;
pub mod potential;
pub mod quadrature;
pub mod renorm;
pub mod sampling;
pub mod stats;
pub mod stochastic;
pub mod transport;

pub use error::{Error, Result};
