//! Numerical phase-space toolkit for generalized Fresnel functions
//! `e^{2πi μ(x)}`, the Fourier-multiplier propagators `e^{2πi t μ(D)}` they
//! generate, and Duhamel–Picard solvers for the associated Cauchy problems
//! with measure-type potentials.

pub mod config;
pub mod error;
pub mod gabor;
pub mod grid;
pub mod io;
pub mod potentials;
pub mod propagator;
pub mod quadrature;
pub mod regression;
pub mod solver;
pub mod symbols;

pub use error::{Error, Result};
pub use grid::{forward_fourier, inverse_fourier, lp_norm, Domain, GridSpec, SampledField};
