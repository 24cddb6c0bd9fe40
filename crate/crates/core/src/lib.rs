//! Simulation of bipartite spin systems evolving under a Schrödinger equation
//! with an added norm-preserving disentanglement term.
//!
//! The crate is organised bottom-up:
//!
//! * [`state`]: pure bipartite states stored as coefficient matrices, Schmidt
//!   spectra, purity and the disentanglement operator `Q`.
//! * [`spin`]: angular-momentum matrices, spin coherent states, the dipolar
//!   coupling and Bloch vectors.
//! * [`dynamics`]: adaptive integration of the modified equation of motion.
//! * [`flow`]: the reduced gradient flow of Schmidt coefficients when the
//!   Hamiltonian vanishes.
//! * [`measurement`]: outcome classification, basins of attraction and the
//!   wrapped-Cauchy noise model.
//! * [`cli`]: configuration, experiment drivers and output files for the `sim`
//!   binary.
//!
//! Units: ħ = 1 throughout, so every rate (γ, ω_d) is an inverse time.

pub mod cli;
pub mod dynamics;
mod error;
pub mod flow;
pub mod measurement;
pub mod ode;
pub mod quadrature;
pub mod spin;
pub mod state;

pub use error::{Error, Result};

pub use num_complex::Complex64;
