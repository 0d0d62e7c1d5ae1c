//! Construction, obstruction and verification of first integrals that are
//! polynomial in momenta for geodesic and magnetic geodesic flows on the
//! two-torus.
//!
//! The crate is organised bottom-up:
//!
//! * [`fourier`] spectral calculus of doubly periodic functions,
//! * [`momentum`] momentum polynomials and the level-restricted bracket,
//! * [`cascade`] the downward coefficient recursion with its obstructions
//!   and closing reality conditions,
//! * [`flow`] numerical integration and conservation drift,
//! * [`magnetic`] magnetic constructions and multi-level experiments,
//! * [`cli`] the batch front end behind the `geoflow` binary.

pub mod cascade;
pub mod cli;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod magnetic;
pub mod momentum;

pub use error::{Error, Result};
pub use fourier::{FourierField, TorusLattice};
pub use momentum::{HomogeneousPolynomial, MomentumPolynomial};
