//! Weak-coupling open-system dynamics for a finite quantum system coupled
//! linearly to a thermal bosonic bath.
//!
//! The crate builds the Davies (secular Lindblad), Bloch–Redfield and
//! cumulant (refined weak-coupling) generators, the second-order
//! renormalization counterterm, mean-force Gibbs corrections and
//! stationary states, and a truncated-bath exact-evolution oracle for
//! cross-checking them.

mod error;

pub mod bath;
pub mod cumulant;
pub mod generators;
pub mod meanforce;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod spectral;
pub mod stationary;
pub mod system;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
pub type Matrix = nalgebra::DMatrix<C64>;
