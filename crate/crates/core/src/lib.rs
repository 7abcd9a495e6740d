//! Divisibility analysis for discrete-time quantum dynamical mappings.
//!
//! A mapping `N^0 = id, N^1, ..., N^n` is divisible when every step admits a
//! CPTP propagator `C^k` with `N^k = C^k ∘ N^{k-1}`. This crate decides that
//! question per step, certifies negative answers, and searches for ensembles
//! whose guessing probability increases along a non-divisible step.

pub mod channel;
pub mod constructions;
pub mod discrimination;
pub mod divisibility;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lp;
pub mod mapping;
pub mod matrix;
pub mod random;
pub mod sdp;

pub use channel::{DensityMatrix, Povm, QuantumChannel, StochasticMatrix};
pub use discrimination::Ensemble;
pub use error::{Error, Result};
pub use mapping::DynamicalMapping;
pub use matrix::{ComplexMatrix, HermitianOperator, C64};
