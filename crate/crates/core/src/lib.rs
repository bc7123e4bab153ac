//! Two fluxonium qubits coupled through a galvanically connected dc SQUID.
//!
//! The crate builds truncated mode Hamiltonians for the grounded and floating
//! circuit layouts, assembles and labels the composite spectrum, extracts the
//! static ZZ shift, reduces the grounded design to a two-level model, and
//! simulates flux-pulsed two-qubit gates with and without decoherence.
//!
//! Units: energies in GHz (E/h), times in ns, fluxes in units of the flux
//! quantum, capacitances in fF.

pub mod circuit;
pub mod composite;
pub mod config;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod output;
pub mod runner;
pub mod zz;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Dense complex matrix used for every operator in the crate.
pub type CMat = nalgebra::DMatrix<C64>;
