//! Classical simulation of digitized lattice gauge theories with matter.
//!
//! Gauge links are qudits labelled by elements of a finite group (`Z_d` or
//! `Q8`), fermionic matter lives in Jordan-Wigner ordered modes of the same
//! register, and time evolution is built from the fermion-qudit gate set:
//! single-qudit phases and Fourier transforms, controlled group
//! multiplication, and fermionic hopping/rotation gates.
//!
//! The [`oracle`] module provides exact sparse Hamiltonians and Krylov
//! propagation used as reference for every Trotterized result.

pub mod circuits;
pub mod experiments;
pub mod config;
pub mod error;
pub mod formats;
pub mod gates;
pub mod groups;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod oracle;
pub mod register;
pub mod resources;
pub mod stateprep;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
