//! Structure-preserving LQG balanced truncation for linear port-Hamiltonian
//! descriptor systems.
//!
//! The crate provides:
//!
//! - dense matrix-pencil machinery (regularity, index, finite spectrum,
//!   ordered invariant subspaces) in [`linalg`],
//! - a data model for descriptor and port-Hamiltonian DAE systems with
//!   equivalence transformations and structural rank tests in [`model`],
//! - solvers for the modified and original generalized algebraic Riccati
//!   equations in [`riccati`],
//! - maximal-solution solvers for reduced KYP linear matrix inequalities
//!   in [`kyp`],
//! - LQG characteristic values and structure-preserving balanced
//!   truncation in [`balancing`],
//! - Hamiltonian re-selection via extremal KYP solutions in [`hamiltonian`],
//! - coprime factorizations, H-infinity norms, a-priori error bounds and a
//!   passive LQG controller in [`analysis`],
//! - benchmark model generators (transport network, constrained
//!   mass-spring-damper chain) in [`benchmarks`],
//! - a plain-text system file format in [`io`].
//!
//! All computations are dense, double precision, and aimed at desk-scale
//! models (a few hundred states). Everything is a pure function of its
//! inputs; values can be shared freely between threads.

pub mod analysis;
pub mod balancing;
pub mod benchmarks;
mod error;
pub mod hamiltonian;
pub mod io;
pub mod kyp;
pub mod linalg;
pub mod model;
pub mod riccati;
pub mod tol;

pub use error::Error;

/// Dense, dynamically sized real matrix used throughout the crate.
pub type Mat = nalgebra::DMatrix<f64>;
/// Complex scalar type for spectra and frequency responses.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix used for frequency-domain evaluations.
pub type CMat = nalgebra::DMatrix<C64>;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
