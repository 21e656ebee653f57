//! Quantum Fisher information of the joint system and output state of a
//! Markovian open quantum system, computed from spectra of deformed
//! Lindblad generators.
//!
//! The dense kernels in [`linalg`] are generic over [`Real`]; everything
//! built on top of them works in double precision through the aliases
//! below.

pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod counting;
pub mod models;
pub mod mps;
pub mod qfi;
pub mod scalar;
pub mod spectral;
pub mod trajectories;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

/// Double-precision complex scalar.
pub type C64 = num_complex::Complex<f64>;
/// Double-precision dense complex matrix.
pub type CMat = linalg::CMatrix<f64>;
/// Single-precision dense complex matrix.
pub type CMat32 = linalg::CMatrix<f32>;
/// Double-precision eigensystem.
pub type Decomp = linalg::SpectralDecomp<f64>;
