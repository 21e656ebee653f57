//! Dense complex linear algebra, generic over [`Real`](crate::Real).

pub mod eig;
pub mod expm;
pub mod functions;
pub mod hermitian;
pub mod matrix;

pub use eig::{spectrum, spectrum_with_tol, SpectralDecomp};
pub use expm::matexp;
pub use hermitian::{eigh, sqrtm_psd};
pub use matrix::{inner, norm2, CMatrix};
