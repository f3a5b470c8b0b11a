//! Linear-algebra kernels: banded LU factorization with partial pivoting,
//! a dense generalized symmetric eigensolver used as an oracle, and a
//! shift-invert Lanczos solver for the local spectral problems.

mod banded;
mod dense;
mod lanczos;

pub use banded::BandedLu;
pub use dense::{dense_generalized_eig, DenseEig};
pub use lanczos::{shift_invert_smallest, LanczosOptions, SpectralSlice};
