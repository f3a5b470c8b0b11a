//! Two-level overlapping Schwarz preconditioners with GenEO spectral coarse
//! spaces for P1 finite-element discretisations of indefinite and
//! non-self-adjoint convection-diffusion-reaction problems on rectangles.
//!
//! The library covers the whole pipeline: uniform triangular meshes
//! ([`grid`]), coefficient fields ([`coeffs`]), sparse assembly of the
//! nonsymmetric system matrix and its SPD energy part ([`assembly`]),
//! overlapping domain decompositions with partitions of unity ([`decomp`]),
//! the GenEO and H-GenEO coarse spaces built from local generalised
//! eigenproblems ([`geneo`]), one- and two-level additive Schwarz and
//! RAS-plus-deflation preconditioners ([`precond`]), right-preconditioned
//! GMRES ([`krylov`]), explicit theory constants and field-of-values probes
//! ([`theory`]), and a benchmark harness ([`harness`]) driving the `geneo`
//! CLI.

pub mod assembly;
pub mod coeffs;
pub mod decomp;
pub mod error;
pub mod geneo;
pub mod grid;
pub mod harness;
pub mod krylov;
pub mod linalg;
pub mod precond;
pub mod theory;

pub use error::Error;
