//! Weyl-Titchmarsh theory for matrix-valued Jacobi operators on the lattice
//! and matrix-valued Schrodinger/Dirac operators on the line.
//!
//! The forward direction computes Weyl M-matrices and Green's matrices from
//! operator coefficients; the inverse direction reconstructs the coefficients
//! from Green's-matrix data sampled at a single site along a ray in the upper
//! half-plane. Operators are compactly supported perturbations of a free
//! background, which makes the Weyl data at the tails available in closed
//! form and keeps both directions free of truncated-limit error.

pub mod continuum;
pub mod error;
pub mod io;
pub mod jacobi;
pub mod linalg;
pub mod mateq;
pub mod par;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix, Contour, Orientation};
