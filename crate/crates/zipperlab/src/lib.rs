//! Numerical laboratory for random scattering-zipper unitary operators.
//!
//! The model lives on l^2(Z, C^L): a doubly infinite product of 2L x 2L
//! unitary scattering blocks arranged in two interleaved layers whose product
//! is a five-diagonal block-banded unitary. This crate samples the random
//! environment, builds finite windows of the operator, computes transfer
//! cocycles, Lyapunov spectra, and Green kernels, and runs the Monte Carlo
//! localization diagnostics exposed by the `zipperlab` binary.

pub mod disorder;
pub mod error;
pub mod linalg;
pub mod rngstream;
pub mod transfer;
pub mod zipper_operator;

pub use error::{Result, ZipperError};
