//! Coulomb wave functions in amplitude-phase form.

// `!(x > 0.0)` is used on purpose so NaN fails the test; quadrature
// abscissae are kept at their published precision.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod amplitude;
pub mod cli;
pub mod coulomb;
pub mod error;
pub mod frames;
pub mod ode;
pub mod quad;
pub mod rmatrix;
pub mod variation;
pub mod special;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/amplitude-phase.md")]
mod book_amplitude_phase {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/derivatives.md")]
mod book_derivatives {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/threshold.md")]
mod book_threshold {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rmatrix.md")]
mod book_rmatrix {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
