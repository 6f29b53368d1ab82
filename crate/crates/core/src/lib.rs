//! Numerical laboratory for late-time tails of scalar waves.
//!
//! The crate evolves per-angular-mode scalar fields on Schwarzschild and
//! flat-with-potential backgrounds in the time domain, independently computes
//! the low-energy behavior of the radial resolvent in the frequency domain,
//! and provides the post-processing needed to compare measured tail exponents
//! and amplitudes against closed-form predictions.
//!
//! Module layout:
//! - [`background`]: backgrounds, coordinate maps, effective potentials, zero-energy states
//! - [`evolve`]: 1+1D characteristic (double-null) and Cauchy (leapfrog) evolution
//! - [`spectral`]: radial resolvent, low-energy expansion, model solution, oscillatory integrals
//! - [`tails`]: local power index, tail fits, ray-profile comparisons
//! - [`accept`]: the end-to-end verification suite used by `pricelab verify`

// negated comparisons are deliberate: !(x > 0.0) also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accept;
pub mod background;
pub mod error;
pub mod evolve;
pub mod num;
pub mod spectral;
pub mod tails;

pub use error::{Error, Result};
