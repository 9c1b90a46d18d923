#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Near-field array thinning for multi-user MIMO.
//!
//! The crate is `no_std` with `alloc`: geometry and near-field response
//! vectors ([`array`]), the free-space LoS channel ([`channel`]), RZF
//! precoding and sum-rate ([`precoder`]), beam patterns and grating-lobe
//! analysis ([`beam`]), the particle-swarm thinning engine ([`pso`]) and
//! the benchmark array constructions ([`baselines`]).
//!
//! IO, plotting and the experiment driver live in the `nf-thin` crate.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod array;
pub mod baselines;
pub mod beam;
pub mod channel;
mod error;
pub mod linalg;
pub mod precoder;
pub mod pso;
pub mod rng;

pub use array::{ArrayGeometry, FocusPoint, ThinningVector};
pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;

/// Speed of light used to derive wavelengths, in m/s.
///
/// The rounded value is the usual convention for carrier-to-wavelength
/// conversion in link-level studies; pass an explicit wavelength to
/// [`ArrayGeometry`] constructors to use another one.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Wavelength in meters for a carrier frequency in Hz.
pub fn wavelength(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz
}
