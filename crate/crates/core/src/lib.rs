//! Simulation of nuclear-spin quantum memories around divacancy electron
//! spins in 4H-SiC.
//!
//! The crate covers lattice and bath generation ([`lattice`]), hyperfine
//! couplings ([`hyperfine`]), conditional nuclear dynamics under dynamical
//! decoupling ([`ddgate`]), cluster-correlation-expansion coherence
//! ([`cce`]), the memory census over isotopic concentration
//! ([`memcensus`]), the strongly coupled register ([`register`]) and
//! single-qubit randomized benchmarking ([`rbench`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod cce;
pub mod ddgate;
pub mod ensemble;
mod error;
pub mod fit;
pub mod hyperfine;
pub mod lattice;
pub mod memcensus;
pub mod rbench;
pub mod register;
pub mod su2;

pub use error::{Error, Result};

/// 2π, used for converting linear frequencies (Hz) to angular ones.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Converts a linear frequency in Hz to angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(hz: f64) -> f64 {
    TWO_PI * hz
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn rad_to_hz(rad: f64) -> f64 {
    rad / TWO_PI
}
