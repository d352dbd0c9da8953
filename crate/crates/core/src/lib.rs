//! Sequential complex transfer operators on discretized function spaces,
//! projective cone metrics (real Hilbert and complex gauge) and
//! Ruelle-Perron-Frobenius triplets along sequences of maps.
//!
//! The crate is `no_std` with `alloc`; everything touching files, clocks or
//! threads lives in the companion `seqrpf` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cones;
pub mod error;
pub mod function;
pub mod grid;
pub mod metrics;
pub mod pressure;
pub mod rpf;
pub mod sparse;
pub mod systems;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Relative slack used by every cone membership test.
pub const TOL_CONE: f64 = 1e-12;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
