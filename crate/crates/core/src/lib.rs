//! Conditional BEKK matrix-F (CBF) models for time series of realized
//! covariance matrices.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every numerical piece:
//! dense SPD linear algebra, matrix-variate distributions, the BEKK / HAR
//! recursions with their moment formulas, full and variance-targeted maximum
//! likelihood, inner-product portmanteau diagnostics, factor reduction and
//! forecast evaluation. File formats, configuration and the command line live
//! in the `cbf-cli` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod num;

pub mod diagnose;
pub mod error;
pub mod estimate;
pub mod factor;
pub mod forecast;
pub mod matalg;
pub mod matdist;
pub mod model;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use matalg::{Mat, MatrixSeries, NormKind, SpdMatrix};
