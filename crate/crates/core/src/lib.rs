//! Exact simulation of the multiplicative coalescent and statistical
//! verification of the fluid and Brownian fluctuation limits of the number
//! of connected components in sub-critical multiplicative random graphs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod engine;
pub mod error;
pub mod io;
pub mod martingale;
pub mod mass;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod sum;
pub mod verify;

pub use error::{Error, Result};
