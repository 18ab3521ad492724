//! Long-tail scaling laws and retraining-free valuation of mixed
//! real/synthetic training data.

pub mod config;
pub mod error;
pub mod evalharness;
pub mod io;
pub mod longtail;
pub mod mmd;
pub mod ntk;
pub mod numeric;
pub mod rng;
pub mod scaling;
pub mod special;
pub mod valuation;

pub use error::{Error, ErrorKind, Result};
