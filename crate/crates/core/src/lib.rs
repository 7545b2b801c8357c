//! Learning translation-invariant kernels as measures over a bandwidth
//! parameter, with random-feature, hashing and two-sample-test consumers.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod langevin;
pub mod lsh;
pub mod meanfield;
pub mod measure;
pub mod mmd;
pub mod objective;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod sinkhorn;
pub mod stats;

pub use error::{Error, Result};
