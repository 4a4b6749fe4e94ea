//! Randomized SVM training.
//!
//! Large problems are solved by repeatedly running an exact dual solver on a
//! small random working set whose size comes from random-projection bounds on
//! the number of support vectors, then pulling KKT violators from the rest of
//! the data into the next working set.

pub mod bounds;
pub mod dataset;
pub mod error;
pub mod kernels;
pub mod lab;
pub mod model;
pub mod oracle;
pub mod smo;
pub mod train;

pub use error::{Error, Result};
