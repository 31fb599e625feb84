//! Weighted shifts on rooted directed trees, truncated at a finite depth.

pub mod balanced;
pub mod error;
pub mod growth;
pub mod harmonics;
pub mod model;
pub mod multiplier;
pub mod operator;
pub mod report;
pub mod shift;
pub mod suites;
pub mod t2;
pub mod tree;
pub mod vector;

pub use error::{Error, Result};
