pub mod amrs;
pub mod error;
pub mod harness;
pub mod kv;
pub mod mz;
pub mod numerics;
pub mod quadrature;
pub mod rng;
pub mod statistics;
pub mod table;
pub mod triad;

pub use error::{Error, Result};
