pub mod dgp;
pub mod error;
pub mod exact;
pub mod rng;

pub use error::{Error, Result};
pub mod linalg;
pub mod propensity;
pub mod estimators;
pub mod imputation;
pub mod combiners;
pub mod runner;
