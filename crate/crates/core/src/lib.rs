pub mod assembly;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod nonlinearity;
pub mod spectral;
pub mod functional;
pub mod solvers;

pub use error::{Error, Result};
