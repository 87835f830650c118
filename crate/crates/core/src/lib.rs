pub mod cli;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod grid;
pub mod krylov;
pub mod operator;
pub mod profile;
pub mod quad;
pub mod solver;
pub mod sparse;
pub mod spectral;

pub use error::{GlError, Result};
