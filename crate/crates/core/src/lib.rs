//! Bloch symbols, Chern numbers, interface spectral flow and the edge
//! conductivity trace formula for periodic two-dimensional insulators.

pub mod bands;
pub mod conductivity;
pub mod edge;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod models;
pub mod smooth;
pub mod topology;

pub use error::{Error, Result};
