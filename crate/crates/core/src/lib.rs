//! Neumann–Poincaré spectral toolkit for plasmonic resonance studies.

pub mod assembly;
pub mod ball;
pub mod ellipse;
pub mod error;
pub mod geometry;
pub mod green;
pub mod matrix_io;
pub mod numfmt;
pub mod quadrature;
pub mod resonance;
pub mod symmetrization;

pub use error::{NpError, Result};
