//! Static vacuum extensions of boundary data on the exterior of a sphere.

pub mod dual;
pub mod error;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod harmonics;
pub mod linear;
pub mod modes;
pub mod norms;
pub mod random;
pub mod solver;
pub mod spectral;
pub mod symmetry;

pub use error::{Error, Result};
