//! Numerical laboratory for small solutions of the 1D cubic NLS with a
//! trapping potential.

pub mod asymptotics;
pub mod boundstate;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod grid;
pub mod initial;
pub mod io;
pub mod modulation;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{ComplexField, FrequencyGrid, SpatialGrid};
