//! Scattering theory and spectral decomposition of `H = -∂xx + V`.

pub mod decomposition;
pub mod jost;
pub mod potential;
pub mod propagator;
pub mod resolvent;
pub mod scattering;
pub mod transform;

pub use decomposition::{BoundPair, BoundStates, SpectralDecomposition};
pub use jost::{solve_jost, JostColumn, JostSolution, JostSolver};
pub use potential::{Potential, PotentialFamily};
pub use propagator::{cross_validate, linear_propagator, propagate, PropagatorRoute};
pub use resolvent::{resolvent_kernel, weighted_resolvent_norm, Resolvent, Side};
pub use scattering::{check_generic, compute_scattering, Coefficients, Genericity, ScatteringData};
pub use transform::{distorted_inverse, distorted_transform, SpectralCoefficients};
