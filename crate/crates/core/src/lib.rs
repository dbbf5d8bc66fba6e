//! Numerical solver and a-priori estimate diagnostics for one-dimensional
//! mass-dissipating reaction–diffusion systems with Neumann boundaries.
//!
//! - [`grid`]: uniform mesh, trapezoid quadrature, finite differences, norms.
//! - [`systems`]: reaction systems, presets, and assumption checks.
//! - [`solver`]: IMEX time stepping with blow-up detection.
//! - [`morrey`]: Morrey norms, cutoff functions, localized mass, and the
//!   Hölder estimate of the auxiliary field `Y`.
//! - [`energy`]: the multinomial `L^p` energy and its dissipation monitor.
//! - [`inequalities`]: interpolation-inequality checks and constant calibration.

pub mod energy;
pub mod error;
pub mod grid;
pub mod inequalities;
pub mod morrey;
pub mod solver;
pub mod systems;

pub use error::{Error, Result};
