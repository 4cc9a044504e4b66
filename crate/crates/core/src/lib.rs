//! Finite element solvers, spectral reference solutions and convergence
//! studies for the subdiffusion equation ∂ᵗᵅu − Δu = f with Caputo derivative
//! of order α ∈ (0, 1] on the unit interval and the unit square.

pub mod checks;
pub mod data;
pub mod error;
pub mod error_analysis;
pub mod fem;
pub mod harness;
pub mod mesh;
pub mod par;
pub mod quadrature;
pub mod sparse;
pub mod special;
pub mod spectral;
pub mod stepper;

pub use error::{Error, MlRegime, Result};
