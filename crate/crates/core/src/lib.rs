//! Integrators for Brownian dynamics with position-dependent diffusion.

pub mod error;
pub mod estimators;
pub mod exec;
pub mod integrators;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod stability;

pub use error::{Error, Result};
pub use model::{Diffusion, DiffusionEval, Potential, ProblemSpec, Sde};
