//! Spherical latent flow matching at desk scale.
//!
//! Tokens are projected onto the fixed-radius sphere `S^{d-1}(R)`, noise is
//! drawn uniformly on that sphere, and transport follows the slerp geodesic.
//! The crate also carries the linear and shell baselines, the geometric
//! diagnostics used to compare them, a latent container format, and a small
//! feedforward flow model with exact gradients and three samplers.

pub mod container;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod numeric;
pub mod paths;
pub mod sphere;

pub use error::{Error, Result};
pub use sphere::{SphereToken, TangentVector, Token};
