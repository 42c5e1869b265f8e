//! ManifoldNet building blocks: weighted Fréchet mean layers on Riemannian
//! manifolds.

pub mod data;
pub mod error;
pub mod grassmann_reduce;
pub mod ifme;
pub mod layers;
pub mod manifold;
pub mod metrics;

pub use error::{Error, Result};
