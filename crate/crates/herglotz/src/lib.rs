//! Elastic Herglotz wave functions in two and three dimensions: Navier
//! eigenvectors built from vector spherical harmonics, the weighted Hilbert
//! inner product they live in, and the reproducing kernel of that space.

pub mod domain;
pub mod error;
pub mod fd;
pub mod hansen;
pub mod inner;
pub mod kernel3d;
pub mod plane2d;
pub mod specfun;
pub mod synthesis;

pub use domain::{ElasticParams, ModeIndex, SphPoint, SphTensor, SphVec, C64};
pub use error::{Error, Result};
