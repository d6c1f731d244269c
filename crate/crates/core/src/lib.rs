//! Spectral analysis of PT-symmetric Laplace–Beltrami operators on strips of
//! constant-curvature surfaces.

pub mod error;
pub mod model;
pub mod charfn;
pub mod curvemap;
pub mod shoot;
pub mod oracle;
pub mod spectrum;
pub mod sweep;

pub use error::{Error, Result};
