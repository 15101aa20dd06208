//! Finite-volume and viscous solvers for scalar conservation laws on
//! Riemannian manifolds, plus the diagnostics used to check their properties.

pub mod error;
pub mod flux;
pub mod fv;
pub mod geometry;
pub mod lorentzian;
pub mod mesh;
pub mod oracle;
pub mod poly;
pub mod properties;
pub mod quadrature;
pub mod runner;
pub mod scenario;
pub mod trajectory;
pub mod viscous;

pub use error::{Error, Result};
