//! Calibration of solid-mechanics material parameters from full-field
//! displacement and force data.

pub mod fem;
pub mod identify;
pub mod linalg;
pub mod materials;
pub mod mesh;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod synthetic;
pub mod uq;

pub use scalar::Real;
