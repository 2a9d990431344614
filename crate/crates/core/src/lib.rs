//! Incompressible Navier-Stokes on triangles with continuous data assimilation.

pub mod linalg;
pub mod mesh;
pub mod fem;
pub mod cda;
pub mod truth;
pub mod schemes;
pub mod metrics;
pub mod config;
pub mod experiment;
