//! Finite-volume solidification on unstructured hexahedral meshes.

pub mod mesh;
pub mod linsolve;
pub mod discretization;
pub mod microstructure;
pub mod solidify;
pub mod uq;
pub mod app;
