//! Finite-volume discretization of the scalar transport equation on
//! hexahedral meshes: face gradients, diffusion split into direct and cross
//! parts, central convection, and time-level assembly.

mod gradient;
mod transport;

pub use gradient::{face_gradient, face_gradient_stencil, gradient_stencils, FaceGradientStencil};
pub use transport::{
    assemble_transport, convection_face_flux, diffusion_face_coeffs, net_convection, Convection, DiffusionFace, FaceBc,
    TransportInput,
};

#[derive(Debug, thiserror::Error)]
pub enum DiscretizationError {
    #[error("face {face}: singular local Jacobian (det {det:e})")]
    SingularJacobian { face: usize, det: f64 },
    #[error("face {face}: normal and centroid distance point apart (n.d = {n_dot_d:e})")]
    NonOrthogonalFace { face: usize, n_dot_d: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),
    #[error("{what} has length {len}, expected {expected}")]
    LengthMismatch { what: &'static str, len: usize, expected: usize },
}
