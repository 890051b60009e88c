use nalgebra::Matrix3;

use super::DiscretizationError;
use crate::mesh::{Mesh, Point3, VertexWeights};

/// Linear map from cell values to the gradient at a face centroid.
///
/// The gradient is `sum_k coeffs[k] * phi[cells[k]] + boundary * phi_b`,
/// where `phi_b` is the face value on boundary faces (zero on interior
/// faces).
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGradientStencil {
    pub face: usize,
    /// Sorted cell indices; the face neighbours (every cell sharing a vertex
    /// with the face).
    pub cells: Vec<usize>,
    pub coeffs: Vec<Point3>,
    /// Coefficient of the boundary face value, zero for interior faces.
    pub boundary: Point3,
    /// Frobenius condition number of the local Jacobian.
    pub condition: f64,
}

impl FaceGradientStencil {
    /// Gradient of `field` at the face. `boundary_value` is the face value on
    /// boundary faces and is ignored on interior faces.
    pub fn apply(&self, field: &[f64], boundary_value: f64) -> Point3 {
        let mut g = self.boundary * boundary_value;
        for (&c, a) in self.cells.iter().zip(&self.coeffs) {
            g += a * field[c];
        }
        g
    }

    /// Sum of the cell coefficients per component.
    pub fn coefficient_sum(&self) -> Point3 {
        self.coeffs.iter().sum::<Point3>() + self.boundary
    }

    fn add(&mut self, cell: usize, v: Point3) {
        let k = self.cells.binary_search(&cell).expect("cell is a face neighbour");
        self.coeffs[k] += v;
    }
}

/// Builds the face-gradient stencil from the local frame `xi` (owner to
/// neighbour centroid, or to the face centroid on boundaries), `eta`
/// (vertex 1 to 3) and `zeta` (vertex 2 to 4). Vertex values come from the
/// equal-weight vertex averages.
pub fn face_gradient_stencil(
    mesh: &Mesh,
    weights: &VertexWeights,
    face: usize,
) -> Result<FaceGradientStencil, DiscretizationError> {
    let f = &mesh.faces[face];
    let v = f.vertices.map(|i| mesh.vertices[i]);
    let d = mesh.face_distance_vector(face);
    let eta = v[2] - v[0];
    let zeta = v[3] - v[1];
    let jac = Matrix3::from_rows(&[d.transpose(), eta.transpose(), zeta.transpose()]);
    let scale = d.norm().max(eta.norm()).max(zeta.norm());
    let det = jac.determinant();
    if det.abs() < 1e-14 * scale.powi(3) {
        return Err(DiscretizationError::SingularJacobian { face, det });
    }
    let inv = jac.try_inverse().ok_or(DiscretizationError::SingularJacobian { face, det })?;
    let condition = jac.norm() * inv.norm();
    let (c_xi, c_eta, c_zeta): (Point3, Point3, Point3) = (inv.column(0).into(), inv.column(1).into(), inv.column(2).into());

    let cells = mesh.face_neighbors[face].clone();
    let mut st = FaceGradientStencil {
        face,
        coeffs: vec![Point3::zeros(); cells.len()],
        cells,
        boundary: Point3::zeros(),
        condition,
    };
    st.add(f.owner, -c_xi);
    match f.neighbor {
        Some(n) => st.add(n, c_xi),
        None => st.boundary = c_xi,
    }
    for (vi, sign, col) in [(2, 1.0, c_eta), (0, -1.0, c_eta), (3, 1.0, c_zeta), (1, -1.0, c_zeta)] {
        for &(c, w) in weights.stencil(f.vertices[vi]) {
            st.add(c, col * (sign * w));
        }
    }
    Ok(st)
}

/// Stencils for every face of the mesh.
pub fn gradient_stencils(mesh: &Mesh, weights: &VertexWeights) -> Result<Vec<FaceGradientStencil>, DiscretizationError> {
    (0..mesh.n_faces()).map(|f| face_gradient_stencil(mesh, weights, f)).collect()
}

/// Face-centred gradient of a cell field.
pub fn face_gradient(
    field: &[f64],
    face: usize,
    mesh: &Mesh,
    weights: &VertexWeights,
    boundary_value: f64,
) -> Result<Point3, DiscretizationError> {
    Ok(face_gradient_stencil(mesh, weights, face)?.apply(field, boundary_value))
}
