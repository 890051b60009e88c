use super::material::MaterialModel;
use super::SolidifyError;
use crate::discretization::FaceGradientStencil;
use crate::linsolve::LinearSystem;
use crate::mesh::{Mesh, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellTag {
    Solid,
    LiquidMushy,
}

/// Treatment of a face in the flow solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceCase {
    /// Interior face with no solid cell in its gradient stencil.
    Open,
    /// Both owners liquid or mushy, but a vertex neighbour is solid; the
    /// gradient stencil is smeared over the remaining cells.
    Smeared,
    /// At least one owner is solid; no flow crosses the face.
    Blocked,
    /// Domain boundary (a no-slip wall).
    Boundary,
}

/// Active cells, face cases and modified gradient stencils for one step.
#[derive(Debug, Clone)]
pub struct ActiveSystemMap {
    pub tags: Vec<CellTag>,
    /// Active cells in increasing order.
    pub active: Vec<usize>,
    /// Reduced row of each cell, `None` for solid cells.
    pub row_of: Vec<Option<usize>>,
    pub face_case: Vec<FaceCase>,
    /// Smeared stencils of the `Smeared` faces, keyed by face.
    pub smeared: Vec<(usize, FaceGradientStencil)>,
}

impl ActiveSystemMap {
    pub fn is_solid(&self, cell: usize) -> bool {
        self.tags[cell] == CellTag::Solid
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Gradient stencil to use on `face` in the flow solve.
    pub fn stencil<'a>(&'a self, face: usize, stencils: &'a [FaceGradientStencil]) -> &'a FaceGradientStencil {
        match self.face_case[face] {
            FaceCase::Smeared => {
                let k = self.smeared.binary_search_by_key(&face, |(f, _)| *f).expect("smeared face");
                &self.smeared[k].1
            }
            _ => &stencils[face],
        }
    }

    /// Whether flow may cross `face`.
    pub fn is_open(&self, face: usize) -> bool {
        matches!(self.face_case[face], FaceCase::Open | FaceCase::Smeared)
    }
}

/// Tags cells from the previous-step temperature and classifies faces.
pub fn classify_cells(
    mesh: &Mesh,
    stencils: &[FaceGradientStencil],
    temperature: &[f64],
    mat: &MaterialModel,
) -> Result<ActiveSystemMap, SolidifyError> {
    let threshold = mat.solid_threshold();
    let tags: Vec<CellTag> = temperature
        .iter()
        .map(|&t| if t < threshold { CellTag::Solid } else { CellTag::LiquidMushy })
        .collect();
    let mut active = Vec::new();
    let mut row_of = vec![None; mesh.n_cells()];
    for (c, tag) in tags.iter().enumerate() {
        if *tag == CellTag::LiquidMushy {
            row_of[c] = Some(active.len());
            active.push(c);
        }
    }
    let solid = |c: usize| tags[c] == CellTag::Solid;
    let mut face_case = Vec::with_capacity(mesh.n_faces());
    let mut smeared = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        let case = match face.neighbor {
            None => FaceCase::Boundary,
            Some(nb) if solid(face.owner) || solid(nb) => FaceCase::Blocked,
            Some(_) if mesh.face_neighbors[f].iter().any(|&c| solid(c)) => {
                smeared.push((f, smear_gradient_stencil(&stencils[f], solid)?));
                FaceCase::Smeared
            }
            Some(_) => FaceCase::Open,
        };
        face_case.push(case);
    }
    Ok(ActiveSystemMap { tags, active, row_of, face_case, smeared })
}

/// Moves the coefficients of solid cells equally onto the remaining cells,
/// per component. The coefficient sum is unchanged.
pub fn smear_gradient_stencil(
    stencil: &FaceGradientStencil,
    is_solid: impl Fn(usize) -> bool,
) -> Result<FaceGradientStencil, SolidifyError> {
    let mut removed = Point3::zeros();
    let mut cells = Vec::with_capacity(stencil.cells.len());
    let mut coeffs = Vec::with_capacity(stencil.cells.len());
    for (&c, a) in stencil.cells.iter().zip(&stencil.coeffs) {
        if is_solid(c) {
            removed += a;
        } else {
            cells.push(c);
            coeffs.push(*a);
        }
    }
    if cells.is_empty() {
        return Err(SolidifyError::AllNeighborsSolid { face: stencil.face });
    }
    let share = removed / cells.len() as f64;
    for a in &mut coeffs {
        *a += share;
    }
    Ok(FaceGradientStencil { face: stencil.face, cells, coeffs, boundary: stencil.boundary, condition: stencil.condition })
}

/// Deletes the rows and columns of solid cells (their velocity is zero) and
/// adds the volume-integrated Darcy coefficient to the remaining diagonal.
pub fn reduce_momentum_system(
    full: &LinearSystem,
    map: &ActiveSystemMap,
    drag: &[f64],
    volume: &[f64],
) -> LinearSystem {
    let mut red = full.reduce(&map.active, |_| 0.0);
    for (r, &c) in map.active.iter().enumerate() {
        let d = drag[c] * volume[c];
        if d != 0.0 {
            *red.matrix.get_mut(r, r).expect("diagonal entry") += d;
        }
    }
    red
}
