//! Unstructured hexahedral meshes.
//!
//! A [`RawMesh`] is what comes out of the reader or a generator: vertices,
//! element connectivity and tagged boundary surface elements. [`Mesh`] is the
//! finished hexahedral mesh with face topology and every geometric quantity
//! the finite-volume discretization needs. It is immutable once built.

mod convert;
mod geometry;
mod msh;
mod shapes;

use std::collections::HashMap;
use std::path::Path;

pub use msh::parse_msh;

pub type Point3 = nalgebra::Vector3<f64>;

/// Local faces of a hexahedron in gmsh vertex order (0-3 bottom ring,
/// 4-7 top ring). Each face is listed counter-clockwise seen from outside.
pub const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

/// Name given to boundary faces that carry no physical tag.
pub const DEFAULT_PATCH: &str = "boundary";

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("{}: {}", .0.display(), .1)]
    Io(std::path::PathBuf, std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unsupported element type {element_type}")]
    UnsupportedElement { line: usize, element_type: u32 },
    #[error("line {line}: element references unknown node {node}")]
    DanglingNode { line: usize, node: usize },
    #[error("mesh mixes tetrahedra and hexahedra")]
    MixedElements,
    #[error("tet-to-hex conversion requires a tetrahedral mesh, found {hexes} hexahedra")]
    NonTetCell { hexes: usize },
    #[error("mesh has no volume cells")]
    NoCells,
    #[error("face {vertices:?} is shared by more than two cells")]
    NonManifoldFace { vertices: [usize; 4] },
    #[error("boundary element {vertices:?} does not match any boundary face")]
    UnmatchedBoundaryElement { vertices: Vec<usize> },
    #[error("face {face} is degenerate (area {area:e} m^2)")]
    DegenerateFace { face: usize, area: f64 },
    #[error("cell {cell} has a non-positive sub-volume ({volume:e} m^3)")]
    NegativeVolume { cell: usize, volume: f64 },
    #[error("vertex {vertex} has no adjacent cells")]
    IsolatedVertex { vertex: usize },
}

/// Mesh as read from file or generated, before topology is built.
#[derive(Debug, Clone, Default)]
pub struct RawMesh {
    pub vertices: Vec<Point3>,
    pub hexes: Vec<[usize; 8]>,
    pub tets: Vec<[usize; 4]>,
    pub patch_names: Vec<String>,
    /// Tagged boundary surface elements (3 or 4 vertices) with a patch index.
    pub boundary_elements: Vec<(Vec<usize>, usize)>,
}

impl RawMesh {
    pub fn total_volume(&self) -> f64 {
        let tet_vol: f64 = self
            .tets
            .iter()
            .map(|t| geometry::tet_volume(&self.vertices, t).abs())
            .sum();
        let hex_vol: f64 = self
            .hexes
            .iter()
            .map(|h| {
                geometry::hex_sub_tets(h)
                    .iter()
                    .map(|t| geometry::tet_volume(&self.vertices, t))
                    .sum::<f64>()
            })
            .sum();
        tet_vol + hex_vol
    }

    /// Applies a coordinate transformation to every vertex.
    pub fn map_vertices(mut self, f: impl Fn(Point3) -> Point3) -> Self {
        for v in &mut self.vertices {
            *v = f(*v);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    /// Vertices ordered counter-clockwise seen from outside the owner.
    pub vertices: [usize; 4],
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub patch: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub name: String,
    pub faces: Vec<usize>,
}

/// Hexahedral finite-volume mesh with precomputed geometry.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<Point3>,
    pub cells: Vec<[usize; 8]>,
    pub faces: Vec<Face>,
    /// Face ids per cell in [`HEX_FACES`] order.
    pub cell_faces: Vec<[usize; 6]>,
    pub face_area: Vec<f64>,
    /// Unit normal, outward with respect to the owner.
    pub face_normal: Vec<Point3>,
    pub face_centroid: Vec<Point3>,
    pub cell_centroid: Vec<Point3>,
    pub cell_volume: Vec<f64>,
    pub vertex_cells: Vec<Vec<usize>>,
    /// All cells sharing at least one vertex with the face, sorted.
    pub face_neighbors: Vec<Vec<usize>>,
    pub patches: Vec<Patch>,
}

impl Mesh {
    /// Reads an MSH 2.2 file, converting tetrahedra to hexahedra when needed.
    pub fn load_msh(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MeshError::Io(path.to_path_buf(), e))?;
        let raw = parse_msh(&text)?;
        let raw = if raw.tets.is_empty() { raw } else { raw.tets_to_hexes()? };
        Mesh::from_raw(raw)
    }

    /// Builds face topology and geometry from a hexahedral raw mesh.
    pub fn from_raw(raw: RawMesh) -> Result<Mesh, MeshError> {
        if !raw.tets.is_empty() {
            return Err(MeshError::MixedElements);
        }
        if raw.hexes.is_empty() {
            return Err(MeshError::NoCells);
        }
        let raw = compact_vertices(raw);
        let topo = build_topology(&raw)?;
        let mut mesh = Mesh {
            vertices: raw.vertices,
            cells: raw.hexes,
            faces: topo.faces,
            cell_faces: topo.cell_faces,
            face_area: Vec::new(),
            face_normal: Vec::new(),
            face_centroid: Vec::new(),
            cell_centroid: Vec::new(),
            cell_volume: Vec::new(),
            vertex_cells: Vec::new(),
            face_neighbors: Vec::new(),
            patches: topo.patches,
        };
        geometry::build_geometry(&mut mesh)?;
        Ok(mesh)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
            .map(|(i, _)| i)
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = usize> + '_ {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_boundary())
            .map(|(i, _)| i)
    }

    pub fn patch_index(&self, name: &str) -> Option<usize> {
        self.patches.iter().position(|p| p.name == name)
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volume.iter().sum()
    }

    /// Area vector of face `f` oriented outward from `cell`.
    pub fn outward_area_vector(&self, f: usize, cell: usize) -> Point3 {
        let a = self.face_normal[f] * self.face_area[f];
        if self.faces[f].owner == cell {
            a
        } else {
            -a
        }
    }

    /// Vector from the owner centroid to the neighbor centroid, or to the
    /// face centroid on boundary faces.
    pub fn face_distance_vector(&self, f: usize) -> Point3 {
        let face = &self.faces[f];
        let far = match face.neighbor {
            Some(n) => self.cell_centroid[n],
            None => self.face_centroid[f],
        };
        far - self.cell_centroid[face.owner]
    }

    /// Axis-aligned bounding box of the vertices.
    pub fn bounding_box(&self) -> (Point3, Point3) {
        let mut lo = Point3::repeat(f64::INFINITY);
        let mut hi = Point3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Index of the cell whose centroid is nearest to `p`; ties go to the
    /// lowest index.
    pub fn nearest_cell(&self, p: &Point3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.cell_centroid.iter().enumerate() {
            let d = (c - p).norm_squared();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Equal-weight vertex interpolation stencils.
    pub fn vertex_weights(&self) -> Result<VertexWeights, MeshError> {
        VertexWeights::new(self)
    }
}

/// Per-vertex averaging stencils over the adjacent cells.
#[derive(Debug, Clone)]
pub struct VertexWeights {
    stencils: Vec<Vec<(usize, f64)>>,
}

impl VertexWeights {
    pub fn new(mesh: &Mesh) -> Result<Self, MeshError> {
        let stencils = mesh
            .vertex_cells
            .iter()
            .enumerate()
            .map(|(v, cells)| {
                if cells.is_empty() {
                    return Err(MeshError::IsolatedVertex { vertex: v });
                }
                let w = 1.0 / cells.len() as f64;
                Ok(cells.iter().map(|&c| (c, w)).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { stencils })
    }

    pub fn stencil(&self, vertex: usize) -> &[(usize, f64)] {
        &self.stencils[vertex]
    }

    pub fn interpolate(&self, vertex: usize, field: &[f64]) -> f64 {
        self.stencils[vertex].iter().map(|&(c, w)| w * field[c]).sum()
    }

    pub fn len(&self) -> usize {
        self.stencils.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencils.is_empty()
    }
}

fn compact_vertices(mut raw: RawMesh) -> RawMesh {
    let mut used = vec![false; raw.vertices.len()];
    for h in &raw.hexes {
        for &v in h {
            used[v] = true;
        }
    }
    if used.iter().all(|&u| u) {
        return raw;
    }
    let mut remap = vec![usize::MAX; raw.vertices.len()];
    let mut verts = Vec::new();
    for (i, v) in raw.vertices.iter().enumerate() {
        if used[i] {
            remap[i] = verts.len();
            verts.push(*v);
        }
    }
    for h in &mut raw.hexes {
        for v in h.iter_mut() {
            *v = remap[*v];
        }
    }
    raw.boundary_elements.retain(|(vs, _)| vs.iter().all(|&v| used[v]));
    for (vs, _) in &mut raw.boundary_elements {
        for v in vs.iter_mut() {
            *v = remap[*v];
        }
    }
    raw.vertices = verts;
    raw
}

struct Topology {
    faces: Vec<Face>,
    cell_faces: Vec<[usize; 6]>,
    patches: Vec<Patch>,
}

fn face_key(vs: &[usize]) -> [usize; 4] {
    let mut k = [usize::MAX; 4];
    k[..vs.len()].copy_from_slice(vs);
    k.sort_unstable();
    k
}

fn build_topology(raw: &RawMesh) -> Result<Topology, MeshError> {
    let mut lookup: HashMap<[usize; 4], usize> = HashMap::new();
    let mut faces: Vec<Face> = Vec::new();
    let mut cell_faces = Vec::with_capacity(raw.hexes.len());
    for (c, hex) in raw.hexes.iter().enumerate() {
        let mut ids = [0usize; 6];
        for (k, local) in HEX_FACES.iter().enumerate() {
            let vs = [hex[local[0]], hex[local[1]], hex[local[2]], hex[local[3]]];
            let key = face_key(&vs);
            let id = match lookup.get(&key) {
                Some(&id) => {
                    let face = &mut faces[id];
                    if face.neighbor.is_some() {
                        return Err(MeshError::NonManifoldFace { vertices: key });
                    }
                    face.neighbor = Some(c);
                    id
                }
                None => {
                    faces.push(Face { vertices: vs, owner: c, neighbor: None, patch: None });
                    lookup.insert(key, faces.len() - 1);
                    faces.len() - 1
                }
            };
            ids[k] = id;
        }
        cell_faces.push(ids);
    }

    let mut patches: Vec<Patch> = raw
        .patch_names
        .iter()
        .map(|n| Patch { name: n.clone(), faces: Vec::new() })
        .collect();
    for (vs, patch) in &raw.boundary_elements {
        let key = face_key(vs);
        let id = lookup
            .get(&key)
            .copied()
            .filter(|&id| faces[id].is_boundary() && vs.len() == 4)
            .ok_or_else(|| MeshError::UnmatchedBoundaryElement { vertices: vs.clone() })?;
        faces[id].patch = Some(*patch);
    }
    let untagged = faces.iter().any(|f| f.is_boundary() && f.patch.is_none());
    if untagged {
        let idx = match patches.iter().position(|p| p.name == DEFAULT_PATCH) {
            Some(i) => i,
            None => {
                patches.push(Patch { name: DEFAULT_PATCH.to_string(), faces: Vec::new() });
                patches.len() - 1
            }
        };
        for f in faces.iter_mut().filter(|f| f.is_boundary() && f.patch.is_none()) {
            f.patch = Some(idx);
        }
    }
    for (i, f) in faces.iter().enumerate() {
        if let Some(p) = f.patch {
            patches[p].faces.push(i);
        }
    }
    patches.retain(|p| !p.faces.is_empty());
    // Patch indices may have shifted after dropping empty patches.
    for (pi, p) in patches.iter().enumerate() {
        for &f in &p.faces {
            faces[f].patch = Some(pi);
        }
    }
    Ok(Topology { faces, cell_faces, patches })
}
