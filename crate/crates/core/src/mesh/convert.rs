//! Subdivision of tetrahedra into hexahedra.
//!
//! Each tet `(p, q, r, s)` gains its six edge midpoints, four face centroids
//! and its centroid. The hex attached to corner `p` is
//! `(p, m_pq, c_pqr, m_pr, m_ps, c_pqs, g, c_prs)` for a positively oriented
//! ordering of the remaining corners.

use std::collections::HashMap;

use super::geometry::tet_volume;
use super::{MeshError, Point3, RawMesh};

/// Vertices closer than this are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Default)]
struct Builder {
    vertices: Vec<Point3>,
    derived: HashMap<Vec<usize>, usize>,
}

impl Builder {
    /// Vertex at the centroid of the given original vertices, created once
    /// per distinct vertex set.
    fn centroid_of(&mut self, src: &[Point3], ids: &[usize]) -> usize {
        let mut key = ids.to_vec();
        key.sort_unstable();
        if let Some(&v) = self.derived.get(&key) {
            return v;
        }
        let p = key.iter().map(|&i| src[i]).sum::<Point3>() / key.len() as f64;
        self.vertices.push(p);
        let id = self.vertices.len() - 1;
        self.derived.insert(key, id);
        id
    }
}

impl RawMesh {
    /// Replaces every tetrahedron with four conforming hexahedra.
    pub fn tets_to_hexes(self) -> Result<RawMesh, MeshError> {
        if !self.hexes.is_empty() {
            return Err(MeshError::NonTetCell { hexes: self.hexes.len() });
        }
        if self.tets.is_empty() {
            return Err(MeshError::NoCells);
        }
        let src = &self.vertices;
        let mut b = Builder { vertices: src.clone(), derived: HashMap::new() };
        for i in 0..src.len() {
            b.derived.insert(vec![i], i);
        }

        let mut hexes = Vec::with_capacity(4 * self.tets.len());
        for tet in &self.tets {
            let mut t = *tet;
            if tet_volume(src, &t) < 0.0 {
                t.swap(1, 2);
            }
            let [a, bb, c, d] = t;
            // Even permutations keep the orientation of (a, b, c, d).
            for [p, q, r, s] in [[a, bb, c, d], [bb, a, d, c], [c, a, bb, d], [d, a, c, bb]] {
                let m_pq = b.centroid_of(src, &[p, q]);
                let m_pr = b.centroid_of(src, &[p, r]);
                let m_ps = b.centroid_of(src, &[p, s]);
                let c_pqr = b.centroid_of(src, &[p, q, r]);
                let c_pqs = b.centroid_of(src, &[p, q, s]);
                let c_prs = b.centroid_of(src, &[p, r, s]);
                let g = b.centroid_of(src, &[p, q, r, s]);
                hexes.push([p, m_pq, c_pqr, m_pr, m_ps, c_pqs, g, c_prs]);
            }
        }

        let mut boundary_elements = Vec::with_capacity(3 * self.boundary_elements.len());
        for (vs, patch) in &self.boundary_elements {
            match vs.len() {
                3 => {
                    let c = b.centroid_of(src, vs);
                    for k in 0..3 {
                        let p = vs[k];
                        let m_next = b.centroid_of(src, &[p, vs[(k + 1) % 3]]);
                        let m_prev = b.centroid_of(src, &[p, vs[(k + 2) % 3]]);
                        boundary_elements.push((vec![p, m_next, c, m_prev], *patch));
                    }
                }
                _ => return Err(MeshError::UnmatchedBoundaryElement { vertices: vs.clone() }),
            }
        }

        let (vertices, remap) = merge_coincident(b.vertices);
        for h in &mut hexes {
            for v in h.iter_mut() {
                *v = remap[*v];
            }
        }
        for (vs, _) in &mut boundary_elements {
            for v in vs.iter_mut() {
                *v = remap[*v];
            }
        }
        Ok(RawMesh {
            vertices,
            hexes,
            tets: Vec::new(),
            patch_names: self.patch_names,
            boundary_elements,
        })
    }
}

/// Merges vertices within [`MERGE_TOLERANCE`] of each other. Returns the
/// surviving vertices and the old-to-new index map.
fn merge_coincident(vertices: Vec<Point3>) -> (Vec<Point3>, Vec<usize>) {
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&i, &j| vertices[i].x.total_cmp(&vertices[j].x).then(i.cmp(&j)));
    let mut rep: Vec<usize> = (0..vertices.len()).collect();
    for (pos, &i) in order.iter().enumerate() {
        if rep[i] != i {
            continue;
        }
        for &j in &order[pos + 1..] {
            if vertices[j].x - vertices[i].x > MERGE_TOLERANCE {
                break;
            }
            if rep[j] == j && (vertices[j] - vertices[i]).norm() <= MERGE_TOLERANCE {
                rep[j] = i;
            }
        }
    }
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut out = Vec::new();
    for i in 0..vertices.len() {
        if rep[i] == i {
            remap[i] = out.len();
            out.push(vertices[i]);
        }
    }
    for i in 0..vertices.len() {
        remap[i] = remap[rep[i]];
    }
    (out, remap)
}

#[cfg(test)]
mod tests {
    use super::super::Mesh;
    use super::*;

    fn single_tet() -> RawMesh {
        RawMesh {
            vertices: vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            tets: vec![[0, 1, 2, 3]],
            ..Default::default()
        }
    }

    #[test]
    fn one_tet_gives_four_hexes() {
        let raw = single_tet();
        let before = raw.total_volume();
        let hexed = raw.tets_to_hexes().unwrap();
        assert_eq!(hexed.hexes.len(), 4);
        assert_eq!(hexed.vertices.len(), 15);
        let mesh = Mesh::from_raw(hexed).unwrap();
        assert!((mesh.total_volume() - before).abs() < 1e-12 * before);
    }

    #[test]
    fn inverted_tet_is_reoriented() {
        let mut raw = single_tet();
        raw.tets = vec![[0, 2, 1, 3]];
        let mesh = Mesh::from_raw(raw.tets_to_hexes().unwrap()).unwrap();
        assert!(mesh.cell_volume.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn hex_input_is_rejected() {
        let raw = RawMesh::structured_box([1, 1, 1], [1.0, 1.0, 1.0]);
        assert!(matches!(raw.tets_to_hexes(), Err(MeshError::NonTetCell { hexes: 1 })));
    }

    #[test]
    fn merge_collapses_near_duplicates() {
        let (v, map) = merge_coincident(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1e-13, 0.0, 0.0),
        ]);
        assert_eq!(v.len(), 2);
        assert_eq!(map, vec![0, 1, 0]);
    }
}
