use super::{Point3, RawMesh};

const AXIS_PATCHES: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

impl RawMesh {
    /// Uniform block of `n[0] x n[1] x n[2]` hexahedra spanning
    /// `[0, lengths[0]] x [0, lengths[1]] x [0, lengths[2]]`.
    ///
    /// Boundary faces are grouped by outward direction into the patches
    /// `xmin`, `xmax`, `ymin`, `ymax`, `zmin`, `zmax`.
    pub fn structured_box(n: [usize; 3], lengths: [f64; 3]) -> RawMesh {
        Self::structured_blocks(n, lengths, |_, _, _| true)
    }

    /// Sub-block of a uniform lattice: only cells for which `keep(i, j, k)`
    /// holds are retained. Exposed faces, including re-entrant ones, are
    /// grouped by outward direction like [`RawMesh::structured_box`].
    pub fn structured_blocks(
        n: [usize; 3],
        lengths: [f64; 3],
        keep: impl Fn(usize, usize, usize) -> bool,
    ) -> RawMesh {
        let [nx, ny, nz] = n;
        let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    vertices.push(Point3::new(
                        lengths[0] * i as f64 / nx as f64,
                        lengths[1] * j as f64 / ny as f64,
                        lengths[2] * k as f64 / nz as f64,
                    ));
                }
            }
        }
        let kept = |i: isize, j: isize, k: isize| {
            i >= 0
                && j >= 0
                && k >= 0
                && (i as usize) < nx
                && (j as usize) < ny
                && (k as usize) < nz
                && keep(i as usize, j as usize, k as usize)
        };

        let mut hexes = Vec::new();
        let mut boundary_elements = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if !keep(i, j, k) {
                        continue;
                    }
                    hexes.push([
                        vid(i, j, k),
                        vid(i + 1, j, k),
                        vid(i + 1, j + 1, k),
                        vid(i, j + 1, k),
                        vid(i, j, k + 1),
                        vid(i + 1, j, k + 1),
                        vid(i + 1, j + 1, k + 1),
                        vid(i, j + 1, k + 1),
                    ]);
                    let (ii, jj, kk) = (i as isize, j as isize, k as isize);
                    let sides: [(bool, Vec<usize>, usize); 6] = [
                        (
                            !kept(ii - 1, jj, kk),
                            vec![vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)],
                            0,
                        ),
                        (
                            !kept(ii + 1, jj, kk),
                            vec![vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i + 1, j + 1, k + 1), vid(i + 1, j, k + 1)],
                            1,
                        ),
                        (
                            !kept(ii, jj - 1, kk),
                            vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j, k + 1), vid(i, j, k + 1)],
                            2,
                        ),
                        (
                            !kept(ii, jj + 1, kk),
                            vec![vid(i, j + 1, k), vid(i + 1, j + 1, k), vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1)],
                            3,
                        ),
                        (
                            !kept(ii, jj, kk - 1),
                            vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)],
                            4,
                        ),
                        (
                            !kept(ii, jj, kk + 1),
                            vec![vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1)],
                            5,
                        ),
                    ];
                    for (exposed, vs, patch) in sides {
                        if exposed {
                            boundary_elements.push((vs, patch));
                        }
                    }
                }
            }
        }
        let patch_names = AXIS_PATCHES.iter().flatten().map(|s| s.to_string()).collect();
        RawMesh { vertices, hexes, tets: Vec::new(), patch_names, boundary_elements }
    }

    /// L-shaped bracket: a `lengths` box with the upper corner block
    /// `x > fx * lx, z > fz * lz` removed.
    pub fn l_bracket(n: [usize; 3], lengths: [f64; 3], fx: f64, fz: f64) -> RawMesh {
        let cut_i = (fx * n[0] as f64).round() as usize;
        let cut_k = (fz * n[2] as f64).round() as usize;
        Self::structured_blocks(n, lengths, move |i, _, k| !(i >= cut_i && k >= cut_k))
    }
}

#[cfg(test)]
mod tests {
    use super::super::Mesh;
    use super::*;

    #[test]
    fn box_patches_cover_boundary() {
        let mesh = Mesh::from_raw(RawMesh::structured_box([3, 2, 4], [0.3, 0.2, 0.4])).unwrap();
        let names: Vec<_> = mesh.patches.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["xmin", "xmax", "ymin", "ymax", "zmin", "zmax"]);
        assert_eq!(mesh.patches[0].faces.len(), 2 * 4);
        assert_eq!(mesh.patches[4].faces.len(), 3 * 2);
        assert!((mesh.total_volume() - 0.3 * 0.2 * 0.4).abs() < 1e-15);
    }

    #[test]
    fn bracket_volume() {
        let mesh = Mesh::from_raw(RawMesh::l_bracket([4, 1, 4], [4.0, 1.0, 4.0], 0.5, 0.5)).unwrap();
        assert_eq!(mesh.n_cells(), 12);
        assert!((mesh.total_volume() - 12.0).abs() < 1e-12);
        assert!(mesh.faces.iter().all(|f| f.neighbor.is_some() || f.patch.is_some()));
    }
}
