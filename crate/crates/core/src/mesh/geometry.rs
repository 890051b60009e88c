use super::{Mesh, MeshError, Point3};

const MIN_FACE_AREA: f64 = 1e-20;

/// Five-tetrahedron split of a gmsh-ordered hexahedron; every tet is
/// positively oriented for a right-handed hex.
pub(crate) fn hex_sub_tets(h: &[usize; 8]) -> [[usize; 4]; 5] {
    [
        [h[0], h[1], h[3], h[4]],
        [h[1], h[2], h[3], h[6]],
        [h[1], h[4], h[5], h[6]],
        [h[3], h[4], h[6], h[7]],
        [h[1], h[3], h[4], h[6]],
    ]
}

pub(crate) fn tet_volume(vertices: &[Point3], t: &[usize; 4]) -> f64 {
    let a = vertices[t[0]];
    let b = vertices[t[1]] - a;
    let c = vertices[t[2]] - a;
    let d = vertices[t[3]] - a;
    b.dot(&c.cross(&d)) / 6.0
}

/// Area vector and centroid of a quad split along the 0-2 diagonal.
pub(crate) fn quad_area_centroid(p: [Point3; 4]) -> (Point3, Point3) {
    let t1 = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0]));
    let t2 = 0.5 * (p[2] - p[0]).cross(&(p[3] - p[0]));
    let area = t1 + t2;
    let n = area.norm();
    let c1 = (p[0] + p[1] + p[2]) / 3.0;
    let c2 = (p[0] + p[2] + p[3]) / 3.0;
    let centroid = if n > 0.0 {
        let unit = area / n;
        let w1 = t1.dot(&unit);
        let w2 = t2.dot(&unit);
        if (w1 + w2).abs() > 0.0 {
            (c1 * w1 + c2 * w2) / (w1 + w2)
        } else {
            (p[0] + p[1] + p[2] + p[3]) / 4.0
        }
    } else {
        (p[0] + p[1] + p[2] + p[3]) / 4.0
    };
    (area, centroid)
}

pub(crate) fn build_geometry(mesh: &mut Mesh) -> Result<(), MeshError> {
    let nf = mesh.faces.len();
    mesh.face_area = Vec::with_capacity(nf);
    mesh.face_normal = Vec::with_capacity(nf);
    mesh.face_centroid = Vec::with_capacity(nf);
    for (i, face) in mesh.faces.iter().enumerate() {
        let p = face.vertices.map(|v| mesh.vertices[v]);
        let (area_vec, centroid) = quad_area_centroid(p);
        let area = area_vec.norm();
        if !(area >= MIN_FACE_AREA) {
            return Err(MeshError::DegenerateFace { face: i, area });
        }
        mesh.face_area.push(area);
        mesh.face_normal.push(area_vec / area);
        mesh.face_centroid.push(centroid);
    }

    let nc = mesh.cells.len();
    mesh.cell_volume = Vec::with_capacity(nc);
    mesh.cell_centroid = Vec::with_capacity(nc);
    for (c, hex) in mesh.cells.iter().enumerate() {
        let mut vol = 0.0;
        let mut moment = Point3::zeros();
        for t in hex_sub_tets(hex) {
            let v = tet_volume(&mesh.vertices, &t);
            if !(v > 0.0) {
                return Err(MeshError::NegativeVolume { cell: c, volume: v });
            }
            let centroid = t.iter().map(|&k| mesh.vertices[k]).sum::<Point3>() / 4.0;
            vol += v;
            moment += centroid * v;
        }
        mesh.cell_volume.push(vol);
        mesh.cell_centroid.push(moment / vol);
    }

    mesh.vertex_cells = vec![Vec::new(); mesh.vertices.len()];
    for (c, hex) in mesh.cells.iter().enumerate() {
        for &v in hex {
            mesh.vertex_cells[v].push(c);
        }
    }

    mesh.face_neighbors = mesh
        .faces
        .iter()
        .map(|f| {
            let mut cells: Vec<usize> = f
                .vertices
                .iter()
                .flat_map(|&v| mesh.vertex_cells[v].iter().copied())
                .collect();
            cells.sort_unstable();
            cells.dedup();
            cells
        })
        .collect();
    Ok(())
}
