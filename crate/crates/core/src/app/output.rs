use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::AppError;
use crate::mesh::{Mesh, Point3};

/// Value written in place of NaN in VTK files.
pub const VTK_UNDEFINED: f64 = -1.0;

/// Writes a legacy ASCII VTK unstructured grid of hexahedra with one
/// `CELL_DATA` scalar section per field. NaN entries are written as
/// [`VTK_UNDEFINED`], which the file title states.
pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: &Path) -> Result<(), AppError> {
    let n = mesh.n_cells();
    if let Some((name, v)) = fields.iter().find(|(_, v)| v.len() != n) {
        return Err(AppError::FieldLength { name: name.to_string(), expected: n, got: v.len() });
    }
    let file = File::create(path).map_err(|e| AppError::Io(path.to_path_buf(), e))?;
    let mut w = BufWriter::new(file);
    write_vtk_to(mesh, fields, &mut w).and_then(|_| w.flush()).map_err(|e| AppError::Io(path.to_path_buf(), e))
}

fn write_vtk_to(mesh: &Mesh, fields: &[(&str, &[f64])], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "solidcast cell fields; undefined values written as {VTK_UNDEFINED}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.vertices.len())?;
    for v in &mesh.vertices {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    let n = mesh.n_cells();
    writeln!(w, "CELLS {} {}", n, 9 * n)?;
    for c in &mesh.cells {
        writeln!(w, "8 {} {} {} {} {} {} {} {}", c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7])?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "12")?;
    }
    writeln!(w, "CELL_DATA {n}")?;
    for (name, values) in fields {
        writeln!(w, "SCALARS {} double 1", name.replace(char::is_whitespace, "_"))?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(w, "{}", if v.is_nan() { VTK_UNDEFINED } else { *v })?;
        }
    }
    Ok(())
}

/// Temperature traces at fixed points, each read from the cell whose
/// centroid is nearest.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeTraces {
    pub points: Vec<Point3>,
    pub cells: Vec<usize>,
    pub times: Vec<f64>,
    /// `values[step][probe]`.
    pub values: Vec<Vec<f64>>,
}

impl ProbeTraces {
    /// Fails for points outside the mesh bounding box.
    pub fn new(mesh: &Mesh, points: &[Point3]) -> Result<Self, AppError> {
        let (lo, hi) = mesh.bounding_box();
        let slack = 1e-12 * (hi - lo).norm();
        let mut cells = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if (0..3).any(|k| p[k] < lo[k] - slack || p[k] > hi[k] + slack) {
                return Err(AppError::ProbeOutside { probe: i, point: [p.x, p.y, p.z] });
            }
            cells.push(mesh.nearest_cell(p));
        }
        Ok(Self { points: points.to_vec(), cells, times: Vec::new(), values: Vec::new() })
    }

    pub fn record(&mut self, time: f64, field: &[f64]) {
        self.times.push(time);
        self.values.push(self.cells.iter().map(|&c| field[c]).collect());
    }

    /// Trace of one probe.
    pub fn trace(&self, probe: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[probe]).collect()
    }

    /// Probe whose last recorded value is the highest.
    pub fn hottest(&self) -> Option<usize> {
        let last = self.values.last()?;
        (0..last.len()).max_by(|&a, &b| last[a].total_cmp(&last[b]))
    }
}

/// CSV with a time column and one column per probe.
pub fn write_probes(traces: &ProbeTraces, path: &Path) -> Result<(), AppError> {
    let io = |e: std::io::Error| AppError::Io(path.to_path_buf(), e);
    let mut out = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    let mut header = vec!["time".to_string()];
    header.extend((0..traces.points.len()).map(|i| format!("probe_{i}")));
    out.write_record(&header).map_err(|e| io(e.into()))?;
    for (t, row) in traces.times.iter().zip(&traces.values) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec).map_err(|e| io(e.into()))?;
    }
    out.flush().map_err(io)
}
