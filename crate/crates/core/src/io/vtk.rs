//! Legacy ASCII VTK export for visual inspection of pressure fields.
//! The matrix mesh goes out as a triangle unstructured grid, the fracture
//! segments as line cells.

use std::fmt::Write as _;
use std::path::Path;

use crate::geometry::{FineMesh, FractureDofs};
use crate::{Error, Result};

fn header(s: &mut String, title: &str) {
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title);
    s.push('\n');
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
}

/// Writes the triangle mesh with one `pressure` value per cell.
pub fn write_matrix_vtk(path: &Path, mesh: &FineMesh, pressure: &[f64]) -> Result<()> {
    if pressure.len() != mesh.cells.len() {
        return Err(Error::Config(format!(
            "pressure field has {} entries for {} cells",
            pressure.len(),
            mesh.cells.len()
        )));
    }
    let mut s = String::with_capacity(64 * mesh.cells.len());
    header(&mut s, "matrix pressure");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:.16e} {:.16e} 0.0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {} {}", mesh.cells.len(), 4 * mesh.cells.len());
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.cells.len());
    for _ in &mesh.cells {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "CELL_DATA {}", mesh.cells.len());
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in pressure {
        let _ = writeln!(s, "{p:.16e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Writes the fracture segments as line cells with one `pressure` value per
/// degree of freedom.
pub fn write_fracture_vtk(path: &Path, fdofs: &FractureDofs, pressure: &[f64]) -> Result<()> {
    if pressure.len() != fdofs.dofs.len() {
        return Err(Error::Config(format!(
            "pressure field has {} entries for {} fracture unknowns",
            pressure.len(),
            fdofs.dofs.len()
        )));
    }
    let n = fdofs.dofs.len();
    let mut s = String::with_capacity(96 * n + 256);
    header(&mut s, "fracture pressure");
    let _ = writeln!(s, "POINTS {} double", 2 * n);
    for d in &fdofs.dofs {
        let _ = writeln!(s, "{:.16e} {:.16e} 0.0", d.a[0], d.a[1]);
        let _ = writeln!(s, "{:.16e} {:.16e} 0.0", d.b[0], d.b[1]);
    }
    let _ = writeln!(s, "CELLS {n} {}", 3 * n);
    for i in 0..n {
        let _ = writeln!(s, "2 {} {}", 2 * i, 2 * i + 1);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        s.push_str("3\n");
    }
    let _ = writeln!(s, "CELL_DATA {n}");
    s.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in pressure {
        let _ = writeln!(s, "{p:.16e}");
    }
    s.push_str("SCALARS network double 1\nLOOKUP_TABLE default\n");
    for d in &fdofs.dofs {
        let _ = writeln!(s, "{}", d.network);
    }
    std::fs::write(path, s)?;
    Ok(())
}
