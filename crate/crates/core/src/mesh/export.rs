//! VTK legacy polydata and plain-text dumps.

use std::io::{self, Write};

use super::ConformingMesh;

/// Writes all live cells as 3D polygons. Each entry of `cell_scalars` must
/// hold one value per cell in [`ConformingMesh::cell_list`] order. Fracture id
/// and aspect ratio are always written.
pub fn write_vtk<W: Write>(
    mesh: &ConformingMesh,
    cell_scalars: &[(&str, &[f64])],
    mut w: W,
) -> io::Result<()> {
    let cells = mesh.cell_list();
    for (name, vals) in cell_scalars {
        if vals.len() != cells.len() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("scalar '{name}' has {} values for {} cells", vals.len(), cells.len()),
            ));
        }
    }
    let mut offset = Vec::with_capacity(mesh.fractures.len());
    let mut npts = 0;
    for f in &mesh.fractures {
        offset.push(npts);
        npts += f.vertices.len();
    }
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "dfn mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {npts} double")?;
    for f in &mesh.fractures {
        for v in &f.vertices {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", v.g.x, v.g.y, v.g.z)?;
        }
    }
    let size: usize = cells
        .iter()
        .map(|&(f, c)| 1 + mesh.fractures[f].cells[c].verts.len())
        .sum();
    writeln!(w, "POLYGONS {} {size}", cells.len())?;
    for &(f, c) in &cells {
        let verts = &mesh.fractures[f].cells[c].verts;
        write!(w, "{}", verts.len())?;
        for v in verts {
            write!(w, " {}", offset[f] + v)?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_DATA {}", cells.len())?;
    writeln!(w, "SCALARS fracture int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &(f, _) in &cells {
        writeln!(w, "{f}")?;
    }
    writeln!(w, "SCALARS aspect_ratio double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for &(f, c) in &cells {
        writeln!(w, "{:.17e}", mesh.fractures[f].cells[c].aspect_ratio)?;
    }
    for (name, vals) in cell_scalars {
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for x in vals.iter() {
            writeln!(w, "{x:.17e}")?;
        }
    }
    Ok(())
}

/// Deterministic text listing of live cells and trace edges, for golden
/// comparisons.
pub fn write_dump<W: Write>(mesh: &ConformingMesh, mut w: W) -> io::Result<()> {
    for (fi, f) in mesh.fractures.iter().enumerate() {
        writeln!(w, "fracture {fi} cells {}", f.alive_cells().count())?;
        for c in f.alive_cells() {
            let cell = &f.cells[c];
            write!(w, "cell {c} area {:.15e}", cell.area)?;
            for &v in &cell.verts {
                let p = f.vertices[v].p;
                write!(w, " ({:.15e}, {:.15e})", p.x, p.y)?;
            }
            writeln!(w)?;
        }
        for e in f.alive_edges() {
            let edge = &f.edges[e];
            if let (Some(t), Some((tf, te))) = (edge.trace, edge.twin) {
                writeln!(
                    w,
                    "trace-edge {e} trace {t} vertices {} {} twin {tf}:{te}",
                    edge.v[0], edge.v[1]
                )?;
            }
        }
    }
    Ok(())
}
