//! Consistency checks of a [`ConformingMesh`].

use super::ConformingMesh;
use crate::geometry::TOL_GEOM;

/// Outcome of [`ConformingMesh::audit`]; empty violation list means pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub(super) fn audit(mesh: &ConformingMesh) -> AuditReport {
    let mut v = Vec::new();
    for (fi, fm) in mesh.fractures.iter().enumerate() {
        let diam = fm.boundary.diameter();
        let tol = TOL_GEOM * diam;

        for c in fm.alive_cells() {
            let cell = &fm.cells[c];
            let n = cell.verts.len();
            if n < 3 || cell.edges.len() != n {
                v.push(format!("fracture {fi} cell {c}: malformed loop"));
                continue;
            }
            for k in 0..n {
                let e = cell.edges[k];
                let (a, b) = (cell.verts[k], cell.verts[(k + 1) % n]);
                let Some(edge) = fm.edges.get(e) else {
                    v.push(format!("fracture {fi} cell {c}: missing edge {e}"));
                    continue;
                };
                if !edge.alive {
                    v.push(format!("fracture {fi} cell {c}: dead edge {e}"));
                }
                let slot = if edge.v == [a, b] {
                    0
                } else if edge.v == [b, a] {
                    1
                } else {
                    v.push(format!(
                        "fracture {fi} cell {c}: edge {e} does not join vertices {a} and {b}"
                    ));
                    continue;
                };
                if edge.cells[slot] != Some(c) {
                    v.push(format!(
                        "fracture {fi} edge {e}: adjacency slot {slot} is {:?}, expected cell {c}",
                        edge.cells[slot]
                    ));
                }
            }
            let poly = fm.cell_polygon(c);
            if poly.signed_area() <= 0.0 || !poly.is_convex(TOL_GEOM) {
                v.push(format!("fracture {fi} cell {c}: not a convex counter-clockwise polygon"));
            }
            if (poly.area() - cell.area).abs() > 1e-12 * cell.area.abs().max(f64::MIN_POSITIVE) {
                v.push(format!("fracture {fi} cell {c}: stale area cache"));
            }
        }

        for e in fm.alive_edges() {
            let edge = &fm.edges[e];
            for (slot, c) in edge.cells.iter().enumerate() {
                let Some(c) = *c else { continue };
                let ok = fm
                    .cells
                    .get(c)
                    .is_some_and(|cell| cell.alive && cell.edges.contains(&e));
                if !ok {
                    v.push(format!(
                        "fracture {fi} edge {e}: slot {slot} refers to cell {c} which does not contain it"
                    ));
                }
            }
            let count = edge.cells.iter().flatten().count();
            let expected = if edge.is_boundary() { 1 } else { 2 };
            if count != expected {
                v.push(format!(
                    "fracture {fi} edge {e}: {count} adjacent cells, expected {expected}"
                ));
            }
            if fm.edge_length(e) <= tol {
                v.push(format!("fracture {fi} edge {e}: zero length"));
            }
            for &vid in &edge.v {
                let vx = &fm.vertices[vid];
                if (fm.frame.to_global(&vx.p) - vx.g).norm() > 1e-8 * diam {
                    v.push(format!("fracture {fi} vertex {vid}: 2D and 3D images disagree"));
                }
            }
            if let Some(t) = edge.trace {
                let Some((tf, te)) = edge.twin else {
                    v.push(format!("fracture {fi} edge {e}: trace edge without twin"));
                    continue;
                };
                let Some(tw) = mesh.fractures.get(tf).and_then(|f| f.edges.get(te)) else {
                    v.push(format!("fracture {fi} edge {e}: twin ({tf}, {te}) missing"));
                    continue;
                };
                if !tw.alive || tw.twin != Some((fi, e)) || tw.trace != Some(t) {
                    v.push(format!(
                        "fracture {fi} edge {e}: twin ({tf}, {te}) is not reciprocal"
                    ));
                    continue;
                }
                if !mesh.traces.get(t).is_some_and(|tr| {
                    tr.fractures.contains(&fi) && tr.fractures.contains(&tf) && fi != tf
                }) {
                    v.push(format!("fracture {fi} edge {e}: twin fracture does not match trace {t}"));
                }
                let ga = [fm.vertices[edge.v[0]].g, fm.vertices[edge.v[1]].g];
                let tm = &mesh.fractures[tf];
                let gb = [tm.vertices[tw.v[0]].g, tm.vertices[tw.v[1]].g];
                let same = (ga[0] - gb[0]).norm().max((ga[1] - gb[1]).norm());
                let flip = (ga[0] - gb[1]).norm().max((ga[1] - gb[0]).norm());
                if same.min(flip) > tol {
                    v.push(format!(
                        "fracture {fi} edge {e}: twin ({tf}, {te}) maps to a different 3D segment"
                    ));
                }
            } else if edge.twin.is_some() {
                v.push(format!("fracture {fi} edge {e}: twin on a non-trace edge"));
            }
        }

        let total = mesh.total_area(fi);
        if (total - fm.area).abs() > 1e-10 * fm.area {
            v.push(format!(
                "fracture {fi}: cell areas sum to {total}, fracture area {}",
                fm.area
            ));
        }
    }

    // trace coverage on both fractures
    for (t, tr) in mesh.traces.iter().enumerate() {
        let len = tr.segment.length();
        for &fi in &tr.fractures {
            let fm = &mesh.fractures[fi];
            let covered: f64 = fm
                .alive_edges()
                .filter(|&e| fm.edges[e].trace == Some(t))
                .map(|e| fm.edge_length(e))
                .sum();
            if (covered - len).abs() > 1e-9 * len.max(fm.boundary.diameter()) {
                v.push(format!(
                    "trace {t}: edges on fracture {fi} cover length {covered}, trace length {len}"
                ));
            }
        }
    }
    AuditReport { violations: v }
}
