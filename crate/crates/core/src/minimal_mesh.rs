//! Initial conforming mesh: each fracture is cut along its traces until
//! every trace lies on cell edges.
//!
//! Leaves of the cut tree are the live cells of the mesh. A trace cuts a leaf
//! only when the trace segment itself crosses the leaf interior; the cut then
//! follows the full supporting line of the trace across that leaf, which
//! extends the trace up to the leaf boundary beyond interior tips.

use nalgebra::{Point2, Vector2};

use crate::dfn::Dfn;
use crate::geometry::{cross, intersect_coplanar_line, Polygon2, Segment2, TOL_GEOM};
use crate::mesh::{ChordEnd, ConformingMesh, MeshError};

fn boundary_distance(poly: &Polygon2, p: &Point2<f64>) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = poly.edge(i);
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (a + d * t - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Traces with both endpoints on the fracture boundary first, then the
/// rest; each group by descending length, ties by id.
pub fn order_traces(boundary: &Polygon2, traces: &[(usize, Segment2)]) -> Vec<usize> {
    let tol = TOL_GEOM * boundary.diameter();
    let mut keyed: Vec<(bool, f64, usize)> = traces
        .iter()
        .map(|(id, s)| {
            let crossing =
                boundary_distance(boundary, &s.a) <= tol && boundary_distance(boundary, &s.b) <= tol;
            (!crossing, s.length(), *id)
        })
        .collect();
    keyed.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(y.1.total_cmp(&x.1))
            .then(x.2.cmp(&y.2))
    });
    keyed.into_iter().map(|k| k.2).collect()
}

/// Chord ends for the line `point + λ·dir` across cell `c`, or `None` if the
/// line does not cross the cell interior within `[lo, hi]` in `λ`.
fn chord_across(
    mesh: &ConformingMesh,
    frac: usize,
    c: usize,
    point: &Point2<f64>,
    dir: &Vector2<f64>,
    range: Option<(f64, f64)>,
) -> Option<[ChordEnd; 2]> {
    let fm = &mesh.fractures[frac];
    let cell = &fm.cells[c];
    let poly = fm.cell_polygon(c);
    let tol = TOL_GEOM * cell.diameter;
    let dn = dir.norm();
    let side = |p: &Point2<f64>| cross(dir, &(p - point)) / dn;
    let pts = poly.vertices();
    if !(pts.iter().any(|p| side(p) > tol) && pts.iter().any(|p| side(p) < -tol)) {
        return None;
    }
    let hits = intersect_coplanar_line(&poly, point, dir);
    if hits.len() != 2 {
        return None;
    }
    if let Some((lo, hi)) = range {
        let (l0, l1) = (hits[0].lambda.max(lo), hits[1].lambda.min(hi));
        if (l1 - l0) * dn <= tol {
            return None;
        }
    }
    let n = cell.verts.len();
    let ends = [hits[0], hits[1]].map(|h| {
        let len = fm.edge_length(cell.edges[h.edge]);
        if h.t * len <= tol {
            ChordEnd::Vertex(cell.verts[h.edge])
        } else if (1.0 - h.t) * len <= tol {
            ChordEnd::Vertex(cell.verts[(h.edge + 1) % n])
        } else {
            ChordEnd::OnEdge {
                edge: cell.edges[h.edge],
                point: h.point,
            }
        }
    });
    Some(ends)
}

/// Splits the live edge of `frac` containing `p` in its interior, unless a
/// vertex already sits at `p`.
fn insert_vertex_at(mesh: &mut ConformingMesh, frac: usize, p: &Point2<f64>) -> Result<(), MeshError> {
    let fm = &mesh.fractures[frac];
    let tol = TOL_GEOM * fm.boundary.diameter();
    let edges: Vec<usize> = fm.alive_edges().collect();
    for &e in &edges {
        let [a, b] = fm.edges[e].v;
        if (fm.vertices[a].p - p).norm() <= tol || (fm.vertices[b].p - p).norm() <= tol {
            return Ok(());
        }
    }
    for e in edges {
        let fm = &mesh.fractures[frac];
        let (a, b) = fm.edge_points(e);
        let d = b - a;
        let t = (p - a).dot(&d) / d.norm_squared();
        let off = cross(&d, &(p - a)).abs() / d.norm();
        if off <= tol && t > 0.0 && t < 1.0 {
            mesh.split_edge(frac, e, p)?;
            return Ok(());
        }
    }
    Ok(())
}

/// Builds the minimal conforming mesh of a network.
pub fn build_minimal_mesh(dfn: &Dfn) -> Result<ConformingMesh, MeshError> {
    let mut mesh = ConformingMesh::from_dfn(dfn);
    for (fi, f) in dfn.fractures.iter().enumerate() {
        let local: Vec<(usize, Segment2)> = dfn
            .traces_of(fi)
            .map(|t| (t.id, t.segment_on(fi)))
            .collect();
        for tid in order_traces(&f.polygon2d, &local) {
            let seg = local.iter().find(|(i, _)| *i == tid).expect("trace").1;
            let dir = seg.b - seg.a;
            let leaves: Vec<usize> = mesh.fractures[fi].alive_cells().collect();
            for c in leaves {
                if let Some(ends) = chord_across(&mesh, fi, c, &seg.a, &dir, Some((0.0, 1.0))) {
                    let r = mesh.cell_ref(fi, c);
                    mesh.split_cell(r, ends)?;
                }
            }
        }
        for (_, seg) in &local {
            insert_vertex_at(&mut mesh, fi, &seg.a)?;
            insert_vertex_at(&mut mesh, fi, &seg.b)?;
        }
        let tol = TOL_GEOM * f.polygon2d.diameter();
        for (tid, seg) in &local {
            let fm = &mesh.fractures[fi];
            let on: Vec<usize> = fm
                .alive_edges()
                .filter(|&e| {
                    fm.edges[e].v.iter().all(|&v| {
                        let p = fm.vertices[v].p;
                        let lam = seg.param(&p);
                        seg.distance_to_line(&p) <= tol
                            && lam >= -tol / seg.length()
                            && lam <= 1.0 + tol / seg.length()
                    })
                })
                .collect();
            for e in on {
                mesh.tag_trace_edge(fi, e, *tid);
            }
        }
    }
    link_traces(&mut mesh)?;
    Ok(mesh)
}

/// Trace-tagged edges of `frac` on trace `t` with their 3D parameter interval.
fn trace_edges(mesh: &ConformingMesh, frac: usize, t: usize) -> Vec<(usize, f64, f64)> {
    let seg = mesh.traces[t].segment;
    let fm = &mesh.fractures[frac];
    let mut out: Vec<(usize, f64, f64)> = fm
        .alive_edges()
        .filter(|&e| fm.edges[e].trace == Some(t))
        .map(|e| {
            let [a, b] = fm.edges[e].v;
            let (pa, pb) = (seg.param(&fm.vertices[a].g), seg.param(&fm.vertices[b].g));
            (e, pa.min(pb), pa.max(pb))
        })
        .collect();
    out.sort_by(|x, y| x.1.total_cmp(&y.1));
    out
}

/// Makes the vertex sets on each trace identical on both fractures and pairs
/// twin edges.
fn link_traces(mesh: &mut ConformingMesh) -> Result<(), MeshError> {
    for t in 0..mesh.traces.len() {
        let [fi, fj] = mesh.traces[t].fractures;
        let seg = mesh.traces[t].segment;
        let tol = TOL_GEOM / seg.length()
            * mesh.fractures[fi]
                .boundary
                .diameter()
                .min(mesh.fractures[fj].boundary.diameter());
        // vertex parameters along the trace, with their 3D points
        let collect = |mesh: &ConformingMesh, f: usize| {
            let fm = &mesh.fractures[f];
            let mut v: Vec<(f64, nalgebra::Point3<f64>)> = Vec::new();
            for (e, _, _) in trace_edges(mesh, f, t) {
                for &x in &fm.edges[e].v {
                    let g = fm.vertices[x].g;
                    v.push((seg.param(&g), g));
                }
            }
            v
        };
        for (src, dst) in [(fi, fj), (fj, fi)] {
            for (lam, g) in collect(mesh, src) {
                let edges = trace_edges(mesh, dst, t);
                let has_vertex = edges
                    .iter()
                    .any(|&(_, a, b)| (a - lam).abs() <= tol || (b - lam).abs() <= tol);
                if has_vertex {
                    continue;
                }
                if let Some(&(e, _, _)) = edges.iter().find(|&&(_, a, b)| a < lam && lam < b) {
                    let fm = &mesh.fractures[dst];
                    let p = fm.frame.to_local(&g);
                    let (m, _) = mesh.split_edge(dst, e, &p)?;
                    mesh.fractures[dst].vertices[m].g = g;
                }
            }
        }
        let ei = trace_edges(mesh, fi, t);
        let ej = trace_edges(mesh, fj, t);
        if ei.len() != ej.len() {
            return Err(MeshError::DegenerateChord);
        }
        for (a, b) in ei.iter().zip(&ej) {
            mesh.link_twins((fi, a.0), (fj, b.0));
        }
    }
    Ok(())
}
