//! Globally conforming polygonal meshes on a fracture network.
//!
//! Each fracture carries its own vertex, edge and cell stores in the
//! fracture frame. Edges lying on a trace are paired with a twin edge on the
//! other fracture of the trace; [`ConformingMesh::split_edge`] splits both at
//! the same 3D point, so the trace stays conforming under refinement.
//!
//! Ids are never reused: retired edges and cells stay in the stores with
//! `alive == false`.

mod audit;
mod export;

pub use audit::AuditReport;
pub use export::{write_dump, write_vtk};

use nalgebra::{Point2, Point3};
use thiserror::Error;

use crate::dfn::Dfn;
use crate::geometry::{cross, Frame3, Polygon2, Segment3, TOL_GEOM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("stale cell reference {0:?}")]
    StaleRef(CellRef),
    #[error("edge {edge} of fracture {frac} is not alive")]
    DeadEdge { frac: usize, edge: usize },
    #[error("point is not strictly inside edge {edge} (t = {t:e}, offset = {offset:e})")]
    PointOffEdge { edge: usize, t: f64, offset: f64 },
    #[error("degenerate chord")]
    DegenerateChord,
    #[error("child area {child:e} below threshold for parent area {parent:e}")]
    ChildTooThin { child: f64, parent: f64 },
}

pub type Result<T> = std::result::Result<T, MeshError>;

/// Largest distance from the edge line, relative to the edge length, for a
/// point to count as lying on the edge.
const OFF_EDGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub p: Point2<f64>,
    /// 3D image; shared exactly between twin vertices on a trace.
    pub g: Point3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub v: [usize; 2],
    /// `cells[0]` traverses the edge as `v[0] → v[1]` (edge on its
    /// counter-clockwise boundary), `cells[1]` as `v[1] → v[0]`.
    pub cells: [Option<usize>; 2],
    /// Index of the fracture boundary edge this edge lies on.
    pub boundary: Option<usize>,
    pub trace: Option<usize>,
    /// `(fracture, edge)` of the twin on the other fracture of the trace.
    pub twin: Option<(usize, usize)>,
    pub alive: bool,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.boundary.is_some()
    }

    pub fn other_cell(&self, c: usize) -> Option<usize> {
        match self.cells {
            [Some(a), b] if a == c => b,
            [a, Some(b)] if b == c => a,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Counter-clockwise vertex loop; aligned vertices allowed.
    pub verts: Vec<usize>,
    /// `edges[k]` joins `verts[k]` and `verts[k + 1]`.
    pub edges: Vec<usize>,
    pub alive: bool,
    pub generation: u64,
    pub parent: Option<usize>,
    pub centroid: Point2<f64>,
    pub area: f64,
    pub diameter: f64,
    pub aspect_ratio: f64,
}

/// Reference to a cell that detects later retirement of the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRef {
    pub frac: usize,
    pub cell: usize,
    pub generation: u64,
}

#[derive(Debug, Clone)]
pub struct FractureMesh {
    pub frame: Frame3,
    pub boundary: Polygon2,
    pub area: f64,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
}

impl FractureMesh {
    pub fn alive_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.alive)
            .map(|(i, _)| i)
    }

    pub fn alive_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.alive)
            .map(|(i, _)| i)
    }

    pub fn cell_points(&self, c: usize) -> Vec<Point2<f64>> {
        self.cells[c].verts.iter().map(|&v| self.vertices[v].p).collect()
    }

    pub fn cell_polygon(&self, c: usize) -> Polygon2 {
        Polygon2::new_unchecked(self.cell_points(c))
    }

    pub fn edge_points(&self, e: usize) -> (Point2<f64>, Point2<f64>) {
        let [a, b] = self.edges[e].v;
        (self.vertices[a].p, self.vertices[b].p)
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let (a, b) = self.edge_points(e);
        (b - a).norm()
    }

    /// Whether cell `c` traverses edge `e` in its stored direction.
    pub fn edge_sign(&self, c: usize, e: usize) -> f64 {
        if self.edges[e].cells[0] == Some(c) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeshTrace {
    pub fractures: [usize; 2],
    pub segment: Segment3,
}

#[derive(Debug, Clone)]
pub struct ConformingMesh {
    pub fractures: Vec<FractureMesh>,
    pub traces: Vec<MeshTrace>,
    generation: u64,
}

/// Chord endpoint for [`ConformingMesh::split_cell`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChordEnd {
    Vertex(usize),
    /// A point strictly inside an edge of the cell.
    OnEdge { edge: usize, point: Point2<f64> },
}

pub(crate) fn cell_geometry(points: &[Point2<f64>]) -> (Point2<f64>, f64, f64, f64) {
    let poly = Polygon2::new_unchecked(points.to_vec());
    let (c, a) = poly.centroid_area();
    (c, a, poly.diameter(), poly.aspect_ratio())
}

impl ConformingMesh {
    /// One cell per fracture, no traces tagged.
    pub fn from_dfn(dfn: &Dfn) -> Self {
        let fractures = dfn
            .fractures
            .iter()
            .map(|f| {
                let n = f.polygon3d.len();
                let vertices: Vec<Vertex> = f
                    .polygon2d
                    .vertices()
                    .iter()
                    .zip(&f.polygon3d)
                    .map(|(p, g)| Vertex { p: *p, g: *g })
                    .collect();
                let edges = (0..n)
                    .map(|i| Edge {
                        v: [i, (i + 1) % n],
                        cells: [Some(0), None],
                        boundary: Some(i),
                        trace: None,
                        twin: None,
                        alive: true,
                    })
                    .collect();
                let (centroid, area, diameter, aspect_ratio) =
                    cell_geometry(f.polygon2d.vertices());
                FractureMesh {
                    frame: f.frame,
                    boundary: f.polygon2d.clone(),
                    area,
                    vertices,
                    edges,
                    cells: vec![Cell {
                        verts: (0..n).collect(),
                        edges: (0..n).collect(),
                        alive: true,
                        generation: 0,
                        parent: None,
                        centroid,
                        area,
                        diameter,
                        aspect_ratio,
                    }],
                }
            })
            .collect();
        let traces = dfn
            .traces
            .iter()
            .map(|t| MeshTrace {
                fractures: t.fractures,
                segment: t.segment3d,
            })
            .collect();
        Self {
            fractures,
            traces,
            generation: 0,
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn num_cells(&self) -> usize {
        self.fractures.iter().map(|f| f.alive_cells().count()).sum()
    }

    /// All live cells as `(fracture, cell)`, fracture-major, ascending ids.
    pub fn cell_list(&self) -> Vec<(usize, usize)> {
        self.fractures
            .iter()
            .enumerate()
            .flat_map(|(i, f)| f.alive_cells().map(move |c| (i, c)))
            .collect()
    }

    pub fn cell_ref(&self, frac: usize, cell: usize) -> CellRef {
        CellRef {
            frac,
            cell,
            generation: self.fractures[frac].cells[cell].generation,
        }
    }

    pub fn check(&self, r: CellRef) -> Result<&Cell> {
        self.fractures
            .get(r.frac)
            .and_then(|f| f.cells.get(r.cell))
            .filter(|c| c.alive && c.generation == r.generation)
            .ok_or(MeshError::StaleRef(r))
    }

    /// Parameter of `point` along edge `e` and its distance from the edge line.
    fn edge_param(&self, frac: usize, e: usize, point: &Point2<f64>) -> (f64, f64) {
        let fm = &self.fractures[frac];
        let (a, b) = fm.edge_points(e);
        let d = b - a;
        let l2 = d.norm_squared();
        let t = (point - a).dot(&d) / l2;
        let offset = cross(&d, &(point - a)).abs() / l2.sqrt();
        (t, offset)
    }

    fn validate_split_point(&self, frac: usize, e: usize, point: &Point2<f64>) -> Result<f64> {
        let fm = &self.fractures[frac];
        if !fm.edges.get(e).is_some_and(|x| x.alive) {
            return Err(MeshError::DeadEdge { frac, edge: e });
        }
        let (t, offset) = self.edge_param(frac, e, point);
        let len = fm.edge_length(e);
        if !(t > TOL_GEOM && t < 1.0 - TOL_GEOM) || offset > OFF_EDGE_TOL * len {
            return Err(MeshError::PointOffEdge { edge: e, t, offset });
        }
        Ok(t)
    }

    /// Splits edge `e` of fracture `frac` at `point` (projected onto the
    /// edge). Returns the new vertex and the two sub-edges, ordered from
    /// `v[0]`. A trace edge with a twin is split on the twin as well.
    pub fn split_edge(
        &mut self,
        frac: usize,
        e: usize,
        point: &Point2<f64>,
    ) -> Result<(usize, [usize; 2])> {
        let t = self.validate_split_point(frac, e, point)?;
        let twin = self.fractures[frac].edges[e].twin;
        let fm = &self.fractures[frac];
        let [a, b] = fm.edges[e].v;
        let g = fm.vertices[a].g + (fm.vertices[b].g - fm.vertices[a].g) * t;
        let out = self.split_edge_raw(frac, e, t, g);
        if let Some((tf, te)) = twin {
            let tm = &self.fractures[tf];
            let [ta, tb] = tm.edges[te].v;
            let seg = Segment3 {
                a: tm.vertices[ta].g,
                b: tm.vertices[tb].g,
            };
            let tt = seg.param(&g);
            let (_, tsub) = self.split_edge_raw(tf, te, tt, g);
            // pair sub-edges by shared 3D endpoint
            let same_dir = (self.fractures[tf].vertices[ta].g - self.fractures[frac].vertices[a].g)
                .norm()
                < (self.fractures[tf].vertices[tb].g - self.fractures[frac].vertices[a].g).norm();
            let pairs = if same_dir {
                [(out.1[0], tsub[0]), (out.1[1], tsub[1])]
            } else {
                [(out.1[0], tsub[1]), (out.1[1], tsub[0])]
            };
            for (x, y) in pairs {
                self.fractures[frac].edges[x].twin = Some((tf, y));
                self.fractures[tf].edges[y].twin = Some((frac, x));
            }
        }
        self.generation += 1;
        Ok(out)
    }

    /// Splits without validation or twin handling.
    fn split_edge_raw(&mut self, frac: usize, e: usize, t: f64, g: Point3<f64>) -> (usize, [usize; 2]) {
        let fm = &mut self.fractures[frac];
        let old = fm.edges[e].clone();
        let [a, b] = old.v;
        let p = fm.vertices[a].p + (fm.vertices[b].p - fm.vertices[a].p) * t;
        fm.vertices.push(Vertex { p, g });
        let m = fm.vertices.len() - 1;
        fm.edges[e].alive = false;
        let mk = |v: [usize; 2]| Edge {
            v,
            cells: old.cells,
            boundary: old.boundary,
            trace: old.trace,
            twin: None,
            alive: true,
        };
        fm.edges.push(mk([a, m]));
        let e1 = fm.edges.len() - 1;
        fm.edges.push(mk([m, b]));
        let e2 = fm.edges.len() - 1;
        for c in old.cells.into_iter().flatten() {
            let cell = &mut fm.cells[c];
            let k = cell.edges.iter().position(|&x| x == e).expect("edge in cell loop");
            let forward = cell.verts[k] == a;
            let (first, second) = if forward { (e1, e2) } else { (e2, e1) };
            cell.edges[k] = first;
            cell.edges.insert(k + 1, second);
            cell.verts.insert(k + 1, m);
            // the new vertex sits on the edge only up to rounding
            let pts: Vec<Point2<f64>> = cell.verts.iter().map(|&v| fm.vertices[v].p).collect();
            (cell.centroid, cell.area, cell.diameter, cell.aspect_ratio) = cell_geometry(&pts);
        }
        (m, [e1, e2])
    }

    /// Splits a live cell along a chord between two boundary points.
    /// Validation happens before any mutation.
    pub fn split_cell(&mut self, r: CellRef, ends: [ChordEnd; 2]) -> Result<(CellRef, CellRef)> {
        let cell = self.check(r)?.clone();
        let frac = r.frac;
        let fm = &self.fractures[frac];

        // augmented loop: (point, slot) with chord ends inserted
        let mut slots: [Option<usize>; 2] = [None, None];
        let mut aug: Vec<Point2<f64>> = Vec::with_capacity(cell.verts.len() + 2);
        let mut edge_hits: Vec<(usize, usize, f64)> = Vec::new(); // (k, end index, t)
        for (i, end) in ends.iter().enumerate() {
            match *end {
                ChordEnd::Vertex(v) => {
                    if !cell.verts.contains(&v) {
                        return Err(MeshError::DegenerateChord);
                    }
                }
                ChordEnd::OnEdge { edge, point } => {
                    let k = cell
                        .edges
                        .iter()
                        .position(|&x| x == edge)
                        .ok_or(MeshError::DegenerateChord)?;
                    let t = self.validate_split_point(frac, edge, &point)?;
                    // parameter along the cell's traversal direction
                    let forward = fm.edges[edge].v[0] == cell.verts[k];
                    edge_hits.push((k, i, if forward { t } else { 1.0 - t }));
                }
            }
        }
        if edge_hits.len() == 2 && edge_hits[0].0 == edge_hits[1].0 {
            return Err(MeshError::DegenerateChord);
        }
        for (k, &v) in cell.verts.iter().enumerate() {
            aug.push(fm.vertices[v].p);
            for (i, end) in ends.iter().enumerate() {
                if *end == ChordEnd::Vertex(v) {
                    if slots[i].is_some() {
                        return Err(MeshError::DegenerateChord);
                    }
                    slots[i] = Some(aug.len() - 1);
                }
            }
            for &(hk, i, _) in &edge_hits {
                if hk == k {
                    if let ChordEnd::OnEdge { edge, point } = ends[i] {
                        let (t, _) = self.edge_param(frac, edge, &point);
                        let (a, b) = fm.edge_points(edge);
                        aug.push(a + (b - a) * t);
                        slots[i] = Some(aug.len() - 1);
                    }
                }
            }
        }
        let (ia, ib) = match slots {
            [Some(a), Some(b)] if a != b => (a.min(b), a.max(b)),
            _ => return Err(MeshError::DegenerateChord),
        };
        let n = aug.len();
        if ib - ia == 1 || (ia == 0 && ib == n - 1) {
            return Err(MeshError::DegenerateChord);
        }
        let l1: Vec<Point2<f64>> = aug[ia..=ib].to_vec();
        let l2: Vec<Point2<f64>> = aug[ib..].iter().chain(&aug[..=ia]).copied().collect();
        let chord = aug[ib] - aug[ia];
        for l in [&l1, &l2] {
            let a = Polygon2::new_unchecked(l.clone()).signed_area();
            if a < 1e-12 * cell.area {
                let flat = l
                    .iter()
                    .all(|p| cross(&chord, &(p - aug[ia])).abs() / chord.norm() <= TOL_GEOM * cell.diameter);
                return Err(if flat {
                    MeshError::DegenerateChord
                } else {
                    MeshError::ChildTooThin {
                        child: a,
                        parent: cell.area,
                    }
                });
            }
        }

        // mutation
        let mut vids = [0usize; 2];
        for (i, end) in ends.iter().enumerate() {
            vids[i] = match *end {
                ChordEnd::Vertex(v) => v,
                ChordEnd::OnEdge { edge, point } => self.split_edge(frac, edge, &point)?.0,
            };
        }
        let fm = &mut self.fractures[frac];
        let cell = fm.cells[r.cell].clone();
        let pa = cell.verts.iter().position(|&v| v == vids[0]).expect("chord end in loop");
        let pb = cell.verts.iter().position(|&v| v == vids[1]).expect("chord end in loop");
        let (i, j) = (pa.min(pb), pa.max(pb));
        let (vi, vj) = (cell.verts[i], cell.verts[j]);
        let c1 = fm.cells.len();
        let c2 = c1 + 1;
        fm.edges.push(Edge {
            v: [vi, vj],
            cells: [Some(c2), Some(c1)],
            boundary: None,
            trace: None,
            twin: None,
            alive: true,
        });
        let chord_edge = fm.edges.len() - 1;

        let verts1: Vec<usize> = cell.verts[i..=j].to_vec();
        let mut edges1: Vec<usize> = cell.edges[i..j].to_vec();
        edges1.push(chord_edge);
        let verts2: Vec<usize> = cell.verts[j..].iter().chain(&cell.verts[..=i]).copied().collect();
        let mut edges2: Vec<usize> = cell.edges[j..].iter().chain(&cell.edges[..i]).copied().collect();
        edges2.push(chord_edge);

        self.generation += 1;
        let gen = self.generation;
        let fm = &mut self.fractures[frac];
        for (cid, verts, edges) in [(c1, verts1, edges1), (c2, verts2, edges2)] {
            for &e in &edges {
                if e == chord_edge {
                    continue;
                }
                for s in fm.edges[e].cells.iter_mut() {
                    if *s == Some(r.cell) {
                        *s = Some(cid);
                    }
                }
            }
            let pts: Vec<Point2<f64>> = verts.iter().map(|&v| fm.vertices[v].p).collect();
            let (centroid, area, diameter, aspect_ratio) = cell_geometry(&pts);
            fm.cells.push(Cell {
                verts,
                edges,
                alive: true,
                generation: gen,
                parent: Some(r.cell),
                centroid,
                area,
                diameter,
                aspect_ratio,
            });
        }
        fm.cells[r.cell].alive = false;
        Ok((
            CellRef {
                frac,
                cell: c1,
                generation: gen,
            },
            CellRef {
                frac,
                cell: c2,
                generation: gen,
            },
        ))
    }

    /// Tags edge `e` as lying on trace `trace` (no twin yet).
    pub fn tag_trace_edge(&mut self, frac: usize, e: usize, trace: usize) {
        self.fractures[frac].edges[e].trace = Some(trace);
    }

    pub fn link_twins(&mut self, (fa, ea): (usize, usize), (fb, eb): (usize, usize)) {
        self.fractures[fa].edges[ea].twin = Some((fb, eb));
        self.fractures[fb].edges[eb].twin = Some((fa, ea));
    }

    pub fn total_area(&self, frac: usize) -> f64 {
        let fm = &self.fractures[frac];
        fm.alive_cells().map(|c| fm.cells[c].area).sum()
    }

    pub fn audit(&self) -> AuditReport {
        audit::audit(self)
    }

    /// Min, mean and max cell aspect ratio over the whole mesh.
    pub fn aspect_ratio_stats(&self) -> (f64, f64, f64) {
        let mut n = 0usize;
        let (mut lo, mut sum, mut hi) = (f64::INFINITY, 0.0, 0.0f64);
        for f in &self.fractures {
            for c in f.alive_cells() {
                let ar = f.cells[c].aspect_ratio;
                lo = lo.min(ar);
                hi = hi.max(ar);
                sum += ar;
                n += 1;
            }
        }
        (lo, sum / n.max(1) as f64, hi)
    }

    /// Test hook for fault injection in audits.
    #[doc(hidden)]
    pub fn fractures_mut(&mut self) -> &mut Vec<FractureMesh> {
        &mut self.fractures
    }
}
