//! Dörfler marking and single-chord refinement of convex cells.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Point2, Vector2};

use crate::geometry::{canonical_direction, cross, intersect_coplanar_line, major_eigenvector, Polygon2, TOL_GEOM};
use crate::mesh::{CellRef, ChordEnd, ConformingMesh, MeshError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    MaxMom,
    TrDir,
    MaxPnt,
    MaxEdg,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::MaxMom, Strategy::TrDir, Strategy::MaxPnt, Strategy::MaxEdg];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::MaxMom => "maxmom",
            Strategy::TrDir => "trdir",
            Strategy::MaxPnt => "maxpnt",
            Strategy::MaxEdg => "maxedg",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "maxmom" => Ok(Strategy::MaxMom),
            "trdir" => Ok(Strategy::TrDir),
            "maxpnt" => Ok(Strategy::MaxPnt),
            "maxedg" => Ok(Strategy::MaxEdg),
            _ => Err(format!("unknown strategy '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementConfig {
    pub strategy: Strategy,
    /// Dörfler fraction, in `(0, 1)`.
    pub c: f64,
    /// In `(0, 0.5)`.
    pub collapse_toll: f64,
    pub max_ar: f64,
    pub max_np: usize,
    /// MaxPnt falls back to MaxMom when `|X_G − X_C| < center_tol · h_E`.
    pub center_tol: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::MaxMom,
            c: 0.5,
            collapse_toll: 0.2,
            max_ar: 10.0,
            max_np: 12,
            center_tol: 1e-3,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(format!("C must lie in (0, 1), got {}", self.c));
        }
        if !(self.collapse_toll > 0.0 && self.collapse_toll < 0.5) {
            return Err(format!("CollapseToll must lie in (0, 0.5), got {}", self.collapse_toll));
        }
        if !(self.max_ar > 1.0) {
            return Err(format!("MaxAR must exceed 1, got {}", self.max_ar));
        }
        if self.max_np < 4 {
            return Err(format!("MaxNP must be at least 4, got {}", self.max_np));
        }
        Ok(())
    }
}

/// Indices of the shortest prefix of `est2`, sorted descending (ties by
/// index), whose sum reaches `c` times the total.
pub fn mark(est2: &[f64], c: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..est2.len()).collect();
    order.sort_by(|&a, &b| est2[b].total_cmp(&est2[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&i| est2[i]).sum();
    let threshold = c * total;
    let mut acc = 0.0;
    let mut n = 0;
    while n < order.len() && acc < threshold {
        acc += est2[order[n]];
        n += 1;
    }
    order.truncate(n);
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutPlan {
    pub cell: CellRef,
    /// Unit vector, canonical sign.
    pub direction: Vector2<f64>,
    /// Strategy actually used after the AR override and fallbacks.
    pub strategy: Strategy,
    pub through: Point2<f64>,
}

fn max_mom_direction(poly: &Polygon2) -> Vector2<f64> {
    // axis of the largest inertia eigenvalue is orthogonal to the long axis
    major_eigenvector(&poly.inertia_tensor()).map_or(Vector2::new(0.0, 1.0), canonical_direction)
}

/// Boundary edges of the loop merged over aligned vertices, as
/// `(start point, end point)`.
fn merged_edges(points: &[Point2<f64>]) -> Vec<(Point2<f64>, Point2<f64>)> {
    let n = points.len();
    let aligned = |i: usize| {
        let prev = points[i] - points[(i + n - 1) % n];
        let next = points[(i + 1) % n] - points[i];
        cross(&prev, &next).abs() <= TOL_GEOM * prev.norm() * next.norm()
    };
    let Some(start) = (0..n).find(|&i| !aligned(i)) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut a = start;
    for s in 1..=n {
        let i = (start + s) % n;
        if !aligned(i) {
            out.push((points[a], points[i]));
            a = i;
        }
    }
    out
}

/// Cut direction for a live cell.
pub fn choose_direction(mesh: &ConformingMesh, r: CellRef, cfg: &RefinementConfig) -> Result<CutPlan, MeshError> {
    let cell = mesh.check(r)?;
    let fm = &mesh.fractures[r.frac];
    let points = fm.cell_points(r.cell);
    let poly = Polygon2::new_unchecked(points.clone());
    let through = cell.centroid;
    let plan = |strategy, d: Vector2<f64>| CutPlan {
        cell: r,
        direction: canonical_direction(d),
        strategy,
        through,
    };
    let fallback = plan(Strategy::MaxMom, max_mom_direction(&poly));
    if cell.aspect_ratio > cfg.max_ar {
        return Ok(fallback);
    }
    Ok(match cfg.strategy {
        Strategy::MaxMom => fallback,
        Strategy::TrDir => {
            let mut ids: Vec<usize> = cell.edges.iter().filter_map(|&e| fm.edges[e].trace).collect();
            ids.sort_unstable();
            ids.dedup();
            match ids.as_slice() {
                [t] => {
                    let s = mesh.traces[*t].segment;
                    plan(Strategy::TrDir, fm.frame.direction_to_local(&(s.b - s.a)))
                }
                _ => fallback,
            }
        }
        Strategy::MaxPnt => {
            let d = poly.vertex_mean() - through;
            if points.len() >= cfg.max_np && d.norm() >= cfg.center_tol * cell.diameter {
                plan(Strategy::MaxPnt, d)
            } else {
                fallback
            }
        }
        Strategy::MaxEdg => {
            let longest = merged_edges(&points)
                .into_iter()
                .map(|(a, b)| ((b - a).norm(), a, b))
                .fold(None, |best: Option<(f64, Point2<f64>, Point2<f64>)>, x| match best {
                    Some(b) if b.0 >= x.0 => Some(b),
                    _ => Some(x),
                });
            match longest {
                Some((_, a, b)) => plan(Strategy::MaxEdg, nalgebra::center(&a, &b) - through),
                None => fallback,
            }
        }
    })
}

/// How a cut was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutFallback {
    None,
    /// The planned cut was degenerate; MaxMom was used.
    MaxMom,
    /// MaxMom was degenerate too; the cut was taken without snapping.
    Uncollapsed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutOutcome {
    pub children: (CellRef, CellRef),
    pub strategy: Strategy,
    pub fallback: CutFallback,
}

/// Chord ends of the line through `through` along `dir`. With `collapse`,
/// intersections closer than `toll` (relative to the host edge) to an edge
/// end snap to it; otherwise they are pushed to exactly that distance.
fn chord_ends(
    mesh: &ConformingMesh,
    r: CellRef,
    through: &Point2<f64>,
    dir: &Vector2<f64>,
    toll: f64,
    collapse: bool,
) -> Result<[ChordEnd; 2], MeshError> {
    let fm = &mesh.fractures[r.frac];
    let cell = &fm.cells[r.cell];
    let poly = fm.cell_polygon(r.cell);
    let hits = intersect_coplanar_line(&poly, through, dir);
    if hits.len() != 2 {
        return Err(MeshError::DegenerateChord);
    }
    let n = cell.verts.len();
    let mut ends = [ChordEnd::Vertex(0); 2];
    for (end, h) in ends.iter_mut().zip(&hits) {
        let (i, j) = (h.edge, (h.edge + 1) % n);
        let (a, b) = (fm.vertices[cell.verts[i]].p, fm.vertices[cell.verts[j]].p);
        *end = if h.t <= 0.0 {
            ChordEnd::Vertex(cell.verts[i])
        } else if h.t >= 1.0 {
            ChordEnd::Vertex(cell.verts[j])
        } else if collapse && h.t < toll {
            ChordEnd::Vertex(cell.verts[i])
        } else if collapse && h.t > 1.0 - toll {
            ChordEnd::Vertex(cell.verts[j])
        } else {
            let t = h.t.clamp(toll, 1.0 - toll);
            ChordEnd::OnEdge {
                edge: cell.edges[i],
                point: a + (b - a) * t,
            }
        };
    }
    Ok(ends)
}

fn is_degenerate(e: &MeshError) -> bool {
    matches!(
        e,
        MeshError::DegenerateChord | MeshError::ChildTooThin { .. } | MeshError::PointOffEdge { .. }
    )
}

/// Splits one live cell in two.
pub fn refine_cell(mesh: &mut ConformingMesh, r: CellRef, cfg: &RefinementConfig) -> Result<CutOutcome, MeshError> {
    let plan = choose_direction(mesh, r, cfg)?;
    let toll = cfg.collapse_toll;
    let attempt = |mesh: &mut ConformingMesh, dir: &Vector2<f64>, collapse: bool| {
        chord_ends(mesh, r, &plan.through, dir, toll, collapse).and_then(|ends| mesh.split_cell(r, ends))
    };
    match attempt(mesh, &plan.direction, true) {
        Ok(children) => {
            return Ok(CutOutcome {
                children,
                strategy: plan.strategy,
                fallback: CutFallback::None,
            })
        }
        Err(e) if !is_degenerate(&e) => return Err(e),
        Err(_) => {}
    }
    let mm = max_mom_direction(&mesh.fractures[r.frac].cell_polygon(r.cell));
    if plan.strategy != Strategy::MaxMom {
        match attempt(mesh, &mm, true) {
            Ok(children) => {
                return Ok(CutOutcome {
                    children,
                    strategy: Strategy::MaxMom,
                    fallback: CutFallback::MaxMom,
                })
            }
            Err(e) if !is_degenerate(&e) => return Err(e),
            Err(_) => {}
        }
    }
    attempt(mesh, &mm, false).map(|children| CutOutcome {
        children,
        strategy: Strategy::MaxMom,
        fallback: CutFallback::Uncollapsed,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineStats {
    pub cells_cut: usize,
    /// Cuts per effective strategy, indexed as [`Strategy::ALL`].
    pub effective: [usize; 4],
    pub maxmom_fallbacks: usize,
    pub uncollapsed_fallbacks: usize,
    /// `(min, mean, max)` aspect ratio per fracture after refinement.
    pub aspect_ratio: Vec<(f64, f64, f64)>,
}

/// Cuts every marked cell once, in `(fracture, cell)` order.
pub fn refine(
    mesh: &mut ConformingMesh,
    marked: &[(usize, usize)],
    cfg: &RefinementConfig,
) -> Result<RefineStats, MeshError> {
    let mut refs: Vec<CellRef> = marked.iter().map(|&(f, c)| mesh.cell_ref(f, c)).collect();
    refs.sort_by_key(|r| (r.frac, r.cell));
    refs.dedup();
    let mut stats = RefineStats::default();
    for r in refs {
        let out = refine_cell(mesh, r, cfg)?;
        stats.cells_cut += 1;
        stats.effective[out.strategy.slot()] += 1;
        match out.fallback {
            CutFallback::None => {}
            CutFallback::MaxMom => stats.maxmom_fallbacks += 1,
            CutFallback::Uncollapsed => stats.uncollapsed_fallbacks += 1,
        }
    }
    stats.aspect_ratio = mesh
        .fractures
        .iter()
        .map(|f| {
            let ars: Vec<f64> = f.alive_cells().map(|c| f.cells[c].aspect_ratio).collect();
            let lo = ars.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ars.iter().copied().fold(0.0, f64::max);
            (lo, ars.iter().sum::<f64>() / ars.len().max(1) as f64, hi)
        })
        .collect();
    Ok(stats)
}
