//! Discrete fracture network data model.
//!
//! A [`Dfn`] is a set of planar convex fractures with scalar transmissivities,
//! the traces where pairs of fractures intersect, and boundary conditions on
//! every fracture edge. A [`ProblemSpec`] adds forcing terms and, for
//! verification problems, the exact hydraulic head.

mod builtin;
mod expr;
mod io;
mod jet;
mod synthetic;

pub use builtin::{builtin_problem, native_exact};
pub use expr::{Expr, Func, ParseExprError, Var};
pub use io::{load_dfn, parse_dfn, write_dfn};
pub use jet::{Jet, Scalar};
pub use synthetic::{generate_synthetic_dfn, SyntheticConfig};

use nalgebra::{Point2, Point3, Vector2};
use thiserror::Error;

use crate::geometry::{
    build_frame, intersect_fractures, GeometryError, Polygon2, Segment2, Segment3, TOL_GEOM,
};

#[derive(Debug, Error)]
pub enum DfnError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unknown problem '{0}'")]
    UnknownProblem(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DfnError>;

#[derive(Debug, Clone)]
pub struct Fracture {
    /// User-facing identifier; the position in [`Dfn::fractures`] is the index.
    pub id: usize,
    pub polygon3d: Vec<Point3<f64>>,
    pub frame: crate::geometry::Frame3,
    pub polygon2d: Polygon2,
    pub transmissivity: f64,
}

impl Fracture {
    pub fn new(id: usize, polygon3d: Vec<Point3<f64>>, transmissivity: f64) -> Result<Self> {
        if !(transmissivity > 0.0) || !transmissivity.is_finite() {
            return Err(DfnError::Validation(format!(
                "fracture {id}: transmissivity must be positive, got {transmissivity}"
            )));
        }
        let frame = build_frame(&polygon3d)?;
        let polygon2d = Polygon2::new(polygon3d.iter().map(|p| frame.to_local(p)).collect())
            .map_err(|e| DfnError::Validation(format!("fracture {id}: {e}")))?;
        Ok(Self {
            id,
            polygon3d,
            frame,
            polygon2d,
            transmissivity,
        })
    }

    pub fn area(&self) -> f64 {
        self.polygon2d.area()
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub id: usize,
    /// Fracture indices, `fractures[0] < fractures[1]`.
    pub fractures: [usize; 2],
    pub segment3d: Segment3,
    /// The same segment in the frame of each fracture.
    pub segment2d: [Segment2; 2],
}

impl Trace {
    /// Segment in the frame of fracture `frac`, which must be incident.
    pub fn segment_on(&self, frac: usize) -> Segment2 {
        if self.fractures[0] == frac {
            self.segment2d[0]
        } else {
            debug_assert_eq!(self.fractures[1], frac);
            self.segment2d[1]
        }
    }

    pub fn other(&self, frac: usize) -> usize {
        if self.fractures[0] == frac {
            self.fractures[1]
        } else {
            self.fractures[0]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

/// Boundary condition on one fracture edge: prescribed head (Dirichlet) or
/// prescribed outward flux `K ∂h/∂n` (Neumann).
#[derive(Debug, Clone)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub value: Expr,
}

impl BoundaryCondition {
    pub fn dirichlet(value: Expr) -> Self {
        Self {
            kind: BcKind::Dirichlet,
            value,
        }
    }

    pub fn homogeneous_neumann() -> Self {
        Self {
            kind: BcKind::Neumann,
            value: Expr::constant(0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dfn {
    pub fractures: Vec<Fracture>,
    pub traces: Vec<Trace>,
    /// `boundary[i][e]` is the condition on edge `e` of fracture `i`.
    pub boundary: Vec<Vec<BoundaryCondition>>,
}

impl Dfn {
    /// Computes all traces and validates the network.
    pub fn new(fractures: Vec<Fracture>, boundary: Vec<Vec<BoundaryCondition>>) -> Result<Self> {
        let traces = compute_traces(&fractures)?;
        let dfn = Self {
            fractures,
            traces,
            boundary,
        };
        dfn.validate()?;
        Ok(dfn)
    }

    /// Traces incident to fracture `i`.
    pub fn traces_of(&self, i: usize) -> impl Iterator<Item = &Trace> {
        self.traces
            .iter()
            .filter(move |t| t.fractures[0] == i || t.fractures[1] == i)
    }

    fn validate(&self) -> Result<()> {
        if self.boundary.len() != self.fractures.len() {
            return Err(DfnError::Validation("boundary list length mismatch".into()));
        }
        for (i, f) in self.fractures.iter().enumerate() {
            if self.boundary[i].len() != f.polygon3d.len() {
                return Err(DfnError::Validation(format!(
                    "fracture {}: {} boundary conditions for {} edges",
                    f.id,
                    self.boundary[i].len(),
                    f.polygon3d.len()
                )));
            }
        }
        // Each connected component needs a Dirichlet edge, otherwise the
        // head is only defined up to a constant there.
        let comps = self.components();
        let ncomp = comps.iter().copied().max().map_or(0, |m| m + 1);
        let mut has_dir = vec![false; ncomp];
        for (i, bcs) in self.boundary.iter().enumerate() {
            if bcs.iter().any(|b| b.kind == BcKind::Dirichlet) {
                has_dir[comps[i]] = true;
            }
        }
        if self.fractures.is_empty() || has_dir.iter().any(|d| !d) {
            return Err(DfnError::Validation(
                "empty Dirichlet set on a connected component of the network".into(),
            ));
        }
        Ok(())
    }

    /// Connected-component label of every fracture.
    pub fn components(&self) -> Vec<usize> {
        let n = self.fractures.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.traces {
            let a = find(&mut parent, t.fractures[0]);
            let b = find(&mut parent, t.fractures[1]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut out = vec![0; n];
        for i in 0..n {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = next;
                next += 1;
            }
            out[i] = label[r];
        }
        out
    }
}

fn compute_traces(fractures: &[Fracture]) -> Result<Vec<Trace>> {
    let mut traces = Vec::new();
    for i in 0..fractures.len() {
        for j in i + 1..fractures.len() {
            let (fi, fj) = (&fractures[i], &fractures[j]);
            let seg = intersect_fractures(&fi.polygon3d, &fi.frame, &fj.polygon3d, &fj.frame, TOL_GEOM)
                .map_err(|e| match e {
                    GeometryError::CoplanarFractures => DfnError::Validation(format!(
                        "fractures {} and {} are coplanar",
                        fi.id, fj.id
                    )),
                    e => e.into(),
                })?;
            if let Some(s) = seg {
                let id = traces.len();
                traces.push(Trace {
                    id,
                    fractures: [i, j],
                    segment3d: s,
                    segment2d: [
                        Segment2::new(fi.frame.to_local(&s.a), fi.frame.to_local(&s.b)),
                        Segment2::new(fj.frame.to_local(&s.a), fj.frame.to_local(&s.b)),
                    ],
                });
            }
        }
    }
    Ok(traces)
}

/// Source term on a fracture.
#[derive(Debug, Clone)]
pub enum Forcing {
    Zero,
    Expr(Expr),
    /// `f = −K Δh` from the exact solution of the same fracture.
    FromExact,
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dfn: Dfn,
    pub forcing: Vec<Forcing>,
    pub exact: Vec<Option<Expr>>,
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        dfn: Dfn,
        forcing: Vec<Forcing>,
        exact: Vec<Option<Expr>>,
    ) -> Result<Self> {
        let n = dfn.fractures.len();
        if forcing.len() != n || exact.len() != n {
            return Err(DfnError::Validation("per-fracture data length mismatch".into()));
        }
        let any = exact.iter().any(Option::is_some);
        let all = exact.iter().all(Option::is_some);
        if any && !all {
            return Err(DfnError::Validation(
                "exact solution must be given on every fracture or none".into(),
            ));
        }
        for (i, f) in forcing.iter().enumerate() {
            if matches!(f, Forcing::FromExact) && exact[i].is_none() {
                return Err(DfnError::Validation(format!(
                    "fracture {}: forcing derived from a missing exact solution",
                    dfn.fractures[i].id
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            dfn,
            forcing,
            exact,
        })
    }

    pub fn has_exact(&self) -> bool {
        self.exact.iter().all(Option::is_some) && !self.exact.is_empty()
    }

    fn global(&self, frac: usize, p: &Point2<f64>) -> Point3<f64> {
        self.dfn.fractures[frac].frame.to_global(p)
    }

    /// Evaluates `e` as a jet in the fracture-local coordinates at `p`.
    fn jet(&self, frac: usize, e: &Expr, p: &Point2<f64>) -> Jet {
        let fr = &self.dfn.fractures[frac].frame;
        let g = fr.to_global(p);
        let x = Jet::affine(g.x, [fr.basis_u.x, fr.basis_v.x]);
        let y = Jet::affine(g.y, [fr.basis_u.y, fr.basis_v.y]);
        let z = Jet::affine(g.z, [fr.basis_u.z, fr.basis_v.z]);
        e.eval(x, y, z)
    }

    pub fn forcing_at(&self, frac: usize, p: &Point2<f64>) -> f64 {
        match &self.forcing[frac] {
            Forcing::Zero => 0.0,
            Forcing::Expr(e) => {
                let g = self.global(frac, p);
                e.eval_f64(g.x, g.y, g.z)
            }
            Forcing::FromExact => {
                let e = self.exact[frac].as_ref().expect("validated");
                -self.dfn.fractures[frac].transmissivity * self.jet(frac, e, p).laplacian()
            }
        }
    }

    pub fn forcing_is_zero(&self, frac: usize) -> bool {
        match &self.forcing[frac] {
            Forcing::Zero => true,
            Forcing::Expr(e) => e.is_zero(),
            Forcing::FromExact => false,
        }
    }

    pub fn exact_at(&self, frac: usize, p: &Point2<f64>) -> Option<f64> {
        let e = self.exact[frac].as_ref()?;
        let g = self.global(frac, p);
        Some(e.eval_f64(g.x, g.y, g.z))
    }

    /// In-plane gradient of the exact solution in fracture-local coordinates.
    pub fn exact_gradient_at(&self, frac: usize, p: &Point2<f64>) -> Option<Vector2<f64>> {
        let e = self.exact[frac].as_ref()?;
        let j = self.jet(frac, e, p);
        Some(Vector2::new(j.d[0], j.d[1]))
    }

    pub fn boundary_value(&self, frac: usize, edge: usize, p: &Point2<f64>) -> f64 {
        let g = self.global(frac, p);
        self.dfn.boundary[frac][edge].value.eval_f64(g.x, g.y, g.z)
    }

    pub fn boundary_kind(&self, frac: usize, edge: usize) -> BcKind {
        self.dfn.boundary[frac][edge].kind
    }
}
