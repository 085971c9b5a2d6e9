//! Residual a posteriori estimator and energy error.

use nalgebra::{DVector, Point2, Vector2};
use rayon::prelude::*;
use thiserror::Error;

use crate::dfn::{BcKind, ProblemSpec};
use crate::mesh::ConformingMesh;
use crate::vem::monomial::dim;
use crate::vem::quadrature::{polygon_quadrature, segment_quadrature};
use crate::vem::{Discretization, VemElement};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("solution has {got} values, expected {expected}")]
    MeshSolutionMismatch { got: usize, expected: usize },
    #[error("problem has no exact solution")]
    NoExactSolution,
    #[error("estimator is zero")]
    EstimatorZero,
}

/// Per-cell contributions, squared.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellTerms {
    pub interior: f64,
    pub internal_edges: f64,
    pub neumann_edges: f64,
    pub oscillation: f64,
    pub trace_edges: f64,
}

impl CellTerms {
    pub fn total(&self) -> f64 {
        self.interior + self.internal_edges + self.neumann_edges + self.oscillation + self.trace_edges
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorReport {
    /// Aligned with the cell order of the discretization.
    pub cells: Vec<(usize, usize)>,
    pub terms: Vec<CellTerms>,
    /// `est²_E` per cell.
    pub per_cell: Vec<f64>,
    pub est: f64,
    /// `(Σ K ‖∇Π∇u‖²)^½`, the denominator of the stopping test.
    pub energy_norm: f64,
    pub err: Option<f64>,
}

impl EstimatorReport {
    pub fn relative(&self) -> f64 {
        self.est / self.energy_norm
    }

    pub fn effectivity(&self) -> Result<f64, EstimatorError> {
        let err = self.err.ok_or(EstimatorError::NoExactSolution)?;
        if self.est == 0.0 {
            return Err(EstimatorError::EstimatorZero);
        }
        Ok(err / self.est)
    }
}

/// Which estimator terms to include; all on by default.
#[derive(Debug, Clone, Copy)]
pub struct TermMask {
    pub interior: bool,
    pub internal_edges: bool,
    pub neumann_edges: bool,
    pub oscillation: bool,
    pub trace_edges: bool,
}

impl Default for TermMask {
    fn default() -> Self {
        Self {
            interior: true,
            internal_edges: true,
            neumann_edges: true,
            oscillation: true,
            trace_edges: true,
        }
    }
}

struct CellData {
    coeffs: Vec<f64>,
    interior: f64,
    oscillation: f64,
    energy: f64,
    err2: Option<f64>,
}

fn cell_data(problem: &ProblemSpec, frac: usize, el: &VemElement, local: &[f64]) -> CellData {
    let k = el.k;
    let kf = el.transmissivity;
    let h2 = el.diameter * el.diameter;
    let coeffs = el.project(local);
    let c = DVector::from_column_slice(&coeffs);
    let energy = kf * (c.transpose() * &el.grad_gram * &c)[0];

    let nb = dim(k as i32 - 1);
    let mut r = vec![0.0; nb];
    for (i, l) in el.basis.laplacian_coeffs(&coeffs).iter().enumerate() {
        r[i] = kf * l;
    }
    let mut oscillation = 0.0;
    if !problem.forcing_is_zero(frac) {
        let f = |p: &Point2<f64>| problem.forcing_at(frac, p);
        let pf = el.project_l2(f);
        for (p, w) in polygon_quadrature(&el.points, 2 * k + 2) {
            let d = f(&p) - el.basis.eval_poly(&pf, &p);
            oscillation += w * d * d;
        }
        oscillation *= h2 / kf;
        for i in 0..nb {
            r[i] += pf[i];
        }
    }
    let rv = DVector::from_vec(r);
    let hk1 = el.gram.view((0, 0), (nb, nb));
    let interior = h2 / kf * (rv.transpose() * hk1 * &rv)[0];

    let err2 = problem.has_exact().then(|| {
        polygon_quadrature(&el.points, 2 * k + 2)
            .iter()
            .map(|(p, w)| {
                let g = problem.exact_gradient_at(frac, p).expect("exact solution");
                w * (g - el.basis.grad_poly(&coeffs, p)).norm_squared()
            })
            .sum::<f64>()
            * kf
    });
    CellData {
        coeffs,
        interior,
        oscillation: oscillation.max(0.0),
        energy,
        err2,
    }
}

/// Computes the estimator for the solution `u` (all DOFs, Dirichlet included).
pub fn compute_estimator(
    mesh: &ConformingMesh,
    problem: &ProblemSpec,
    disc: &Discretization,
    u: &[f64],
) -> Result<EstimatorReport, EstimatorError> {
    compute_estimator_with(mesh, problem, disc, u, TermMask::default())
}

pub fn compute_estimator_with(
    mesh: &ConformingMesh,
    problem: &ProblemSpec,
    disc: &Discretization,
    u: &[f64],
    mask: TermMask,
) -> Result<EstimatorReport, EstimatorError> {
    let dm = &disc.dofmap;
    if u.len() != dm.ndof {
        return Err(EstimatorError::MeshSolutionMismatch {
            got: u.len(),
            expected: dm.ndof,
        });
    }
    let k = dm.k;
    let data: Vec<CellData> = dm
        .cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(f, _))| cell_data(problem, f, &disc.elements[ci], &dm.local_values(ci, u)))
        .collect();

    // cell index lookup per fracture
    let mut index: Vec<Vec<Option<usize>>> = mesh
        .fractures
        .iter()
        .map(|fm| vec![None; fm.cells.len()])
        .collect();
    for (ci, &(f, c)) in dm.cells.iter().enumerate() {
        index[f][c] = Some(ci);
    }
    let mut terms: Vec<CellTerms> = data
        .iter()
        .map(|d| CellTerms {
            interior: if mask.interior { d.interior } else { 0.0 },
            oscillation: if mask.oscillation { d.oscillation } else { 0.0 },
            ..CellTerms::default()
        })
        .collect();

    // K ∇p · n on cell `ci`, with `n` the outward normal of `ci` along the
    // stored edge direction `a → b` when `sign > 0`
    let flux = |ci: usize, p: &Point2<f64>, n_left: &Vector2<f64>, sign: f64| -> f64 {
        let el = &disc.elements[ci];
        el.transmissivity * el.basis.grad_poly(&data[ci].coeffs, p).dot(n_left) * sign
    };
    let area = |ci: usize| disc.elements[ci].area;
    // area-weighted split among the given cells
    let split = |terms: &mut Vec<CellTerms>, cells: &[usize], value: f64, pick: fn(&mut CellTerms) -> &mut f64| {
        let total: f64 = cells.iter().map(|&c| area(c)).sum();
        for &c in cells {
            *pick(&mut terms[c]) += value * area(c) / total;
        }
    };

    for (f, fm) in mesh.fractures.iter().enumerate() {
        let kf = problem.dfn.fractures[f].transmissivity;
        for e in fm.alive_edges() {
            let edge = &fm.edges[e];
            let (a, b) = fm.edge_points(e);
            let d = b - a;
            let h_e = d.norm();
            // outward normal of cells[0], which traverses a → b
            let n0 = Vector2::new(d.y, -d.x) / h_e;
            let quad = segment_quadrature(&a, &b, 2 * k);
            let sides: Vec<(usize, f64)> = edge
                .cells
                .iter()
                .zip([1.0, -1.0])
                .filter_map(|(c, s)| c.and_then(|c| index[f][c]).map(|ci| (ci, s)))
                .collect();
            let bc = edge.boundary.map(|be| (be, problem.boundary_kind(f, be)));

            if let (Some(_), Some((tf, te))) = (edge.trace, edge.twin) {
                if !mask.trace_edges || (tf, te) < (f, e) {
                    continue;
                }
                let tm = &mesh.fractures[tf];
                let tedge = &tm.edges[te];
                let tbc = tedge.boundary.map(|be| (be, problem.boundary_kind(tf, be)));
                if matches!(bc, Some((_, BcKind::Dirichlet))) || matches!(tbc, Some((_, BcKind::Dirichlet))) {
                    continue;
                }
                let kt = problem.dfn.fractures[tf].transmissivity;
                let (ta, tb) = tm.edge_points(te);
                let td = tb - ta;
                let tn0 = Vector2::new(td.y, -td.x) / td.norm();
                let tsides: Vec<(usize, f64)> = tedge
                    .cells
                    .iter()
                    .zip([1.0, -1.0])
                    .filter_map(|(c, s)| c.and_then(|c| index[tf][c]).map(|ci| (ci, s)))
                    .collect();
                let same = (tm.vertices[tedge.v[0]].g - fm.vertices[edge.v[0]].g).norm()
                    <= (tm.vertices[tedge.v[1]].g - fm.vertices[edge.v[0]].g).norm();
                let mut acc = 0.0;
                for &(s, p, w) in &quad {
                    let mut j = 0.0;
                    for &(ci, sg) in &sides {
                        j += flux(ci, &p, &n0, sg);
                    }
                    if let Some((be, BcKind::Neumann)) = bc {
                        j -= problem.boundary_value(f, be, &p);
                    }
                    let tp = ta + td * if same { s } else { 1.0 - s };
                    for &(ci, sg) in &tsides {
                        j += flux(ci, &tp, &tn0, sg);
                    }
                    if let Some((be, BcKind::Neumann)) = tbc {
                        j -= problem.boundary_value(tf, be, &tp);
                    }
                    acc += w * j * j;
                }
                let value = h_e / kf.min(kt) * acc;
                let cells: Vec<usize> = sides.iter().chain(&tsides).map(|s| s.0).collect();
                split(&mut terms, &cells, value, |t| &mut t.trace_edges);
                continue;
            }

            match (sides.as_slice(), bc) {
                ([(c0, s0), (c1, s1)], None) => {
                    if !mask.internal_edges {
                        continue;
                    }
                    let acc: f64 = quad
                        .iter()
                        .map(|(_, p, w)| {
                            let j = flux(*c0, p, &n0, *s0) + flux(*c1, p, &n0, *s1);
                            w * j * j
                        })
                        .sum();
                    split(&mut terms, &[*c0, *c1], h_e / kf * acc, |t| &mut t.internal_edges);
                }
                ([(c0, s0)], Some((be, BcKind::Neumann))) => {
                    if !mask.neumann_edges {
                        continue;
                    }
                    let acc: f64 = segment_quadrature(&a, &b, 2 * k + 2)
                        .iter()
                        .map(|(_, p, w)| {
                            let j = flux(*c0, p, &n0, *s0) - problem.boundary_value(f, be, p);
                            w * j * j
                        })
                        .sum();
                    terms[*c0].neumann_edges += h_e / kf * acc;
                }
                _ => {}
            }
        }
    }

    let per_cell: Vec<f64> = terms.iter().map(CellTerms::total).collect();
    let est = per_cell.iter().sum::<f64>().sqrt();
    let energy_norm = data.iter().map(|d| d.energy).sum::<f64>().sqrt();
    let err = problem
        .has_exact()
        .then(|| data.iter().map(|d| d.err2.unwrap_or(0.0)).sum::<f64>().sqrt());
    Ok(EstimatorReport {
        cells: dm.cells.clone(),
        terms,
        per_cell,
        est,
        energy_norm,
        err,
    })
}
