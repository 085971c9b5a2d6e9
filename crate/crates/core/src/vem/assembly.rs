//! Global degrees of freedom and assembly of the network system.
//!
//! Vertex and edge DOFs on a trace are shared by both fractures of the trace,
//! which makes the discrete head continuous across traces. Fluxes balance
//! weakly, since the trace edges contribute no boundary term.

use std::collections::HashMap;

use nalgebra::{DMatrix, Point2};
use rayon::prelude::*;

use super::element::{build_element, edge_node_dof, local_ndof, moment_dof, VemElement};
use super::quadrature::{gauss_lobatto, segment_quadrature};
use super::VemError;
use crate::dfn::{BcKind, ProblemSpec};
use crate::mesh::ConformingMesh;
use crate::solver::SparseSym;

#[derive(Debug, Clone)]
pub struct DofMap {
    pub k: usize,
    pub ndof: usize,
    /// Live cells in [`ConformingMesh::cell_list`] order.
    pub cells: Vec<(usize, usize)>,
    /// Global DOF of every local DOF, per cell.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Prescribed value of each Dirichlet DOF.
    pub dirichlet: Vec<Option<f64>>,
    /// Position among the free DOFs.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Edge key shared by twins, and whether `(f, e)` runs in the key direction.
fn canonical_edge(mesh: &ConformingMesh, f: usize, e: usize) -> ((usize, usize), bool) {
    match mesh.fractures[f].edges[e].twin {
        Some(t) if t < (f, e) => {
            let fm = &mesh.fractures[f];
            let tm = &mesh.fractures[t.0];
            let g0 = fm.vertices[fm.edges[e].v[0]].g;
            let t0 = tm.vertices[tm.edges[t.1].v[0]].g;
            let t1 = tm.vertices[tm.edges[t.1].v[1]].g;
            (t, (g0 - t0).norm() <= (g0 - t1).norm())
        }
        _ => ((f, e), true),
    }
}

/// Interleaves the low 16 bits of `x` and `y`.
fn morton(x: u32, y: u32) -> u64 {
    let spread = |v: u32| {
        let mut v = u64::from(v & 0xffff);
        v = (v | (v << 8)) & 0x00ff_00ff;
        v = (v | (v << 4)) & 0x0f0f_0f0f;
        v = (v | (v << 2)) & 0x3333_3333;
        (v | (v << 1)) & 0x5555_5555
    };
    spread(x) | (spread(y) << 1)
}

/// Cell visiting order for DOF numbering: fracture-major, then along a
/// Z-order curve of the centroids, so that neighbouring DOFs get nearby
/// indices.
fn numbering_order(mesh: &ConformingMesh, cells: &[(usize, usize)]) -> Vec<usize> {
    let keys: Vec<(usize, u64)> = cells
        .iter()
        .map(|&(f, c)| {
            let fm = &mesh.fractures[f];
            let (lo, hi) = fm.boundary.vertices().iter().fold(
                (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
                |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
            );
            let p = fm.cells[c].centroid;
            let q = |v: f64, a: f64, b: f64| (((v - a) / (b - a)).clamp(0.0, 1.0) * 65535.0) as u32;
            (f, morton(q(p.x, lo.x, hi.x), q(p.y, lo.y, hi.y)))
        })
        .collect();
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    order
}

impl DofMap {
    pub fn new(mesh: &ConformingMesh, problem: &ProblemSpec, k: usize) -> Self {
        let cells = mesh.cell_list();
        let offset: Vec<usize> = mesh
            .fractures
            .iter()
            .scan(0, |acc, f| {
                let o = *acc;
                *acc += f.vertices.len();
                Some(o)
            })
            .collect();
        let nv_total = offset.last().map_or(0, |o| o + mesh.fractures.last().unwrap().vertices.len());
        let mut uf = UnionFind((0..nv_total).collect());
        for (f, fm) in mesh.fractures.iter().enumerate() {
            for e in fm.alive_edges() {
                if let Some((tf, te)) = fm.edges[e].twin {
                    let ((cf, ce), same) = canonical_edge(mesh, f, e);
                    if (cf, ce) != (tf, te) {
                        continue;
                    }
                    let [a, b] = fm.edges[e].v;
                    let [ta, tb] = mesh.fractures[tf].edges[te].v;
                    let (ta, tb) = if same { (ta, tb) } else { (tb, ta) };
                    uf.union(offset[f] + a, offset[tf] + ta);
                    uf.union(offset[f] + b, offset[tf] + tb);
                }
            }
        }

        let mut ndof = 0;
        let mut vertex_id: HashMap<usize, usize> = HashMap::new();
        let mut edge_id: HashMap<((usize, usize), usize), usize> = HashMap::new();
        let mut cell_dofs = vec![Vec::new(); cells.len()];
        for ci in numbering_order(mesh, &cells) {
            let (f, c) = cells[ci];
            let fm = &mesh.fractures[f];
            let cell = &fm.cells[c];
            let n = cell.verts.len();
            let mut dofs = vec![0; local_ndof(n, k)];
            for (i, &v) in cell.verts.iter().enumerate() {
                let root = uf.find(offset[f] + v);
                dofs[i] = *vertex_id.entry(root).or_insert_with(|| {
                    ndof += 1;
                    ndof - 1
                });
            }
            for (le, &e) in cell.edges.iter().enumerate() {
                let (key, same) = canonical_edge(mesh, f, e);
                let forward = fm.edge_sign(c, e) > 0.0;
                for j in 1..k {
                    // node index counted from v[0] of the key edge
                    let jj = if forward == same { j } else { k - j };
                    dofs[edge_node_dof(n, k, le, j)] = *edge_id.entry((key, jj)).or_insert_with(|| {
                        ndof += 1;
                        ndof - 1
                    });
                }
            }
            for b in 0..super::monomial::dim(k as i32 - 2) {
                dofs[moment_dof(n, k, b)] = ndof;
                ndof += 1;
            }
            cell_dofs[ci] = dofs;
        }

        // Dirichlet values at boundary nodes; the first Dirichlet edge wins
        let mut dirichlet = vec![None; ndof];
        let (s, _) = gauss_lobatto(k + 1);
        for (ci, &(f, c)) in cells.iter().enumerate() {
            let fm = &mesh.fractures[f];
            let cell = &fm.cells[c];
            let n = cell.verts.len();
            for (le, &e) in cell.edges.iter().enumerate() {
                let Some(be) = fm.edges[e].boundary else { continue };
                if problem.boundary_kind(f, be) != BcKind::Dirichlet {
                    continue;
                }
                let a = fm.vertices[cell.verts[le]].p;
                let b = fm.vertices[cell.verts[(le + 1) % n]].p;
                for j in 0..=k {
                    let g = cell_dofs[ci][edge_node_dof(n, k, le, j)];
                    if dirichlet[g].is_none() {
                        dirichlet[g] = Some(problem.boundary_value(f, be, &(a + (b - a) * s[j])));
                    }
                }
            }
        }
        let mut free_index = vec![None; ndof];
        let mut n_free = 0;
        for (g, d) in dirichlet.iter().enumerate() {
            if d.is_none() {
                free_index[g] = Some(n_free);
                n_free += 1;
            }
        }
        Self {
            k,
            ndof,
            cells,
            cell_dofs,
            dirichlet,
            free_index,
            n_free,
        }
    }

    /// Global vector from the free-DOF solution and the Dirichlet data.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        (0..self.ndof)
            .map(|g| match (self.dirichlet[g], self.free_index[g]) {
                (Some(v), _) => v,
                (None, Some(i)) => free[i],
                (None, None) => unreachable!(),
            })
            .collect()
    }

    pub fn local_values(&self, cell: usize, global: &[f64]) -> Vec<f64> {
        self.cell_dofs[cell].iter().map(|&g| global[g]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub dofmap: DofMap,
    /// Local matrices, aligned with `dofmap.cells`.
    pub elements: Vec<VemElement>,
    /// Matrix on the free DOFs.
    pub matrix: SparseSym,
    /// Right-hand side on the free DOFs, Dirichlet lifting included.
    pub rhs: Vec<f64>,
}

/// Assembles the order-`k` system on the current mesh.
pub fn assemble(mesh: &ConformingMesh, problem: &ProblemSpec, k: usize) -> Result<Discretization, VemError> {
    if !(1..=4).contains(&k) {
        return Err(VemError::UnsupportedOrder(k));
    }
    let dofmap = DofMap::new(mesh, problem, k);
    if dofmap.n_free == dofmap.ndof {
        return Err(VemError::NoDirichlet);
    }
    let local: Vec<(VemElement, nalgebra::DVector<f64>)> = dofmap
        .cells
        .par_iter()
        .map(|&(f, c)| {
            let fm = &mesh.fractures[f];
            let kf = problem.dfn.fractures[f].transmissivity;
            let el = build_element(&fm.cell_points(c), k, kf)?;
            let load = if problem.forcing_is_zero(f) {
                nalgebra::DVector::zeros(el.ndof())
            } else {
                el.local_load(|p| problem.forcing_at(f, p))
            };
            Ok((el, load))
        })
        .collect::<Result<_, VemError>>()?;

    let mut rhs = vec![0.0; dofmap.n_free];
    let mut triplets = Vec::new();
    for (ci, (el, load)) in local.iter().enumerate() {
        scatter(&dofmap, &dofmap.cell_dofs[ci], &el.stiffness, load.as_slice(), &mut triplets, &mut rhs);
    }
    add_neumann(mesh, problem, &dofmap, &mut rhs);
    let matrix = SparseSym::from_triplets(dofmap.n_free, &triplets);
    let elements = local.into_iter().map(|(el, _)| el).collect();
    Ok(Discretization {
        dofmap,
        elements,
        matrix,
        rhs,
    })
}

fn scatter(
    dm: &DofMap,
    dofs: &[usize],
    a: &DMatrix<f64>,
    load: &[f64],
    triplets: &mut Vec<(usize, usize, f64)>,
    rhs: &mut [f64],
) {
    for (r, &gr) in dofs.iter().enumerate() {
        let Some(fr) = dm.free_index[gr] else { continue };
        rhs[fr] += load[r];
        for (s, &gs) in dofs.iter().enumerate() {
            match (dm.free_index[gs], dm.dirichlet[gs]) {
                (Some(fs), _) if fs <= fr => triplets.push((fr, fs, a[(r, s)])),
                (None, Some(v)) => rhs[fr] -= a[(r, s)] * v,
                _ => {}
            }
        }
    }
}

/// Adds `∫_e g φ` on Neumann boundary edges.
fn add_neumann(mesh: &ConformingMesh, problem: &ProblemSpec, dm: &DofMap, rhs: &mut [f64]) {
    let k = dm.k;
    let (s, _) = gauss_lobatto(k + 1);
    let lagrange = |j: usize, t: f64| -> f64 {
        (0..=k).filter(|&m| m != j).map(|m| (t - s[m]) / (s[j] - s[m])).product()
    };
    for (ci, &(f, c)) in dm.cells.iter().enumerate() {
        let fm = &mesh.fractures[f];
        let cell = &fm.cells[c];
        let n = cell.verts.len();
        for (le, &e) in cell.edges.iter().enumerate() {
            let Some(be) = fm.edges[e].boundary else { continue };
            let bc = &problem.dfn.boundary[f][be];
            if bc.kind != BcKind::Neumann || bc.value.is_zero() {
                continue;
            }
            let a: Point2<f64> = fm.vertices[cell.verts[le]].p;
            let b: Point2<f64> = fm.vertices[cell.verts[(le + 1) % n]].p;
            for (t, p, w) in segment_quadrature(&a, &b, 2 * k + 2) {
                let g = problem.boundary_value(f, be, &p);
                for j in 0..=k {
                    if let Some(fr) = dm.free_index[dm.cell_dofs[ci][edge_node_dof(n, k, le, j)]] {
                        rhs[fr] += w * g * lagrange(j, t);
                    }
                }
            }
        }
    }
}
