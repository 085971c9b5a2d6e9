//! Local virtual element matrices on one convex polygon.
//!
//! Local degrees of freedom, for a cell with `n` vertices and order `k`:
//! - `0..n`: values at the vertices;
//! - `n + e(k−1) + j − 1` for `j = 1..k−1`: value at the `j`-th interior
//!   Gauss–Lobatto node of edge `e`, counted from `verts[e]`;
//! - `nk + β`: scaled moment `|E|⁻¹ ∫_E v m_β` for `|β| ≤ k − 2`.

use nalgebra::{DMatrix, DVector, Point2, Vector2};

use super::monomial::{dim, MonomialBasis};
use super::quadrature::{gauss_lobatto, polygon_quadrature};
use super::VemError;
use crate::geometry::Polygon2;

pub fn local_ndof(n_vertices: usize, k: usize) -> usize {
    n_vertices * k + dim(k as i32 - 2)
}

/// Local index of node `j ∈ 0..=k` of edge `e`, in traversal order.
pub fn edge_node_dof(n_vertices: usize, k: usize, e: usize, j: usize) -> usize {
    if j == 0 {
        e
    } else if j == k {
        (e + 1) % n_vertices
    } else {
        n_vertices + e * (k - 1) + j - 1
    }
}

pub fn moment_dof(n_vertices: usize, k: usize, beta: usize) -> usize {
    n_vertices * k + beta
}

#[derive(Debug, Clone)]
pub struct VemElement {
    pub k: usize,
    pub points: Vec<Point2<f64>>,
    pub basis: MonomialBasis,
    pub area: f64,
    pub diameter: f64,
    pub transmissivity: f64,
    /// Monomial coefficients of `Π∇_k`, `dim(k) × ndof`.
    pub pi_nabla: DMatrix<f64>,
    /// Monomial coefficients of `Π⁰_{k−1}` (vertex mean for `k = 1`).
    pub pi0: DMatrix<f64>,
    /// Monomial coefficients of `Π⁰_{k−1}` applied to each gradient component.
    pub pi0_grad: [DMatrix<f64>; 2],
    /// Gram matrix `∫ m_α m_β` on `P_k`.
    pub gram: DMatrix<f64>,
    /// `∫ ∇m_α · ∇m_β` on `P_k`.
    pub grad_gram: DMatrix<f64>,
    /// DOF values of the monomials, `ndof × dim(k)`.
    pub dof_of_monomials: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
}

impl VemElement {
    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn ndof(&self) -> usize {
        local_ndof(self.points.len(), self.k)
    }

    /// Coefficients of `Π∇_k v` from the local DOF vector of `v`.
    pub fn project(&self, dofs: &[f64]) -> Vec<f64> {
        (&self.pi_nabla * DVector::from_column_slice(dofs))
            .iter()
            .copied()
            .collect()
    }

    /// Entries `∫_E f Π⁰_{k−1} φ_r`.
    pub fn local_load(&self, f: impl Fn(&Point2<f64>) -> f64) -> DVector<f64> {
        let nb = dim(self.k as i32 - 1);
        let mut fm = DVector::zeros(nb);
        for (p, w) in polygon_quadrature(&self.points, 2 * self.k + 2) {
            let fv = f(&p);
            if fv == 0.0 {
                continue;
            }
            let m = self.basis.eval(&p);
            for b in 0..nb {
                fm[b] += w * fv * m[b];
            }
        }
        self.pi0.transpose() * fm
    }

    /// Coefficients of `Π⁰_{k−1} f` and the quadrature rule used.
    pub fn project_l2(&self, f: impl Fn(&Point2<f64>) -> f64) -> Vec<f64> {
        let nb = dim(self.k as i32 - 1);
        let mut rhs = DVector::zeros(nb);
        for (p, w) in polygon_quadrature(&self.points, 2 * self.k + 2) {
            let fv = f(&p);
            let m = self.basis.eval(&p);
            for b in 0..nb {
                rhs[b] += w * fv * m[b];
            }
        }
        let h = self.gram.view((0, 0), (nb, nb)).into_owned();
        let c = h.cholesky().expect("Gram matrix is SPD").solve(&rhs);
        c.iter().copied().collect()
    }
}

/// Builds the local matrices of order `k` on the convex polygon `points`
/// (counter-clockwise, aligned vertices allowed).
pub fn build_element(points: &[Point2<f64>], k: usize, transmissivity: f64) -> Result<VemElement, VemError> {
    assert!((1..=4).contains(&k), "order must be in 1..=4");
    let n = points.len();
    let poly = Polygon2::new_unchecked(points.to_vec());
    let (centroid, area) = poly.centroid_area();
    let diameter = poly.diameter();
    let basis = MonomialBasis::for_cell(points, centroid, &poly.inertia_tensor(), k);
    let nk = basis.len();
    let nk1 = dim(k as i32 - 1);
    let nk2 = dim(k as i32 - 2);
    let ndof = local_ndof(n, k);

    let quad = polygon_quadrature(points, 2 * k);
    let mut gram = DMatrix::zeros(nk, nk);
    let mut grad_gram = DMatrix::zeros(nk, nk);
    for (p, w) in &quad {
        let m = basis.eval(p);
        let g = basis.grad(p);
        for a in 0..nk {
            for b in 0..=a {
                gram[(a, b)] += w * m[a] * m[b];
                grad_gram[(a, b)] += w * g[a].dot(&g[b]);
            }
        }
    }
    for a in 0..nk {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
            grad_gram[(b, a)] = grad_gram[(a, b)];
        }
    }

    let (s, wl) = gauss_lobatto(k + 1);
    // per edge: (outward normal, length, node positions)
    let edges: Vec<(Vector2<f64>, f64, Vec<Point2<f64>>)> = (0..n)
        .map(|e| {
            let (a, b) = (points[e], points[(e + 1) % n]);
            let d = b - a;
            let len = d.norm();
            let normal = Vector2::new(d.y, -d.x) / len;
            (normal, len, s.iter().map(|&t| a + d * t).collect())
        })
        .collect();
    let perimeter: f64 = edges.iter().map(|e| e.1).sum();

    // D: DOFs of each monomial
    let mut dmat = DMatrix::zeros(ndof, nk);
    for (i, p) in points.iter().enumerate() {
        let m = basis.eval(p);
        for a in 0..nk {
            dmat[(i, a)] = m[a];
        }
    }
    for (e, (_, _, nodes)) in edges.iter().enumerate() {
        for j in 1..k {
            let m = basis.eval(&nodes[j]);
            let r = edge_node_dof(n, k, e, j);
            for a in 0..nk {
                dmat[(r, a)] = m[a];
            }
        }
    }
    for b in 0..nk2 {
        for a in 0..nk {
            dmat[(moment_dof(n, k, b), a)] = gram[(b, a)] / area;
        }
    }

    // B: right-hand side of the projector equations
    let mut bmat = DMatrix::zeros(nk, ndof);
    if k == 1 {
        for (e, (_, len, _)) in edges.iter().enumerate() {
            for j in 0..=k {
                bmat[(0, edge_node_dof(n, k, e, j))] += wl[j] * len / perimeter;
            }
        }
    } else {
        bmat[(0, moment_dof(n, k, 0))] = 1.0;
    }
    for (e, (normal, len, nodes)) in edges.iter().enumerate() {
        for j in 0..=k {
            let g = basis.grad(&nodes[j]);
            let r = edge_node_dof(n, k, e, j);
            for a in 1..nk {
                bmat[(a, r)] += wl[j] * len * g[a].dot(normal);
            }
        }
    }
    for a in 1..nk {
        let mut unit = vec![0.0; nk];
        unit[a] = 1.0;
        for (b, c) in basis.laplacian_coeffs(&unit).iter().enumerate() {
            bmat[(a, moment_dof(n, k, b))] -= area * c;
        }
    }

    let gmat = &bmat * &dmat;
    let pi_nabla = gmat
        .lu()
        .solve(&bmat)
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or(VemError::SingularProjector)?;

    // Π⁰_{k−1}∇
    let h1 = gram.view((0, 0), (nk1, nk1)).into_owned();
    let h1_chol = h1.clone().cholesky().ok_or(VemError::SingularProjector)?;
    let mut pi0_grad = [DMatrix::zeros(nk1, ndof), DMatrix::zeros(nk1, ndof)];
    for (c, pg) in pi0_grad.iter_mut().enumerate() {
        let mut emat = DMatrix::zeros(nk1, ndof);
        for b in 0..nk1 {
            for &(g, coef) in &basis.derivative_coeffs(b)[c] {
                emat[(b, moment_dof(n, k, g))] -= area * coef;
            }
        }
        for (e, (normal, len, nodes)) in edges.iter().enumerate() {
            for j in 0..=k {
                let m = basis.eval(&nodes[j]);
                let r = edge_node_dof(n, k, e, j);
                for b in 0..nk1 {
                    emat[(b, r)] += wl[j] * len * m[b] * normal[c];
                }
            }
        }
        *pg = h1_chol.solve(&emat);
    }

    // Π⁰_{k−1}
    let pi0 = if k == 1 {
        let mut m = DMatrix::zeros(1, ndof);
        for i in 0..n {
            m[(0, i)] = 1.0 / n as f64;
        }
        m
    } else {
        let hpi = &gram * &pi_nabla; // rows: ∫ Π∇v m_β
        let mut mm = DMatrix::zeros(nk1, ndof);
        for b in 0..nk2 {
            mm[(b, moment_dof(n, k, b))] = area;
        }
        let h2 = gram.view((0, 0), (nk2, nk2)).into_owned();
        let h2_chol = h2.cholesky().ok_or(VemError::SingularProjector)?;
        for b in nk2..nk1 {
            let rhs = DVector::from_fn(nk2, |g, _| gram[(g, b)]);
            let r = h2_chol.solve(&rhs);
            for col in 0..ndof {
                let mut v = hpi[(b, col)];
                for g in 0..nk2 {
                    v -= r[g] * hpi[(g, col)];
                }
                mm[(b, col)] = v;
            }
            for g in 0..nk2 {
                mm[(b, moment_dof(n, k, g))] += r[g] * area;
            }
        }
        h1_chol.solve(&mm)
    };

    let proj_dofs = &dmat * &pi_nabla;
    let resid = DMatrix::identity(ndof, ndof) - proj_dofs;
    let mut stiffness = resid.transpose() * &resid;
    for pg in &pi0_grad {
        stiffness += pg.transpose() * &h1 * pg;
    }
    stiffness *= transmissivity;
    // exact symmetry
    for a in 0..ndof {
        for b in 0..a {
            let v = 0.5 * (stiffness[(a, b)] + stiffness[(b, a)]);
            stiffness[(a, b)] = v;
            stiffness[(b, a)] = v;
        }
    }

    Ok(VemElement {
        k,
        points: points.to_vec(),
        basis,
        area,
        diameter,
        transmissivity,
        pi_nabla,
        pi0,
        pi0_grad,
        gram,
        grad_gram,
        dof_of_monomials: dmat,
        stiffness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vem::monomial::exponents;

    fn square() -> Vec<Point2<f64>> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn pentagon_with_aligned_vertex() -> Vec<Point2<f64>> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.6, 0.0),
            Point2::new(1.5, 0.0),
            Point2::new(1.8, 0.9),
            Point2::new(0.4, 1.3),
        ]
    }

    /// Exact ∫_E x^a y^b by the divergence theorem on each edge
    /// (∫_E x^a y^b = 1/(a+1) ∮ x^{a+1} y^b n_x), with Gauss–Legendre on edges.
    fn monomial_integral(points: &[Point2<f64>], a: i32, b: i32) -> f64 {
        let n = points.len();
        let (s, w) = crate::vem::quadrature::gauss_legendre(10);
        let mut acc = 0.0;
        for e in 0..n {
            let (p, q) = (points[e], points[(e + 1) % n]);
            let d = q - p;
            let nx = d.y; // n_x · |e|
            for (t, wt) in s.iter().zip(&w) {
                let x = p + d * *t;
                acc += wt * x.x.powi(a + 1) * x.y.powi(b) * nx;
            }
        }
        acc / (a + 1) as f64
    }

    /// DOF vector of the polynomial `Σ c (x^a y^b)` on the element.
    fn dofs_of(el: &VemElement, poly: &[(f64, i32, i32)]) -> Vec<f64> {
        let n = el.points.len();
        let k = el.k;
        let f = |p: &Point2<f64>| poly.iter().map(|(c, a, b)| c * p.x.powi(*a) * p.y.powi(*b)).sum::<f64>();
        let (s, _) = gauss_lobatto(k + 1);
        let mut d = vec![0.0; el.ndof()];
        for i in 0..n {
            d[i] = f(&el.points[i]);
            let (a, b) = (el.points[i], el.points[(i + 1) % n]);
            for j in 1..k {
                d[edge_node_dof(n, k, i, j)] = f(&(a + (b - a) * s[j]));
            }
        }
        for (bi, &(ea, eb)) in exponents(k).iter().enumerate().take(dim(k as i32 - 2)) {
            let mut acc = 0.0;
            for (p, w) in polygon_quadrature(&el.points, 2 * k + 2) {
                let xi = el.basis.local(&p);
                let m = xi.x.powi(ea as i32) * xi.y.powi(eb as i32);
                acc += w * f(&p) * m;
            }
            d[moment_dof(n, k, bi)] = acc / el.area;
        }
        d
    }

    #[test]
    fn p1_triangle_matches_fem_stiffness() {
        let t = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let el = build_element(&t, 1, 1.0).unwrap();
        let fem = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5]);
        assert!((&el.stiffness - fem).amax() < 1e-14);
    }

    #[test]
    fn constants_in_kernel() {
        for k in 1..=4 {
            for pts in [square(), pentagon_with_aligned_vertex()] {
                let el = build_element(&pts, k, 2.5).unwrap();
                let ones = dofs_of(&el, &[(1.0, 0, 0)]);
                let r = &el.stiffness * DVector::from_vec(ones);
                assert!(r.amax() < 1e-10 * el.stiffness.amax(), "k={k}");
                assert!((&el.stiffness - el.stiffness.transpose()).amax() == 0.0);
            }
        }
    }

    #[test]
    fn sliver_keeps_consistency() {
        // aspect ratio about 80, rotated off the axes
        let pts = vec![
            Point2::new(-0.6539949294500378, -0.7590936588952305),
            Point2::new(0.8901541222712923, 0.7998190841441756),
            Point2::new(0.33107513451365955, 0.29860647384514566),
        ];
        let el = build_element(&pts, 4, 1.0).unwrap();
        let u = [(1.0, 3, 1), (-2.0, 0, 4), (0.5, 2, 0)];
        let du = DVector::from_vec(dofs_of(&el, &u));
        let energy = (du.transpose() * &el.stiffness * &du)[0];
        // ∫|∇u|² with ∇u = (3x²y + x, x³ − 8y³)
        let terms = [
            (9.0, 4, 2),
            (6.0, 3, 1),
            (1.0, 2, 0),
            (1.0, 6, 0),
            (-16.0, 3, 3),
            (64.0, 0, 6),
        ];
        let exact: f64 = terms.iter().map(|&(c, a, b)| c * monomial_integral(&pts, a, b)).sum();
        assert!((energy - exact).abs() < 1e-10 * exact, "{energy} vs {exact}");
    }

    #[test]
    fn polynomial_reproduction_and_consistency() {
        for k in 1..=4 {
            let pts = pentagon_with_aligned_vertex();
            let el = build_element(&pts, k, 1.0).unwrap();
            // all monomials of degree ≤ k in global coordinates
            let polys: Vec<Vec<(f64, i32, i32)>> = exponents(k)
                .iter()
                .map(|&(a, b)| vec![(1.0, a as i32, b as i32)])
                .collect();
            for u in &polys {
                let du = dofs_of(&el, u);
                // Π∇ reproduces u
                let c = el.project(&du);
                for (p, _) in polygon_quadrature(&pts, 4) {
                    let exact: f64 = u.iter().map(|(cc, a, b)| cc * p.x.powi(*a) * p.y.powi(*b)).sum();
                    assert!((el.basis.eval_poly(&c, &p) - exact).abs() < 1e-10, "k={k}");
                }
                for v in &polys {
                    let dv = dofs_of(&el, v);
                    let a = (DVector::from_vec(dv).transpose() * &el.stiffness * DVector::from_vec(du.clone()))[0];
                    // ∫ ∇u·∇v for single monomials
                    let (_, ua, ub) = u[0];
                    let (_, va, vb) = v[0];
                    let mut exact = 0.0;
                    if ua > 0 && va > 0 {
                        exact += (ua * va) as f64 * monomial_integral(&pts, ua + va - 2, ub + vb);
                    }
                    if ub > 0 && vb > 0 {
                        exact += (ub * vb) as f64 * monomial_integral(&pts, ua + va, ub + vb - 2);
                    }
                    assert!((a - exact).abs() < 1e-10 * exact.abs().max(1.0), "k={k}: {a} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn projector_orthogonality() {
        // a_E(v, m_α) = ∫∇Π∇v·∇m_α, since the stabilization vanishes on P_k
        let pts = pentagon_with_aligned_vertex();
        for k in 1..=4 {
            let el = build_element(&pts, k, 3.0).unwrap();
            let v: Vec<f64> = (0..el.ndof()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
            let vd = DVector::from_vec(v.clone());
            let c = DVector::from_vec(el.project(&v));
            let lhs = (&el.dof_of_monomials.transpose() * &el.stiffness) * &vd;
            let rhs = &el.grad_gram * &c * 3.0;
            assert!((&lhs - &rhs).amax() < 1e-10 * rhs.amax(), "k={k}");
            // Π∇ is a projector onto P_k
            let back = &el.pi_nabla * (&el.dof_of_monomials * &c);
            assert!((back - &c).amax() < 1e-10 * c.amax(), "k={k}");
        }
    }

    #[test]
    fn load_of_constant_forcing() {
        let el = build_element(&square(), 2, 1.0).unwrap();
        let b = el.local_load(|_| 1.0);
        let ones = dofs_of(&el, &[(1.0, 0, 0)]);
        let total: f64 = b.iter().zip(&ones).map(|(x, y)| x * y).sum();
        assert!((total - 1.0).abs() < 1e-13);
        assert!(el.local_load(|_| 0.0).amax() == 0.0);
    }

    #[test]
    fn load_of_linear_forcing_on_triangle() {
        let t = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let el = build_element(&t, 2, 1.0).unwrap();
        let b = el.local_load(|p| p.x);
        // for v ∈ P_2, Σ b_r dof_r(v) = ∫ x Π⁰_1 v = ∫ x v when v ∈ P_1
        for (u, exact) in [
            (vec![(1.0, 0, 0)], 1.0 / 6.0),
            (vec![(1.0, 1, 0)], 1.0 / 12.0),
            (vec![(1.0, 0, 1)], 1.0 / 24.0),
        ] {
            let d = dofs_of(&el, &u);
            let got: f64 = b.iter().zip(&d).map(|(x, y)| x * y).sum();
            assert!((got - exact).abs() < 1e-14, "{got} vs {exact}");
        }
    }
}
