#![allow(dead_code)]

use dfnvem::dfn::{BoundaryCondition, Dfn, Expr, Forcing, Fracture, ProblemSpec};
use dfnvem::geometry::Polygon2;
use nalgebra::{Point2, Point3};

/// Counter-clockwise convex hull (monotone chain); collinear points dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Vec<Point2<f64>> {
    let mut p: Vec<Point2<f64>> = points.iter().map(|&(x, y)| Point2::new(x, y)).collect();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let turn = |o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>| (a - o).perp(&(b - o));
    let mut lower: Vec<Point2<f64>> = Vec::new();
    for q in &p {
        while lower.len() >= 2 && turn(&lower[lower.len() - 2], &lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(*q);
    }
    let mut upper: Vec<Point2<f64>> = Vec::new();
    for q in p.iter().rev() {
        while upper.len() >= 2 && turn(&upper[upper.len() - 2], &upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(*q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// A convex polygon that is not too thin, or `None`.
pub fn usable_polygon(points: &[(f64, f64)]) -> Option<Polygon2> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return None;
    }
    let poly = Polygon2::new(hull).ok()?;
    let d = poly.diameter();
    let min_edge = (0..poly.len())
        .map(|i| {
            let (a, b) = poly.edge(i);
            (b - a).norm()
        })
        .fold(f64::INFINITY, f64::min);
    (poly.area() > 1e-2 * d * d && min_edge > 1e-2 * d).then_some(poly)
}

/// Single fracture in the plane `z = 0` with Dirichlet data from `exact`.
pub fn single_fracture_problem(poly: &Polygon2, exact: &str) -> ProblemSpec {
    let pts: Vec<Point3<f64>> = poly.vertices().iter().map(|p| Point3::new(p.x, p.y, 0.0)).collect();
    let n = pts.len();
    let f = Fracture::new(0, pts, 1.0).unwrap();
    let e = Expr::parse(exact).unwrap();
    let dfn = Dfn::new(vec![f], vec![vec![BoundaryCondition::dirichlet(e.clone()); n]]).unwrap();
    ProblemSpec::new("single", dfn, vec![Forcing::FromExact], vec![Some(e)]).unwrap()
}

/// Replaces data of `base` with a global solution `exact` of `x, y, z`.
pub fn with_global_solution(base: &ProblemSpec, exact: &str) -> ProblemSpec {
    let e = Expr::parse(exact).unwrap();
    let mut spec = base.clone();
    for (i, bcs) in spec.dfn.boundary.iter_mut().enumerate() {
        for bc in bcs.iter_mut() {
            *bc = BoundaryCondition::dirichlet(e.clone());
        }
        spec.forcing[i] = Forcing::FromExact;
        spec.exact[i] = Some(e.clone());
    }
    spec
}

/// Polynomial of total degree `k` in `x, y, z` with fixed pseudo-random
/// coefficients.
pub fn polynomial_source(k: usize, seed: u64) -> String {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 33) as f64 / (1u64 << 31) as f64) * 2.0 - 1.0
    };
    let mut terms = Vec::new();
    for a in 0..=k {
        for b in 0..=(k - a) {
            for c in 0..=(k - a - b) {
                terms.push(format!("({:.6}) * x^{a} * y^{b} * z^{c}", next()));
            }
        }
    }
    terms.join(" + ")
}
