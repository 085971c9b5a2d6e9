//! Verification networks with closed-form hydraulic heads.
//!
//! In both problems every fracture has unit transmissivity, the whole
//! boundary is Dirichlet with the exact head as data, and the forcing is
//! `f = −Δh` on each fracture.
//!
//! The angular factors are polar angles measured in the fracture plane from
//! the x axis, so the heads vanish on the traces where the angle jumps and
//! the conormal derivative jumps balance between the two incident fractures.

use nalgebra::Point3;

use super::{BoundaryCondition, Dfn, DfnError, Expr, Forcing, Fracture, ProblemSpec, Result};

const P1_H1: &str = "(x^2 - 1) * (y^2 - 1) * (x^2 + y^2) * cos(0.5 * atan2(x, y))";
const P1_H2: &str = "-(z^2 - 1) * (x^2 - 1) * (x^2 + z^2) * cos(0.5 * atan2(x, z))";
const P2_H1: &str = "-0.1 * (x + 0.5) * (8 * x * y * (x^2 + y^2) * atan2(x, y) + x^3)";
const P2_H2: &str = "-0.1 * (x + 0.5) * x^3 * (1 - 8 * pi * abs(z))";
const P2_H3: &str = "y * (y - 1) * (y + 1) * (z - 1) * z";

fn rect(pts: [[f64; 3]; 4]) -> Vec<Point3<f64>> {
    pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
}

fn manufactured(name: &str, polys: Vec<Vec<Point3<f64>>>, heads: &[&str]) -> Result<ProblemSpec> {
    let exact: Vec<Expr> = heads
        .iter()
        .map(|s| Expr::parse(s).expect("builtin expression"))
        .collect();
    let fractures = polys
        .into_iter()
        .enumerate()
        .map(|(i, p)| Fracture::new(i, p, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let boundary = fractures
        .iter()
        .zip(&exact)
        .map(|(f, h)| vec![BoundaryCondition::dirichlet(h.clone()); f.polygon3d.len()])
        .collect();
    let dfn = Dfn::new(fractures, boundary)?;
    let n = exact.len();
    ProblemSpec::new(
        name,
        dfn,
        vec![Forcing::FromExact; n],
        exact.into_iter().map(Some).collect(),
    )
}

/// `problem1`: two fractures, one trace with an interior tip.
/// `problem2`: three fractures, three traces.
pub fn builtin_problem(name: &str) -> Result<ProblemSpec> {
    match name {
        "problem1" => manufactured(
            name,
            vec![
                rect([
                    [-1.0, -1.0, 0.0],
                    [1.0, -1.0, 0.0],
                    [1.0, 1.0, 0.0],
                    [-1.0, 1.0, 0.0],
                ]),
                rect([
                    [-1.0, 0.0, -1.0],
                    [0.0, 0.0, -1.0],
                    [0.0, 0.0, 1.0],
                    [-1.0, 0.0, 1.0],
                ]),
            ],
            &[P1_H1, P1_H2],
        ),
        "problem2" => manufactured(
            name,
            vec![
                rect([
                    [-1.0, -1.0, 0.0],
                    [0.5, -1.0, 0.0],
                    [0.5, 1.0, 0.0],
                    [-1.0, 1.0, 0.0],
                ]),
                rect([
                    [-1.0, 0.0, -1.0],
                    [0.0, 0.0, -1.0],
                    [0.0, 0.0, 1.0],
                    [-1.0, 0.0, 1.0],
                ]),
                rect([
                    [-0.5, -1.0, -1.0],
                    [-0.5, 1.0, -1.0],
                    [-0.5, 1.0, 1.0],
                    [-0.5, -1.0, 1.0],
                ]),
            ],
            &[P2_H1, P2_H2, P2_H3],
        ),
        other => Err(DfnError::UnknownProblem(other.to_string())),
    }
}

/// Hand-coded heads of the builtin problems, independent of the expression
/// evaluator.
pub fn native_exact(name: &str, frac: usize, p: &Point3<f64>) -> Option<f64> {
    let (x, y, z) = (p.x, p.y, p.z);
    match (name, frac) {
        ("problem1", 0) => {
            Some((x * x - 1.0) * (y * y - 1.0) * (x * x + y * y) * (0.5 * y.atan2(x)).cos())
        }
        ("problem1", 1) => {
            Some(-(z * z - 1.0) * (x * x - 1.0) * (x * x + z * z) * (0.5 * z.atan2(x)).cos())
        }
        ("problem2", 0) => Some(
            -0.1 * (x + 0.5) * (8.0 * x * y * (x * x + y * y) * y.atan2(x) + x.powi(3)),
        ),
        ("problem2", 1) => {
            Some(-0.1 * (x + 0.5) * x.powi(3) * (1.0 - 8.0 * std::f64::consts::PI * z.abs()))
        }
        ("problem2", 2) => Some(y * (y - 1.0) * (y + 1.0) * (z - 1.0) * z),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Point2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn problem1_layout() {
        let p = builtin_problem("problem1").unwrap();
        assert_eq!(p.dfn.fractures.len(), 2);
        assert_eq!(p.dfn.traces.len(), 1);
        let s = p.dfn.traces[0].segment3d;
        let xs = [s.a.x.min(s.b.x), s.a.x.max(s.b.x)];
        assert!((xs[0] + 1.0).abs() < 1e-14 && xs[1].abs() < 1e-14);
        for q in [s.a, s.b] {
            assert!(q.y.abs() < 1e-14 && q.z.abs() < 1e-14);
        }
    }

    #[test]
    fn problem2_layout() {
        let p = builtin_problem("problem2").unwrap();
        assert_eq!(p.dfn.fractures.len(), 3);
        assert_eq!(p.dfn.traces.len(), 3);
    }

    #[test]
    fn unknown_problem() {
        assert!(matches!(
            builtin_problem("problem9"),
            Err(DfnError::UnknownProblem(_))
        ));
    }

    #[test]
    fn problem1_head_values() {
        let p = builtin_problem("problem1").unwrap();
        let f1 = &p.dfn.fractures[0];
        let q = f1.frame.to_local(&Point3::new(0.5, 0.5, 0.0));
        let h = p.exact_at(0, &q).unwrap();
        let expected = (0.25 - 1.0) * (0.25 - 1.0) * 0.5 * (std::f64::consts::PI / 8.0).cos();
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.259842).abs() < 1e-6);
        for t in [-1.0, -0.3, 0.2, 0.9, 1.0] {
            for g in [
                Point3::new(1.0, t, 0.0),
                Point3::new(-1.0, t, 0.0),
                Point3::new(t, 1.0, 0.0),
                Point3::new(t, -1.0, 0.0),
            ] {
                assert!(p.exact_at(0, &f1.frame.to_local(&g)).unwrap().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn problem2_h3_vanishes_on_y_zero() {
        let p = builtin_problem("problem2").unwrap();
        let f3 = &p.dfn.fractures[2];
        for z in [-0.9, -0.1, 0.4, 0.8] {
            let q = f3.frame.to_local(&Point3::new(-0.5, 0.0, z));
            assert_eq!(p.exact_at(2, &q).unwrap(), 0.0);
        }
    }

    #[test]
    fn heads_are_continuous_across_traces() {
        for name in ["problem1", "problem2"] {
            let p = builtin_problem(name).unwrap();
            for t in &p.dfn.traces {
                for s in [0.1, 0.37, 0.5, 0.81] {
                    let g = t.segment3d.at(s);
                    let [i, j] = t.fractures;
                    let hi = p.exact_at(i, &p.dfn.fractures[i].frame.to_local(&g)).unwrap();
                    let hj = p.exact_at(j, &p.dfn.fractures[j].frame.to_local(&g)).unwrap();
                    assert!((hi - hj).abs() < 1e-13, "{name} trace {}: {hi} vs {hj}", t.id);
                }
            }
        }
    }

    #[test]
    fn expression_heads_match_native_code() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["problem1", "problem2"] {
            let p = builtin_problem(name).unwrap();
            for (i, f) in p.dfn.fractures.iter().enumerate() {
                for _ in 0..50 {
                    let q = Point2::new(rng.random_range(0.0..1.5), rng.random_range(0.0..2.0));
                    let g = f.frame.to_global(&q);
                    let a = p.exact_at(i, &q).unwrap();
                    let b = native_exact(name, i, &g).unwrap();
                    assert!((a - b).abs() < 1e-13);
                }
            }
        }
    }

    /// Fourth-order central second differences of the native heads.
    fn fd_laplacian(name: &str, frac: usize, p: &ProblemSpec, q: &Point2<f64>) -> f64 {
        let h = 1e-3;
        let fr = &p.dfn.fractures[frac].frame;
        let f = |du: f64, dv: f64| {
            native_exact(name, frac, &fr.to_global(&Point2::new(q.x + du, q.y + dv))).unwrap()
        };
        let c = f(0.0, 0.0);
        let second = |a: f64, b: f64, c2: f64, d: f64| (-a + 16.0 * b - 30.0 * c + 16.0 * c2 - d) / (12.0 * h * h);
        second(f(2.0 * h, 0.0), f(h, 0.0), f(-h, 0.0), f(-2.0 * h, 0.0))
            + second(f(0.0, 2.0 * h), f(0.0, h), f(0.0, -h), f(0.0, -2.0 * h))
    }

    #[test]
    fn forcing_satisfies_manufactured_relation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in ["problem1", "problem2"] {
            let p = builtin_problem(name).unwrap();
            for (i, f) in p.dfn.fractures.iter().enumerate() {
                let poly = &f.polygon2d;
                let mut checked = 0;
                while checked < 20 {
                    let q = Point2::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
                    // stay clear of the boundary and of the kinks on traces
                    if !poly.contains(&q, -0.05) {
                        continue;
                    }
                    if p.dfn.traces_of(i).any(|t| {
                        let s = t.segment_on(i);
                        s.distance_to_line(&q) < 0.05
                    }) {
                        continue;
                    }
                    let lap = fd_laplacian(name, i, &p, &q);
                    let fv = p.forcing_at(i, &q);
                    let k = f.transmissivity;
                    assert!(
                        (fv + k * lap).abs() < 1e-8,
                        "{name} fracture {i} at {q:?}: f = {fv}, -KΔh = {}",
                        -k * lap
                    );
                    checked += 1;
                }
            }
        }
    }
}
