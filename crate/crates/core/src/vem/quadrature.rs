//! Gauss rules on intervals, triangles and convex polygons.

use std::sync::OnceLock;

use nalgebra::Point2;

/// Legendre polynomial `P_n(x)` and `P_{n−1}(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`, exact up to degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, pm) = legendre(n, z);
            let dp = nf * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (p, pm) = legendre(n, z);
        let dp = nf * (z * p - pm) / (z * z - 1.0);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// `n`-point Gauss–Lobatto rule on `[0, 1]` (endpoints included), exact up
/// to degree `2n − 3`. Nodes ascending.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let big_n = n - 1;
    let nf = big_n as f64;
    let mut x: Vec<f64> = (0..n)
        .map(|j| (std::f64::consts::PI * j as f64 / nf).cos())
        .collect();
    let mut pn = vec![0.0; n];
    for _ in 0..100 {
        let mut change: f64 = 0.0;
        for j in 0..n {
            let (p, pm) = legendre(big_n, x[j]);
            pn[j] = p;
            let dx = (x[j] * p - pm) / (nf + 1.0) / p;
            x[j] -= dx;
            change = change.max(dx.abs());
        }
        if change < 1e-16 {
            break;
        }
    }
    for j in 0..n {
        pn[j] = legendre(big_n, x[j]).0;
    }
    let mut nodes: Vec<(f64, f64)> = x
        .iter()
        .zip(&pn)
        .map(|(&z, &p)| (0.5 * (1.0 + z), 1.0 / (nf * (nf + 1.0) * p * p)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    nodes[0].0 = 0.0;
    nodes[n - 1].0 = 1.0;
    nodes.into_iter().unzip()
}

/// Collapsed Gauss rule on the reference triangle `(0,0), (1,0), (0,1)`,
/// exact for polynomials of total degree `d`. Weights sum to 1/2.
fn reference_triangle(d: usize) -> &'static [(f64, f64, f64)] {
    const MAX_DEGREE: usize = 40;
    static CACHE: OnceLock<Vec<Vec<(f64, f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        (0..=MAX_DEGREE)
            .map(|d| {
                let n = d.div_ceil(2) + 1;
                let (x, w) = gauss_legendre(n);
                let mut pts = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let xi = x[i];
                        pts.push((xi, x[j] * (1.0 - xi), w[i] * w[j] * (1.0 - xi)));
                    }
                }
                pts
            })
            .collect()
    });
    &cache[d.min(MAX_DEGREE)]
}

/// Quadrature points and weights on a convex polygon, exact for `P_d`:
/// the polygon is fanned into triangles from its centroid.
pub fn polygon_quadrature(points: &[Point2<f64>], d: usize) -> Vec<(Point2<f64>, f64)> {
    let poly = crate::geometry::Polygon2::new_unchecked(points.to_vec());
    let c = poly.centroid();
    let rule = reference_triangle(d);
    let n = points.len();
    let mut out = Vec::with_capacity(n * rule.len());
    for i in 0..n {
        let a = points[i] - c;
        let b = points[(i + 1) % n] - c;
        let jac = a.x * b.y - a.y * b.x;
        if jac <= 0.0 {
            continue;
        }
        for &(s, t, w) in rule {
            out.push((c + a * s + b * t, w * jac));
        }
    }
    out
}

/// Gauss–Legendre points on the segment `a → b`, exact for `P_d`, with
/// weights scaled by the segment length. Parameters in `[0, 1]` included.
pub fn segment_quadrature(
    a: &Point2<f64>,
    b: &Point2<f64>,
    d: usize,
) -> Vec<(f64, Point2<f64>, f64)> {
    let (x, w) = gauss_legendre(d / 2 + 1);
    let len = (b - a).norm();
    x.iter()
        .zip(&w)
        .map(|(&s, &wi)| (s, a + (b - a) * s, wi * len))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(pts: &[Point2<f64>], d: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        polygon_quadrature(pts, d)
            .iter()
            .map(|(p, w)| w * f(p.x, p.y))
            .sum()
    }

    fn unit_square() -> Vec<Point2<f64>> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn legendre_rules_are_exact() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for p in 0..2 * n {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn lobatto_rules_are_exact() {
        for n in 2..10 {
            let (x, w) = gauss_lobatto(n);
            assert_eq!(x[0], 0.0);
            assert_eq!(x[n - 1], 1.0);
            for p in 0..=(2 * n - 3) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p as i32)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "n={n} p={p}");
            }
        }
        let (x, _) = gauss_lobatto(3);
        assert!((x[1] - 0.5).abs() < 1e-15);
        let (x, _) = gauss_lobatto(4);
        assert!((x[1] - 0.5 * (1.0 - 1.0 / 5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn square_integrals() {
        let sq = unit_square();
        assert!((integrate(&sq, 0, |_, _| 1.0) - 1.0).abs() < 1e-15);
        assert!((integrate(&sq, 4, |x, y| x * x * y * y) - 1.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_monomials_up_to_degree_ten() {
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let t = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for d in 0..=10u32 {
            for a in 0..=d {
                let b = d - a;
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                let q = integrate(&t, d as usize, |x, y| x.powi(a as i32) * y.powi(b as i32));
                assert!((q - exact).abs() < 1e-15, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn pentagon_area_matches_shoelace() {
        let pts: Vec<Point2<f64>> = (0..5)
            .map(|i| {
                let a = 0.3 + std::f64::consts::TAU * i as f64 / 5.0;
                Point2::new(1.7 * a.cos() + 0.2, 1.7 * a.sin() - 3.0)
            })
            .collect();
        let area = crate::geometry::Polygon2::new(pts.clone()).unwrap().area();
        assert!((integrate(&pts, 0, |_, _| 1.0) - area).abs() < 1e-14);
    }

    #[test]
    fn segment_rule() {
        let q = segment_quadrature(&Point2::new(0.0, 0.0), &Point2::new(3.0, 4.0), 5);
        let s: f64 = q.iter().map(|(_, p, w)| w * p.x.powi(5)).sum();
        // ∫_0^1 (3s)^5 · 5 ds = 243 · 5 / 6
        assert!((s - 243.0 * 5.0 / 6.0).abs() < 1e-11);
    }
}
