//! Planar and 3D polygon primitives.
//!
//! Fractures are planar convex polygons embedded in 3D. Every 3D polygon gets
//! an orthonormal [`Frame3`] so that meshing and discretization can run in the
//! fracture plane. All snap and containment decisions use [`TOL_GEOM`] scaled
//! by a local diameter, so results do not depend on absolute coordinates.

use nalgebra::{Matrix2, Point2, Point3, Vector2, Vector3};
use thiserror::Error;

/// Relative geometric tolerance, multiplied by a local diameter.
pub const TOL_GEOM: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("points are not coplanar (distance {distance:e} exceeds {limit:e})")]
    NonPlanarInput { distance: f64, limit: f64 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("fractures are coplanar")]
    CoplanarFractures,
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Counter-clockwise convex polygon in a fracture plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2 {
    vertices: Vec<Point2<f64>>,
}

impl Polygon2 {
    /// Validates vertex count, orientation, convexity and vertex spacing.
    pub fn new(vertices: Vec<Point2<f64>>) -> Result<Self> {
        let poly = Self { vertices };
        poly.validate()?;
        Ok(poly)
    }

    /// Wraps vertices without validation. Callers guarantee the invariants.
    pub fn new_unchecked(vertices: Vec<Point2<f64>>) -> Self {
        Self { vertices }
    }

    fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if n < 3 {
            return Err(GeometryError::InvalidPolygon(format!("{n} vertices")));
        }
        let diam = self.diameter();
        if diam <= 0.0 {
            return Err(GeometryError::InvalidPolygon("zero diameter".into()));
        }
        for i in 0..n {
            let d = (self.vertices[(i + 1) % n] - self.vertices[i]).norm();
            if d <= TOL_GEOM * diam {
                return Err(GeometryError::InvalidPolygon(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        if self.signed_area() <= 0.0 {
            return Err(GeometryError::InvalidPolygon("not counter-clockwise".into()));
        }
        if !self.is_convex(TOL_GEOM) {
            return Err(GeometryError::InvalidPolygon("not convex".into()));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> (Point2<f64>, Point2<f64>) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        0.5 * a
    }

    /// Zero-turn (aligned) vertices are admitted.
    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        let diam = self.diameter();
        let limit = -tol * diam * diam;
        (0..n).all(|i| {
            let e0 = self.vertices[(i + 1) % n] - self.vertices[i];
            let e1 = self.vertices[(i + 2) % n] - self.vertices[(i + 1) % n];
            cross(&e0, &e1) >= limit
        })
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, p) in self.vertices.iter().enumerate() {
            for q in &self.vertices[i + 1..] {
                d = d.max((q - p).norm());
            }
        }
        d
    }

    /// Centroid and area from the shoelace formulas.
    pub fn centroid_area(&self) -> (Point2<f64>, f64) {
        let n = self.vertices.len();
        // shift to the first vertex to limit cancellation
        let o = self.vertices[0];
        let mut a = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        for i in 0..n {
            let p = self.vertices[i] - o;
            let q = self.vertices[(i + 1) % n] - o;
            let c = p.x * q.y - q.x * p.y;
            a += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        let area = 0.5 * a;
        let centroid = Point2::new(o.x + cx / (3.0 * a), o.y + cy / (3.0 * a));
        (centroid, area)
    }

    pub fn centroid(&self) -> Point2<f64> {
        self.centroid_area().0
    }

    pub fn area(&self) -> f64 {
        self.centroid_area().1
    }

    /// Inertia tensor about the centroid,
    /// `[[∫(y−y_c)², −∫(x−x_c)(y−y_c)], [−∫(x−x_c)(y−y_c), ∫(x−x_c)²]]`.
    pub fn inertia_tensor(&self) -> Matrix2<f64> {
        let (c, _) = self.centroid_area();
        let n = self.vertices.len();
        let (mut ixx, mut iyy, mut ixy) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let p = self.vertices[i] - c;
            let q = self.vertices[(i + 1) % n] - c;
            let w = p.x * q.y - q.x * p.y;
            ixx += (p.x * p.x + p.x * q.x + q.x * q.x) * w;
            iyy += (p.y * p.y + p.y * q.y + q.y * q.y) * w;
            ixy += (p.x * q.y + 2.0 * p.x * p.y + 2.0 * q.x * q.y + q.x * p.y) * w;
        }
        ixx /= 12.0;
        iyy /= 12.0;
        ixy /= 24.0;
        Matrix2::new(iyy, -ixy, -ixy, ixx)
    }

    /// `max |v_i − X_c| / min dist(X_c, edge line)`.
    pub fn aspect_ratio(&self) -> f64 {
        let c = self.centroid();
        let n = self.vertices.len();
        let rmax = self
            .vertices
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max);
        let mut rmin = f64::INFINITY;
        for i in 0..n {
            let (a, b) = self.edge(i);
            let e = b - a;
            let d = cross(&e, &(c - a)).abs() / e.norm();
            rmin = rmin.min(d);
        }
        rmax / rmin
    }

    /// Vertex average, the "center of mass of the vertices".
    pub fn vertex_mean(&self) -> Point2<f64> {
        let s = self
            .vertices
            .iter()
            .fold(Vector2::zeros(), |acc, v| acc + v.coords);
        Point2::from(s / self.vertices.len() as f64)
    }

    pub fn contains(&self, p: &Point2<f64>, tol: f64) -> bool {
        let n = self.vertices.len();
        let diam = self.diameter();
        (0..n).all(|i| {
            let (a, b) = self.edge(i);
            let e = b - a;
            cross(&e, &(p - a)) / e.norm() >= -tol * diam
        })
    }
}

/// 2D cross product (z component).
#[inline]
pub fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2 {
    pub a: Point2<f64>,
    pub b: Point2<f64>,
}

impl Segment2 {
    pub fn new(a: Point2<f64>, b: Point2<f64>) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn direction(&self) -> Vector2<f64> {
        (self.b - self.a).normalize()
    }

    /// Parameter of the orthogonal projection of `p` (0 at `a`, 1 at `b`).
    pub fn param(&self, p: &Point2<f64>) -> f64 {
        let e = self.b - self.a;
        (p - self.a).dot(&e) / e.norm_squared()
    }

    pub fn distance_to_line(&self, p: &Point2<f64>) -> f64 {
        let e = self.b - self.a;
        cross(&e, &(p - self.a)).abs() / e.norm()
    }

    pub fn at(&self, t: f64) -> Point2<f64> {
        self.a + (self.b - self.a) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment3 {
    pub a: Point3<f64>,
    pub b: Point3<f64>,
}

impl Segment3 {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    pub fn param(&self, p: &Point3<f64>) -> f64 {
        let e = self.b - self.a;
        (p - self.a).dot(&e) / e.norm_squared()
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.a + (self.b - self.a) * t
    }
}

/// Orthonormal frame of a fracture plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame3 {
    pub origin: Point3<f64>,
    pub basis_u: Vector3<f64>,
    pub basis_v: Vector3<f64>,
    pub normal: Vector3<f64>,
}

impl Frame3 {
    pub fn to_local(&self, p: &Point3<f64>) -> Point2<f64> {
        let d = p - self.origin;
        Point2::new(d.dot(&self.basis_u), d.dot(&self.basis_v))
    }

    pub fn to_global(&self, p: &Point2<f64>) -> Point3<f64> {
        self.origin + self.basis_u * p.x + self.basis_v * p.y
    }

    pub fn direction_to_local(&self, d: &Vector3<f64>) -> Vector2<f64> {
        Vector2::new(d.dot(&self.basis_u), d.dot(&self.basis_v))
    }

    pub fn direction_to_global(&self, d: &Vector2<f64>) -> Vector3<f64> {
        self.basis_u * d.x + self.basis_v * d.y
    }

    /// Signed distance of `p` from the plane.
    pub fn plane_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal)
    }
}

fn diameter3(points: &[Point3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((q - p).norm());
        }
    }
    d
}

/// Frame with origin at the first point, `basis_u` along the first edge and
/// the normal oriented by the vertex ordering (Newell's method), so the
/// polygon maps to a counter-clockwise 2D polygon.
pub fn build_frame(points: &[Point3<f64>]) -> Result<Frame3> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "{} points",
            points.len()
        )));
    }
    let diam = diameter3(points);
    if diam <= 0.0 {
        return Err(GeometryError::DegenerateInput("coincident points".into()));
    }
    let n = points.len();
    let mut newell: Vector3<f64> = Vector3::zeros();
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        newell.x += (p.y - q.y) * (p.z + q.z);
        newell.y += (p.z - q.z) * (p.x + q.x);
        newell.z += (p.x - q.x) * (p.y + q.y);
    }
    let nn = newell.norm();
    if nn <= TOL_GEOM * diam * diam {
        return Err(GeometryError::DegenerateInput("collinear points".into()));
    }
    let normal: Vector3<f64> = newell / nn;
    let origin = points[0];
    let first: Vector3<f64> = points
        .iter()
        .skip(1)
        .map(|p| p - origin)
        .find(|e| e.norm() > TOL_GEOM * diam)
        .ok_or_else(|| GeometryError::DegenerateInput("coincident points".into()))?;
    let basis_u = (first - normal * first.dot(&normal)).normalize();
    let basis_v = normal.cross(&basis_u);
    let frame = Frame3 {
        origin,
        basis_u,
        basis_v,
        normal,
    };
    let limit = TOL_GEOM * diam;
    let distance = points
        .iter()
        .map(|p| frame.plane_distance(p).abs())
        .fold(0.0, f64::max);
    if distance > limit {
        return Err(GeometryError::NonPlanarInput { distance, limit });
    }
    Ok(frame)
}

/// Intersection of a line with the boundary of a polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineHit {
    pub point: Point2<f64>,
    /// Host edge index (edge `i` runs from vertex `i` to `i + 1`).
    pub edge: usize,
    /// Parameter along the host edge, in `[0, 1]`.
    pub t: f64,
    /// Signed position along the line, in units of `|direction|`.
    pub lambda: f64,
}

/// Boundary intersections of the line `point + λ·direction` with a convex
/// polygon, sorted by `λ`. A vertex hit is reported once, on the first edge
/// (in loop order) that contains it.
pub fn intersect_coplanar_line(
    poly: &Polygon2,
    point: &Point2<f64>,
    direction: &Vector2<f64>,
) -> Vec<LineHit> {
    let verts = poly.vertices();
    let n = verts.len();
    let diam = poly.diameter();
    let dn = direction.norm();
    let tol = TOL_GEOM * diam;
    let s: Vec<f64> = verts
        .iter()
        .map(|v| {
            let val = cross(direction, &(v - point)) / dn;
            if val.abs() <= tol {
                0.0
            } else {
                val
            }
        })
        .collect();
    let mut hits: Vec<LineHit> = Vec::with_capacity(2);
    let lambda_of = |p: &Point2<f64>| (p - point).dot(direction) / (dn * dn);
    let push = |hits: &mut Vec<LineHit>, p: Point2<f64>, edge: usize, t: f64| {
        if hits.iter().all(|h| (h.point - p).norm() > tol) {
            hits.push(LineHit {
                point: p,
                edge,
                t,
                lambda: lambda_of(&p),
            });
        }
    };
    for i in 0..n {
        let j = (i + 1) % n;
        if s[i] == 0.0 {
            push(&mut hits, verts[i], i, 0.0);
        } else if s[j] == 0.0 {
            push(&mut hits, verts[j], i, 1.0);
        } else if s[i] * s[j] < 0.0 {
            let t = s[i] / (s[i] - s[j]);
            let p = verts[i] + (verts[j] - verts[i]) * t;
            push(&mut hits, p, i, t);
        }
    }
    hits.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    hits
}

/// Parameter interval `[λ0, λ1]` of the line inside a convex polygon.
fn clip_line(poly: &Polygon2, point: &Point2<f64>, dir: &Vector2<f64>) -> Option<(f64, f64)> {
    let hits = intersect_coplanar_line(poly, point, dir);
    if hits.len() < 2 {
        return None;
    }
    Some((hits[0].lambda, hits[hits.len() - 1].lambda))
}

/// Trace between two planar convex fractures, if any.
pub fn intersect_fractures(
    poly1: &[Point3<f64>],
    frame1: &Frame3,
    poly2: &[Point3<f64>],
    frame2: &Frame3,
    tol_geom: f64,
) -> Result<Option<Segment3>> {
    let diam = diameter3(poly1).min(diameter3(poly2));
    let n1 = frame1.normal;
    let n2 = frame2.normal;
    let d = n1.cross(&n2);
    if d.norm() <= tol_geom {
        if frame1.plane_distance(&frame2.origin).abs() <= tol_geom * diam {
            return Err(GeometryError::CoplanarFractures);
        }
        return Ok(None);
    }
    let h1 = n1.dot(&frame1.origin.coords);
    let h2 = n2.dot(&frame2.origin.coords);
    let d2 = d.norm_squared();
    let p0 = Point3::from((n2.cross(&d) * h1 + d.cross(&n1) * h2) / d2);
    let dir = d / d2.sqrt();

    let mut range = (f64::NEG_INFINITY, f64::INFINITY);
    for (poly, frame) in [(poly1, frame1), (poly2, frame2)] {
        let local =
            Polygon2::new_unchecked(poly.iter().map(|p| frame.to_local(p)).collect());
        let (a, b) = match clip_line(
            &local,
            &frame.to_local(&p0),
            &frame.direction_to_local(&dir),
        ) {
            Some(r) => r,
            None => return Ok(None),
        };
        range = (range.0.max(a), range.1.min(b));
    }
    if range.1 - range.0 <= tol_geom * diam {
        return Ok(None);
    }
    Ok(Some(Segment3 {
        a: p0 + dir * range.0,
        b: p0 + dir * range.1,
    }))
}

/// Eigen-decomposition helper for symmetric 2×2 tensors: returns the unit
/// eigenvector of the largest eigenvalue, or `None` when the two eigenvalues
/// coincide (relative tolerance `1e-10`).
pub fn major_eigenvector(m: &Matrix2<f64>) -> Option<Vector2<f64>> {
    let (a, b, d) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let gap = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    if gap <= 1e-10 * (a.abs() + d.abs()) {
        return None;
    }
    let phi = 0.5 * (2.0 * b).atan2(a - d);
    Some(Vector2::new(phi.cos(), phi.sin()))
}

/// Flips a direction so that its first significant component is positive.
pub fn canonical_direction(v: Vector2<f64>) -> Vector2<f64> {
    let v = v.normalize();
    if v.x > 1e-12 || (v.x.abs() <= 1e-12 && v.y > 0.0) {
        v
    } else {
        -v
    }
}
