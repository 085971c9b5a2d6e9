//! Random networks of convex fractures in a box, driven by a head drop
//! between the faces `x = x_min` and `x = x_max`.
//!
//! Candidates are rejection-sampled so that the network is connected and
//! free of near-degenerate configurations (grazing planes, tiny traces,
//! trace tips close to vertices, edges or other traces) that would only
//! produce slivers in the minimal mesh.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, UnitSphere};

use super::{BoundaryCondition, Dfn, Expr, Forcing, Fracture, ProblemSpec, Result};
use crate::geometry::{build_frame, intersect_fractures, Segment3, TOL_GEOM};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_fractures: usize,
    pub domain_min: [f64; 3],
    pub domain_max: [f64; 3],
    /// Standard deviation of the log-normal transmissivity (mean 1).
    pub sigma: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_fractures: 20,
            domain_min: [0.0; 3],
            domain_max: [1000.0; 3],
            sigma: 10.0,
        }
    }
}

const MAX_ATTEMPTS: usize = 200_000;
const HEAD_INLET: f64 = 10.0;
const HEAD_OUTLET: f64 = 0.0;

struct Candidate {
    verts: Vec<Point3<f64>>,
    normal: Vector3<f64>,
    diam: f64,
}

fn diameter(p: &[Point3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in p.iter().enumerate() {
        for b in &p[i + 1..] {
            d = d.max((b - a).norm());
        }
    }
    d
}

/// Sutherland–Hodgman clip of a planar polygon against `s·(p[axis] − c) ≤ 0`.
fn clip(poly: &[Point3<f64>], axis: usize, c: f64, s: f64) -> Vec<Point3<f64>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = s * (p[axis] - c);
        let dq = s * (q[axis] - c);
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            let mut x = p + (q - p) * t;
            x[axis] = c;
            out.push(x);
        }
    }
    out
}

fn segment_point_distance(a: &Point3<f64>, b: &Point3<f64>, p: &Point3<f64>) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - p).norm()
}

fn boundary_distance(poly: &[Point3<f64>], p: &Point3<f64>) -> f64 {
    (0..poly.len())
        .map(|i| segment_point_distance(&poly[i], &poly[(i + 1) % poly.len()], p))
        .fold(f64::INFINITY, f64::min)
}

struct Sampler<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    extent: f64,
}

impl Sampler<'_> {
    fn candidate(&mut self) -> Option<Candidate> {
        let (lo, hi) = (self.cfg.domain_min, self.cfg.domain_max);
        let centre = Point3::new(
            self.rng.random_range(lo[0]..hi[0]),
            self.rng.random_range(lo[1]..hi[1]),
            self.rng.random_range(lo[2]..hi[2]),
        );
        let radius = self.rng.random_range(0.25..0.55) * self.extent;
        let n: [f64; 3] = UnitSphere.sample(&mut self.rng);
        let normal = Vector3::from(n);
        let helper = if normal.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let u = normal.cross(&helper).normalize();
        let v = normal.cross(&u);
        let m = self.rng.random_range(6..=8);
        let step = std::f64::consts::TAU / m as f64;
        let phase = self.rng.random_range(0.0..step);
        let mut verts: Vec<Point3<f64>> = (0..m)
            .map(|j| {
                let a = phase + step * (j as f64 + self.rng.random_range(-0.25..0.25));
                centre + (u * a.cos() + v * a.sin()) * radius
            })
            .collect();
        for axis in 0..3 {
            verts = clip(&verts, axis, lo[axis], -1.0);
            verts = clip(&verts, axis, hi[axis], 1.0);
            if verts.len() < 3 {
                return None;
            }
        }
        let diam = diameter(&verts);
        let nv = verts.len();
        for i in 0..nv {
            let e = (verts[(i + 1) % nv] - verts[i]).norm();
            if e < 0.05 * diam {
                return None;
            }
            // interior angle close to π: a clipped vertex on a nearly straight boundary
            let a = verts[(i + nv - 1) % nv] - verts[i];
            let b = verts[(i + 1) % nv] - verts[i];
            if a.normalize().dot(&b.normalize()) < -0.995 {
                return None;
            }
        }
        if diam < 0.2 * self.extent {
            return None;
        }
        Some(Candidate {
            verts,
            normal,
            diam,
        })
    }
}

fn touches_face(c: &Candidate, axis: usize, value: f64, extent: f64) -> bool {
    let n = c.verts.len();
    (0..n).any(|i| {
        let (p, q) = (c.verts[i], c.verts[(i + 1) % n]);
        (p[axis] - value).abs() <= TOL_GEOM * extent
            && (q[axis] - value).abs() <= TOL_GEOM * extent
            && (q - p).norm() >= 0.1 * c.diam
    })
}

/// Traces accepted so far, stored per fracture.
struct TraceBook {
    per_frac: Vec<Vec<Segment3>>,
}

fn trace_is_clean(a: &Candidate, b: &Candidate, s: &Segment3) -> bool {
    if a.normal.dot(&b.normal).abs() > 25f64.to_radians().cos() {
        return false;
    }
    let dmin = a.diam.min(b.diam);
    if s.length() < 0.15 * dmin {
        return false;
    }
    let delta = 0.04 * dmin;
    for c in [a, b] {
        let tol = 1e-6 * c.diam;
        for e in [s.a, s.b] {
            if c.verts.iter().any(|v| (v - e).norm() < delta) {
                return false;
            }
            let d = boundary_distance(&c.verts, &e);
            if d > tol && d < delta {
                return false;
            }
        }
    }
    true
}

fn traces_compatible(existing: &[Segment3], s: &Segment3, diam: f64) -> bool {
    let delta = 0.04 * diam;
    let sin_min = 15f64.to_radians().sin();
    let ds = (s.b - s.a).normalize();
    existing.iter().all(|t| {
        let dt = (t.b - t.a).normalize();
        if ds.cross(&dt).norm() < sin_min {
            return false;
        }
        for e in [s.a, s.b] {
            if segment_point_distance(&t.a, &t.b, &e) < delta {
                return false;
            }
        }
        for e in [t.a, t.b] {
            if segment_point_distance(&s.a, &s.b, &e) < delta {
                return false;
            }
        }
        true
    })
}

/// Deterministic for a fixed configuration. Panics only if no admissible
/// network is found within a large attempt budget.
pub fn generate_synthetic_dfn(cfg: &SyntheticConfig) -> Result<ProblemSpec> {
    assert!(cfg.n_fractures >= 1, "need at least one fracture");
    let extent = (0..3)
        .map(|a| cfg.domain_max[a] - cfg.domain_min[a])
        .fold(f64::INFINITY, f64::min);
    let mut sampler = Sampler {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        extent,
    };
    let (xmin, xmax) = (cfg.domain_min[0], cfg.domain_max[0]);
    let mut accepted: Vec<Candidate> = Vec::new();
    let mut book = TraceBook {
        per_frac: Vec::new(),
    };
    let mut outlet_reached = false;

    for i in 0..cfg.n_fractures {
        let last = i + 1 == cfg.n_fractures;
        let mut found = false;
        for _ in 0..MAX_ATTEMPTS {
            let Some(c) = sampler.candidate() else {
                continue;
            };
            let at_outlet = touches_face(&c, 0, xmax, extent);
            if i == 0 && !touches_face(&c, 0, xmin, extent) {
                continue;
            }
            if last && !outlet_reached && !at_outlet {
                continue;
            }
            let Ok(frame) = build_frame(&c.verts) else {
                continue;
            };
            let mut new_traces: Vec<(usize, Segment3)> = Vec::new();
            let mut ok = true;
            for (j, a) in accepted.iter().enumerate() {
                let fa = build_frame(&a.verts).expect("accepted fracture");
                match intersect_fractures(&a.verts, &fa, &c.verts, &frame, TOL_GEOM) {
                    Err(_) => ok = false,
                    Ok(None) => {}
                    Ok(Some(s)) => {
                        if !trace_is_clean(a, &c, &s)
                            || !traces_compatible(&book.per_frac[j], &s, a.diam)
                        {
                            ok = false;
                        } else {
                            new_traces.push((j, s));
                        }
                    }
                }
                if !ok {
                    break;
                }
            }
            if !ok || (i > 0 && new_traces.is_empty()) {
                continue;
            }
            // traces on the candidate itself must be mutually compatible
            let own: Vec<Segment3> = new_traces.iter().map(|(_, s)| *s).collect();
            if (1..own.len()).any(|k| !traces_compatible(&own[..k], &own[k], c.diam)) {
                continue;
            }
            for (j, s) in new_traces {
                book.per_frac[j].push(s);
            }
            book.per_frac.push(own);
            outlet_reached |= at_outlet;
            accepted.push(c);
            found = true;
            break;
        }
        assert!(found, "synthetic DFN: no admissible fracture {i} found");
    }

    let dist = LogNormal::from_mean_cv(1.0, cfg.sigma).expect("valid log-normal parameters");
    let mut fractures = Vec::with_capacity(accepted.len());
    let mut boundary = Vec::with_capacity(accepted.len());
    for (i, c) in accepted.into_iter().enumerate() {
        let k: f64 = dist.sample(&mut sampler.rng);
        let n = c.verts.len();
        let on = |v: f64, p: &Point3<f64>| (p.x - v).abs() <= TOL_GEOM * extent;
        let bcs = (0..n)
            .map(|e| {
                let (p, q) = (&c.verts[e], &c.verts[(e + 1) % n]);
                if on(xmin, p) && on(xmin, q) {
                    BoundaryCondition::dirichlet(Expr::constant(HEAD_INLET))
                } else if on(xmax, p) && on(xmax, q) {
                    BoundaryCondition::dirichlet(Expr::constant(HEAD_OUTLET))
                } else {
                    BoundaryCondition::homogeneous_neumann()
                }
            })
            .collect();
        fractures.push(Fracture::new(i, c.verts, k)?);
        boundary.push(bcs);
    }
    let n = fractures.len();
    let dfn = Dfn::new(fractures, boundary)?;
    ProblemSpec::new(
        format!("synthetic-{}", cfg.seed),
        dfn,
        vec![Forcing::Zero; n],
        vec![None; n],
    )
}
