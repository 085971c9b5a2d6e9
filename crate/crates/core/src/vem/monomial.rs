//! Scaled monomials `m_α(x) = ξ^α` with `ξ = J (x − x_E)`.
//!
//! On a cell `J` rotates to the principal axes and divides by the half
//! extents along them, so `ξ` covers about `[−1, 1]²` whatever the aspect
//! ratio. Plain isotropic scaling `J = I / h_E` loses about `2k` digits per
//! decade of aspect ratio in the Gram matrices.

use nalgebra::{Matrix2, Point2, Vector2};

/// Number of monomials of degree at most `k` (0 for negative `k`).
pub fn dim(k: i32) -> usize {
    if k < 0 {
        0
    } else {
        let k = k as usize;
        (k + 1) * (k + 2) / 2
    }
}

/// Exponents ordered by degree, then by decreasing power of `x`:
/// `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2), …`.
pub fn exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(dim(k as i32));
    for d in 0..=k as u32 {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Position of exponent `(a, b)` in [`exponents`].
pub fn index(a: u32, b: u32) -> usize {
    let d = (a + b) as usize;
    d * (d + 1) / 2 + b as usize
}

#[derive(Debug, Clone)]
pub struct MonomialBasis {
    pub center: Point2<f64>,
    /// `ξ = map · (x − center)`.
    pub map: Matrix2<f64>,
    pub k: usize,
    pub exps: Vec<(u32, u32)>,
}

impl MonomialBasis {
    /// Isotropic scaling by `h`.
    pub fn new(center: Point2<f64>, h: f64, k: usize) -> Self {
        Self::with_map(center, Matrix2::identity() / h, k)
    }

    pub fn with_map(center: Point2<f64>, map: Matrix2<f64>, k: usize) -> Self {
        Self {
            center,
            map,
            k,
            exps: exponents(k),
        }
    }

    /// Principal-axis scaling fitted to the vertices of a convex cell.
    pub fn for_cell(points: &[Point2<f64>], center: Point2<f64>, inertia: &Matrix2<f64>, k: usize) -> Self {
        let axes = inertia.symmetric_eigen().eigenvectors;
        let mut map = Matrix2::zeros();
        for i in 0..2 {
            let r = axes.column(i);
            let ext = points.iter().map(|p| (p - center).dot(&r).abs()).fold(0.0, f64::max);
            map.set_row(i, &(r.transpose() / ext));
        }
        Self::with_map(center, map, k)
    }

    /// Local coordinates `ξ` of `p`.
    pub fn local(&self, p: &Point2<f64>) -> Vector2<f64> {
        self.map * (p - self.center)
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn powers(&self, p: &Point2<f64>) -> (Vec<f64>, Vec<f64>) {
        let xi = self.local(p);
        let (x, y) = (xi.x, xi.y);
        let mut px = vec![1.0; self.k + 1];
        let mut py = vec![1.0; self.k + 1];
        for i in 1..=self.k {
            px[i] = px[i - 1] * x;
            py[i] = py[i - 1] * y;
        }
        (px, py)
    }

    pub fn eval(&self, p: &Point2<f64>) -> Vec<f64> {
        let (px, py) = self.powers(p);
        self.exps
            .iter()
            .map(|&(a, b)| px[a as usize] * py[b as usize])
            .collect()
    }

    pub fn grad(&self, p: &Point2<f64>) -> Vec<Vector2<f64>> {
        let (px, py) = self.powers(p);
        self.exps
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a as usize, b as usize);
                let gx = if a > 0 { a as f64 * px[a - 1] * py[b] } else { 0.0 };
                let gy = if b > 0 { b as f64 * px[a] * py[b - 1] } else { 0.0 };
                self.map.tr_mul(&Vector2::new(gx, gy))
            })
            .collect()
    }

    /// Value of `Σ c_α m_α` at `p`.
    pub fn eval_poly(&self, c: &[f64], p: &Point2<f64>) -> f64 {
        self.eval(p).iter().zip(c).map(|(m, c)| m * c).sum()
    }

    pub fn grad_poly(&self, c: &[f64], p: &Point2<f64>) -> Vector2<f64> {
        self.grad(p)
            .iter()
            .zip(c)
            .fold(Vector2::zeros(), |acc, (g, c)| acc + g * *c)
    }

    /// Coefficients of `Δ(Σ c_α m_α)` in the basis of degree `k − 2`.
    pub fn laplacian_coeffs(&self, c: &[f64]) -> Vec<f64> {
        // Δ = Σ_ij (J Jᵀ)_ij ∂ξ_i ∂ξ_j
        let m = self.map * self.map.transpose();
        let mut out = vec![0.0; dim(self.k as i32 - 2)];
        for (&(a, b), &ci) in self.exps.iter().zip(c) {
            if a >= 2 {
                out[index(a - 2, b)] += ci * f64::from(a * (a - 1)) * m[(0, 0)];
            }
            if a >= 1 && b >= 1 {
                out[index(a - 1, b - 1)] += ci * f64::from(2 * a * b) * m[(0, 1)];
            }
            if b >= 2 {
                out[index(a, b - 2)] += ci * f64::from(b * (b - 1)) * m[(1, 1)];
            }
        }
        out
    }

    /// Coefficients of `∂_x m_α` and `∂_y m_α` in the basis of degree `k − 1`.
    pub fn derivative_coeffs(&self, alpha: usize) -> [Vec<(usize, f64)>; 2] {
        let (a, b) = self.exps[alpha];
        let mut out = [Vec::new(), Vec::new()];
        for (d, part) in out.iter_mut().enumerate() {
            if a > 0 && self.map[(0, d)] != 0.0 {
                part.push((index(a - 1, b), f64::from(a) * self.map[(0, d)]));
            }
            if b > 0 && self.map[(1, d)] != 0.0 {
                part.push((index(a, b - 1), f64::from(b) * self.map[(1, d)]));
            }
        }
        out
    }
}
