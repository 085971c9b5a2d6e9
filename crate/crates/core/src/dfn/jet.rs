//! Second-order forward-mode differentiation in two variables.
//!
//! Exact solutions are defined in 3D coordinates while the flow lives in
//! fracture-local coordinates `(u, v)`. Seeding `x, y, z` as affine jets of
//! `(u, v)` yields the in-plane gradient and Hessian in a single pass.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar types an [`Expr`](super::Expr) can be evaluated in.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn cos(self) -> Self;
    fn sin(self) -> Self;
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, c: f64) -> Self;
    /// Polar angle of the point `(x, y)`, i.e. `y.atan2(x)` in std terms.
    fn angle(x: Self, y: Self) -> Self;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, c: f64) -> Self {
        f64::powf(self, c)
    }
    fn angle(x: Self, y: Self) -> Self {
        y.atan2(x)
    }
}

/// Value, gradient and Hessian with respect to two variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 2],
    /// Hessian entries `[∂uu, ∂uv, ∂vv]`.
    pub h: [f64; 3],
}

impl Jet {
    pub fn new(v: f64, d: [f64; 2], h: [f64; 3]) -> Self {
        Self { v, d, h }
    }

    /// Affine function `v + d·(u, v)`.
    pub fn affine(v: f64, d: [f64; 2]) -> Self {
        Self { v, d, h: [0.0; 3] }
    }

    pub fn laplacian(&self) -> f64 {
        self.h[0] + self.h[2]
    }

    /// Applies a scalar function `g` given `g(v), g'(v), g''(v)`.
    fn chain(self, g: f64, g1: f64, g2: f64) -> Self {
        let d = self.d;
        Self {
            v: g,
            d: [g1 * d[0], g1 * d[1]],
            h: [
                g1 * self.h[0] + g2 * d[0] * d[0],
                g1 * self.h[1] + g2 * d[0] * d[1],
                g1 * self.h[2] + g2 * d[1] * d[1],
            ],
        }
    }

    /// Applies `f(a, b)` given its value and first/second partials.
    #[allow(clippy::too_many_arguments)]
    fn chain2(a: Self, b: Self, f: f64, fa: f64, fb: f64, faa: f64, fab: f64, fbb: f64) -> Self {
        let (da, db) = (a.d, b.d);
        let outer = |i: usize, j: usize| {
            faa * da[i] * da[j] + fab * (da[i] * db[j] + db[i] * da[j]) + fbb * db[i] * db[j]
        };
        Self {
            v: f,
            d: [fa * da[0] + fb * db[0], fa * da[1] + fb * db[1]],
            h: [
                fa * a.h[0] + fb * b.h[0] + outer(0, 0),
                fa * a.h[1] + fb * b.h[1] + outer(0, 1),
                fa * a.h[2] + fb * b.h[2] + outer(1, 1),
            ],
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            d: [self.d[0] + o.d[0], self.d[1] + o.d[1]],
            h: [self.h[0] + o.h[0], self.h[1] + o.h[1], self.h[2] + o.h[2]],
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            d: [-self.d[0], -self.d[1]],
            h: [-self.h[0], -self.h[1], -self.h[2]],
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self, o);
        Jet {
            v: a.v * b.v,
            d: [a.d[0] * b.v + a.v * b.d[0], a.d[1] * b.v + a.v * b.d[1]],
            h: [
                a.h[0] * b.v + a.v * b.h[0] + 2.0 * a.d[0] * b.d[0],
                a.h[1] * b.v + a.v * b.h[1] + a.d[0] * b.d[1] + a.d[1] * b.d[0],
                a.h[2] * b.v + a.v * b.h[2] + 2.0 * a.d[1] * b.d[1],
            ],
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let r = 1.0 / o.v;
        self * o.chain(r, -r * r, 2.0 * r * r * r)
    }
}

impl Scalar for Jet {
    fn constant(c: f64) -> Self {
        Jet::affine(c, [0.0, 0.0])
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn abs(self) -> Self {
        let sg = if self.v < 0.0 { -1.0 } else { 1.0 };
        self.chain(self.v.abs(), sg, 0.0)
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(self.v.ln(), r, -r * r)
    }
    fn powi(self, n: i32) -> Self {
        let nf = n as f64;
        let g1 = if n == 0 { 0.0 } else { nf * self.v.powi(n - 1) };
        let g2 = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * self.v.powi(n - 2)
        };
        self.chain(self.v.powi(n), g1, g2)
    }
    fn powf(self, c: f64) -> Self {
        self.chain(
            self.v.powf(c),
            c * self.v.powf(c - 1.0),
            c * (c - 1.0) * self.v.powf(c - 2.0),
        )
    }
    fn angle(x: Self, y: Self) -> Self {
        // f(a, b) = atan2(a, b) with a = y, b = x
        let (a, b) = (y.v, x.v);
        let r2 = a * a + b * b;
        let r4 = r2 * r2;
        Jet::chain2(
            y,
            x,
            a.atan2(b),
            b / r2,
            -a / r2,
            -2.0 * a * b / r4,
            (a * a - b * b) / r4,
            2.0 * a * b / r4,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var_u(u: f64) -> Jet {
        Jet::affine(u, [1.0, 0.0])
    }
    fn var_v(v: f64) -> Jet {
        Jet::affine(v, [0.0, 1.0])
    }

    /// Central differences of `f` at `(u, v)` for gradient and Hessian.
    fn fd(f: impl Fn(f64, f64) -> f64, u: f64, v: f64) -> ([f64; 2], [f64; 3]) {
        let h = 1e-4;
        let du = (f(u + h, v) - f(u - h, v)) / (2.0 * h);
        let dv = (f(u, v + h) - f(u, v - h)) / (2.0 * h);
        let huu = (f(u + h, v) - 2.0 * f(u, v) + f(u - h, v)) / (h * h);
        let hvv = (f(u, v + h) - 2.0 * f(u, v) + f(u, v - h)) / (h * h);
        let huv = (f(u + h, v + h) - f(u + h, v - h) - f(u - h, v + h) + f(u - h, v - h))
            / (4.0 * h * h);
        ([du, dv], [huu, huv, hvv])
    }

    fn check(jet_f: impl Fn(Jet, Jet) -> Jet, f: impl Fn(f64, f64) -> f64, u: f64, v: f64) {
        let j = jet_f(var_u(u), var_v(v));
        let (d, h) = fd(&f, u, v);
        assert!((j.v - f(u, v)).abs() < 1e-14);
        for i in 0..2 {
            assert!((j.d[i] - d[i]).abs() < 1e-6, "d{i}: {} vs {}", j.d[i], d[i]);
        }
        for i in 0..3 {
            assert!((j.h[i] - h[i]).abs() < 1e-4, "h{i}: {} vs {}", j.h[i], h[i]);
        }
    }

    #[test]
    fn elementary_functions_match_finite_differences() {
        check(|u, v| u * v * v, |u, v| u * v * v, 0.3, -0.7);
        check(|u, v| u / (v + Jet::constant(2.0)), |u, v| u / (v + 2.0), 0.3, -0.7);
        check(|u, v| (u * v).cos(), |u, v| (u * v).cos(), 0.9, 0.4);
        check(|u, v| (u + v).sin(), |u, v| (u + v).sin(), 0.9, 0.4);
        check(|u, v| (u * u + v * v).sqrt(), |u, v| (u * u + v * v).sqrt(), 0.9, 0.4);
        check(|u, v| (u - v).exp(), |u, v| (u - v).exp(), 0.9, 0.4);
        check(|u, v| (u * u + v).ln(), |u, v| (u * u + v).ln(), 0.9, 0.4);
        check(|u, v| (u + v).powi(3), |u, v| (u + v).powi(3), 0.9, 0.4);
        check(|u, v| (u + v).powf(2.5), |u, v| (u + v).powf(2.5), 0.9, 0.4);
        check(|u, v| (u - v).abs(), |u, v| (u - v).abs(), 0.9, 0.4);
        check(Jet::angle, |u, v| v.atan2(u), -0.6, 0.4);
        check(Jet::angle, |u, v| v.atan2(u), -0.6, -0.4);
        check(|u, v| Jet::angle(v, u), |u, v| u.atan2(v), 0.2, 0.5);
    }
}
