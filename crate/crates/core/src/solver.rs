//! Sparse symmetric storage, incomplete Cholesky and preconditioned CG.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("PCG reached {iterations} iterations (relative residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("numerical breakdown in {0}")]
    NumericalBreakdown(&'static str),
}

/// Lower triangle of a symmetric matrix in CSR form. Column indices in each
/// row are sorted ascending, so the diagonal entry is stored last.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl SparseSym {
    /// Builds from `(row, col, value)` triplets with `row ≥ col`; duplicates
    /// are summed. Every diagonal entry is created, possibly as zero.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j <= i, "triplet ({i}, {j}) outside lower triangle");
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(triplets.len() + n);
        let mut val = Vec::with_capacity(triplets.len() + n);
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.push((i, 0.0));
            r.sort_by_key(|e| e.0);
            for (j, v) in r {
                if col.len() > *row_ptr.last().unwrap() && *col.last().unwrap() == j {
                    *val.last_mut().unwrap() += v;
                } else {
                    col.push(j);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Self { n, row_ptr, col, val }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.val.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.val[self.row_ptr[i + 1] - 1]).collect()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &a) in cols.iter().zip(vals) {
                acc += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
            y[i] += acc;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                m[(i, j)] = a;
                m[(j, i)] = a;
            }
        }
        m
    }
}

pub trait Preconditioner {
    /// `z = M⁻¹ r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Zero fill-in incomplete Cholesky factor `L` on the pattern of `A`.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    l: SparseSym,
    /// Diagonal shift needed to complete the factorisation.
    pub shift: f64,
}

impl IncompleteCholesky {
    const MAX_SHIFTS: usize = 10;

    pub fn new(a: &SparseSym) -> Result<Self, SolverError> {
        if a.n == 0 {
            return Ok(Self { l: a.clone(), shift: 0.0 });
        }
        if let Some(l) = Self::factor(a, 0.0) {
            return Ok(Self { l, shift: 0.0 });
        }
        let diag = a.diagonal();
        let mut alpha = 1e-3 * diag.iter().sum::<f64>() / a.n as f64;
        for _ in 0..Self::MAX_SHIFTS {
            if let Some(l) = Self::factor(a, alpha) {
                return Ok(Self { l, shift: alpha });
            }
            alpha *= 2.0;
        }
        Err(SolverError::NumericalBreakdown("incomplete Cholesky"))
    }

    fn factor(a: &SparseSym, shift: f64) -> Option<SparseSym> {
        let mut l = a.clone();
        for i in 0..l.n {
            let start = l.row_ptr[i];
            let end = l.row_ptr[i + 1];
            for p in start..end {
                let k = l.col[p];
                // sparse dot of rows i and k over columns < k
                let (ks, ke) = (l.row_ptr[k], l.row_ptr[k + 1]);
                let mut s = 0.0;
                let (mut a1, mut b1) = (start, ks);
                while a1 < p && b1 < ke - 1 {
                    match l.col[a1].cmp(&l.col[b1]) {
                        std::cmp::Ordering::Less => a1 += 1,
                        std::cmp::Ordering::Greater => b1 += 1,
                        std::cmp::Ordering::Equal => {
                            s += l.val[a1] * l.val[b1];
                            a1 += 1;
                            b1 += 1;
                        }
                    }
                }
                if k == i {
                    let d = l.val[p] + shift - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    l.val[p] = d.sqrt();
                } else {
                    l.val[p] = (l.val[p] - s) / l.val[ke - 1];
                }
            }
        }
        Some(l)
    }
}

impl Preconditioner for IncompleteCholesky {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let l = &self.l;
        // L y = r
        for i in 0..l.n {
            let (cols, vals) = l.row(i);
            let m = cols.len() - 1;
            let mut s = r[i];
            for q in 0..m {
                s -= vals[q] * z[cols[q]];
            }
            z[i] = s / vals[m];
        }
        // Lᵀ z = y
        for i in (0..l.n).rev() {
            let (cols, vals) = l.row(i);
            let m = cols.len() - 1;
            z[i] /= vals[m];
            let zi = z[i];
            for q in 0..m {
                z[cols[q]] -= vals[q] * zi;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients from `x = 0`, stopping when the
/// recursively updated residual satisfies `‖r‖ ≤ tol ‖b‖`.
pub fn pcg(
    a: &SparseSym,
    b: &[f64],
    m: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, PcgStats), SolverError> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok((
            x,
            PcgStats {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rnorm = bnorm;
    for it in 1..=max_iter {
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) || !pq.is_finite() {
            return Err(SolverError::NumericalBreakdown("PCG (pᵀAp ≤ 0)"));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok((
                x,
                PcgStats {
                    iterations: it,
                    relative_residual: rnorm / bnorm,
                },
            ));
        }
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        if !rz_new.is_finite() || rz == 0.0 {
            return Err(SolverError::NumericalBreakdown("PCG (rᵀz)"));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::MaxIterations {
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}

/// Default iteration cap for a system of size `n`.
pub fn default_max_iter(n: usize) -> usize {
    (5 * n).max(1000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn laplacian_1d(n: usize) -> SparseSym {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        SparseSym::from_triplets(n, &t)
    }

    fn laplacian_2d(m: usize) -> SparseSym {
        let n = m * m;
        let mut t = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let r = i * m + j;
                t.push((r, r, 4.0));
                if j > 0 {
                    t.push((r, r - 1, -1.0));
                }
                if i > 0 {
                    t.push((r, r - m, -1.0));
                }
            }
        }
        SparseSym::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates_and_matvec() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 0, 1.0), (1, 1, 5.0)]);
        assert_eq!(a.nnz_lower(), 3);
        let mut y = [0.0; 2];
        a.matvec(&[1.0, 2.0], &mut y);
        assert_eq!(y, [7.0, 13.0]);
        assert_eq!(a.diagonal(), vec![1.0, 5.0]);
    }

    #[test]
    fn ic0_is_exact_for_tridiagonal() {
        // no fill-in, so L Lᵀ = A and one PCG step suffices
        let a = laplacian_1d(30);
        let ic = IncompleteCholesky::new(&a).unwrap();
        assert_eq!(ic.shift, 0.0);
        let b: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let (x, st) = pcg(&a, &b, &ic, 1e-15, 100).unwrap();
        assert!(st.iterations <= 2);
        let xd = a.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        assert!((DVector::from_vec(x) - xd).amax() < 1e-12);
    }

    #[test]
    fn pcg_matches_dense_on_2d_laplacian() {
        let a = laplacian_2d(20);
        let b: Vec<f64> = (0..400).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let ic = IncompleteCholesky::new(&a).unwrap();
        let (x, st) = pcg(&a, &b, &ic, 1e-15, 1000).unwrap();
        let (_, st_plain) = pcg(&a, &b, &Identity, 1e-15, 2000).unwrap();
        assert!(st.iterations < st_plain.iterations);
        let xd = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b));
        let x = DVector::from_vec(x);
        assert!((&x - &xd).amax() / xd.amax() < 1e-12);
    }

    #[test]
    fn zero_rhs_and_iteration_cap() {
        let a = laplacian_2d(10);
        let (x, st) = pcg(&a, &vec![0.0; 100], &Identity, 1e-15, 10).unwrap();
        assert_eq!(st.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
        let b = vec![1.0; 100];
        assert!(matches!(
            pcg(&a, &b, &Identity, 1e-15, 3),
            Err(SolverError::MaxIterations { iterations: 3, .. })
        ));
    }

    #[test]
    fn shift_rescues_indefinite_pivot() {
        // SPD matrix on which IC(0) hits a negative pivot without a shift
        let dense = DMatrix::from_row_slice(
            4,
            4,
            &[3.0, -2.0, 0.0, 2.0, -2.0, 3.0, -2.0, 0.0, 0.0, -2.0, 3.0, -2.0, 2.0, 0.0, -2.0, 3.0],
        );
        assert!(dense.clone().cholesky().is_some());
        let mut t = Vec::new();
        for i in 0..4 {
            for j in 0..=i {
                if dense[(i, j)] != 0.0 {
                    t.push((i, j, dense[(i, j)]));
                }
            }
        }
        let a = SparseSym::from_triplets(4, &t);
        let ic = IncompleteCholesky::new(&a).unwrap();
        assert!(ic.shift > 0.0);
        let b = [1.0, 2.0, 3.0, 4.0];
        let (x, _) = pcg(&a, &b, &ic, 1e-15, 100).unwrap();
        let xd = dense.cholesky().unwrap().solve(&DVector::from_row_slice(&b));
        assert!((DVector::from_vec(x) - xd).amax() < 1e-10);
    }

    #[test]
    fn indefinite_matrix_breaks_down() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (1, 0, 3.0), (1, 1, 1.0)]);
        assert!(matches!(
            pcg(&a, &[1.0, -1.0], &Identity, 1e-15, 10),
            Err(SolverError::NumericalBreakdown(_))
        ));
    }
}
