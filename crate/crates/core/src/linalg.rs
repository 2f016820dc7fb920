//! Small dense symmetric-matrix helpers for Gaussian estimation and sampling.
//!
//! FOS elements are small (bounded by the maximum element size), so a plain
//! row-major symmetric matrix with an unblocked Cholesky factorization is all
//! the sampler needs.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // used by the no_std build for float intrinsics
use num_traits::Float;


/// Additive diagonal regularization factor: `REGULARIZATION * trace / dim` is
/// added to the diagonal before any factorization attempt.
pub const REGULARIZATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = SymMatrix::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (j, &x) in row.iter().enumerate() {
                m.data[i * n + j] = x;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets both (i, j) and (j, i).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.n + j] = value;
        self.data[j * self.n + i] = value;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Extracts the sub-matrix over the given (repeat-free) positions.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Lower-triangular Cholesky factor, or a diagonal fallback when the matrix
/// is too degenerate to factorize even after regularization.
#[derive(Debug, Clone)]
pub enum Factor {
    Cholesky { n: usize, l: Vec<f64> },
    /// Per-coordinate standard deviations (off-diagonal structure dropped).
    Diagonal(Vec<f64>),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Cholesky { n, .. } => *n,
            Factor::Diagonal(d) => d.len(),
        }
    }

    /// Applies the factor to a standard-normal draw: `out = L z` (or the
    /// diagonal scaling in the fallback case).
    pub fn transform(&self, z: &[f64], out: &mut [f64]) {
        match self {
            Factor::Cholesky { n, l } => {
                for i in 0..*n {
                    let mut acc = 0.0;
                    for j in 0..=i {
                        acc += l[i * n + j] * z[j];
                    }
                    out[i] = acc;
                }
            }
            Factor::Diagonal(d) => {
                for (o, (&s, &zi)) in out.iter_mut().zip(d.iter().zip(z)) {
                    *o = s * zi;
                }
            }
        }
    }

    /// Solves `A x = b` in place where `A = L L^T` (Cholesky case) or the
    /// diagonal matrix of variances (fallback case).
    pub fn solve_in_place(&self, b: &mut [f64]) {
        match self {
            Factor::Cholesky { n, l } => {
                let n = *n;
                for i in 0..n {
                    let mut acc = b[i];
                    for j in 0..i {
                        acc -= l[i * n + j] * b[j];
                    }
                    b[i] = acc / l[i * n + i];
                }
                for i in (0..n).rev() {
                    let mut acc = b[i];
                    for j in i + 1..n {
                        acc -= l[j * n + i] * b[j];
                    }
                    b[i] = acc / l[i * n + i];
                }
            }
            Factor::Diagonal(d) => {
                for (bi, &s) in b.iter_mut().zip(d) {
                    let var = s * s;
                    *bi = if var > 0.0 { *bi / var } else { 0.0 };
                }
            }
        }
    }
}

/// Plain unblocked Cholesky; `None` when a non-positive pivot appears.
pub fn cholesky(m: &SymMatrix) -> Option<Factor> {
    let n = m.dim();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = m.get(i, j);
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if acc <= 0.0 || !acc.is_finite() {
                    return None;
                }
                l[i * n + i] = acc.sqrt();
            } else {
                l[i * n + j] = acc / l[j * n + j];
            }
        }
    }
    Some(Factor::Cholesky { n, l })
}

/// Factorizes after adding `REGULARIZATION * trace / dim` to the diagonal;
/// falls back to the (regularized, floored) diagonal when that still fails.
pub fn regularized_factor(m: &SymMatrix) -> Factor {
    let n = m.dim();
    if n == 0 {
        return Factor::Diagonal(Vec::new());
    }
    let reg = REGULARIZATION * m.trace().abs() / n as f64;
    let mut work = m.clone();
    for i in 0..n {
        work.set(i, i, work.get(i, i) + reg);
    }
    if let Some(f) = cholesky(&work) {
        return f;
    }
    Factor::Diagonal(
        (0..n)
            .map(|i| {
                let v = work.get(i, i);
                if v > 0.0 && v.is_finite() {
                    v.sqrt()
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_round_trip() {
        let m = SymMatrix::from_rows(&[&[4.0, 2.0, 0.6], &[2.0, 5.0, 1.0], &[0.6, 1.0, 3.0]]);
        let f = cholesky(&m).unwrap();
        // solve m x = b and verify
        let b = [1.0, -2.0, 0.5];
        let mut x = b;
        f.solve_in_place(&mut x);
        for i in 0..3 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += m.get(i, j) * x[j];
            }
            assert!((acc - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_falls_back_to_diagonal() {
        let m = SymMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(cholesky(&m).is_none());
        match regularized_factor(&m) {
            Factor::Diagonal(d) => {
                assert!((d[0] - 1.0).abs() < 1e-9);
            }
            Factor::Cholesky { .. } => panic!("expected diagonal fallback"),
        }
    }

    #[test]
    fn zero_matrix_regularizes_to_zero_draws() {
        let m = SymMatrix::zeros(3);
        let f = regularized_factor(&m);
        let mut out = [9.0; 3];
        f.transform(&[1.0, 1.0, 1.0], &mut out);
        assert_eq!(out, [0.0; 3]);
    }
}
