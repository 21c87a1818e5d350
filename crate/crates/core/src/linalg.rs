//! Thin bridge between `ndarray` storage and `nalgebra` decompositions.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};

use crate::{Error, Result};

pub fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Eigenvectors are the columns of the returned matrix,
/// each sign-normalised so its largest-magnitude entry is positive.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let eig = nalgebra::SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[[r, dst]] = sign * col[r];
        }
    }
    (values, vectors)
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`: Cholesky when
/// possible, SVD pseudo-inverse otherwise.
pub fn solve_spd(a: ArrayView2<'_, f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let m = to_dmatrix(a);
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    let x = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?,
    };
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Least-squares solution of `a x = b` via SVD.
pub fn lstsq(a: ArrayView2<'_, f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    let x = to_dmatrix(a)
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Largest eigenvalue of a symmetric PSD operator by power iteration.
pub fn power_iteration(apply: impl Fn(&Array1<f64>) -> Array1<f64>, dim: usize, iters: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    // Deterministic, not aligned with any axis.
    let mut v = Array1::from_shape_fn(dim, |i| 1.0 + 0.37 * ((i * 7919) % 13) as f64);
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        let n = w.dot(&w).sqrt();
        if n == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w);
        v = w / n;
    }
    lambda.max(0.0)
}
