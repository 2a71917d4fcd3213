//! Dense linear-algebra helpers shared by the modules.
//!
//! Arrays are `ndarray` throughout; factorizations borrow `nalgebra`'s
//! Cholesky and symmetric eigensolver through the conversions below.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::Stream;

pub(crate) fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

/// Solves `a x = b` for symmetric positive-definite `a`.
pub fn cholesky_solve(
    a: ArrayView2<f64>,
    b: ArrayView1<f64>,
    context: &'static str,
) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            actual: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            actual: b.len(),
        });
    }
    let chol = Cholesky::new(to_dmatrix(a)).ok_or(Error::Singular { context })?;
    // A factorization that succeeds on a numerically singular matrix leaves a
    // vanishing pivot behind.
    let l = chol.l_dirty();
    let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[(i, i)].abs();
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    if n > 0 && !(dmin > 1e-7 * dmax) {
        return Err(Error::Singular { context });
    }
    let rhs = DVector::from_iterator(n, b.iter().copied());
    let x = chol.solve(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: context });
    }
    Ok(Array1::from_iter(x.iter().copied()))
}

/// Eigendecomposition of a symmetric matrix; eigenvalues ascending, eigenvectors
/// as the matching columns.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let n = a.nrows();
    let vectors = Array2::from_shape_fn((n, order.len()), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Nearest PSD matrix (in Frobenius norm) to the symmetric part of `a`, and
/// its principal square root.
#[derive(Debug, Clone)]
pub struct PsdProjection {
    pub projected: Array2<f64>,
    pub sqrt: Array2<f64>,
    /// ‖projected − sym(a)‖_F / ‖sym(a)‖_F.
    pub relative_change: f64,
    pub min_eigenvalue: f64,
}

pub fn psd_project(a: ArrayView2<f64>) -> PsdProjection {
    let sym = (&a + &a.t()) * 0.5;
    let (values, vectors) = symmetric_eigen(sym.view());
    let clamped = values.mapv(|v| v.max(0.0));
    let roots = clamped.mapv(f64::sqrt);
    let projected = vectors.dot(&Array2::from_diag(&clamped)).dot(&vectors.t());
    let sqrt = vectors.dot(&Array2::from_diag(&roots)).dot(&vectors.t());
    let base = frobenius(sym.view());
    let relative_change = if base > 0.0 {
        frobenius((&projected - &sym).view()) / base
    } else {
        0.0
    };
    PsdProjection {
        projected,
        sqrt,
        relative_change,
        min_eigenvalue: values.first().copied().unwrap_or(0.0),
    }
}

pub fn frobenius(a: ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Spectral-norm estimate from power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralNorm {
    pub value: f64,
    pub iterations: usize,
    /// Relative change of the estimate over the last iteration.
    pub residual: f64,
    pub converged: bool,
}

/// Seed of the fixed start vector, so that repeated reports agree exactly.
const POWER_SEED: u64 = 0x005E_ED0F_90E5;

/// Largest singular value of `a` by power iteration on the smaller Gram
/// matrix. Stops once the estimate changes by less than `tol` (relative) or
/// after `max_iter` iterations; a non-converged run still returns its last
/// estimate with `converged = false`.
pub fn spectral_norm(a: ArrayView2<f64>, tol: f64, max_iter: usize) -> SpectralNorm {
    let (rows, cols) = a.dim();
    if rows == 0 || cols == 0 {
        return SpectralNorm {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    // Iterate on AᵀA when cols <= rows, else on AAᵀ.
    let wide = cols > rows;
    let dim = if wide { rows } else { cols };
    let mut x = Stream::new(POWER_SEED).normal_vec(dim);
    let nx = norm(x.view());
    x /= nx;
    let mut estimate = 0.0;
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let y = if wide {
            a.dot(&a.t().dot(&x))
        } else {
            a.t().dot(&a.dot(&x))
        };
        let ny = norm(y.view());
        if ny == 0.0 {
            return SpectralNorm {
                value: 0.0,
                iterations: it,
                residual: 0.0,
                converged: true,
            };
        }
        let next = ny.sqrt();
        residual = ((next - estimate) / next).abs();
        estimate = next;
        x = y / ny;
        if residual < tol {
            return SpectralNorm {
                value: estimate,
                iterations: it,
                residual,
                converged: true,
            };
        }
    }
    SpectralNorm {
        value: estimate,
        iterations: max_iter,
        residual,
        converged: false,
    }
}

/// Outcome of orthonormalizing one input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Independence {
    Independent,
    /// Numerically inside the span of the earlier vectors.
    Dependent,
    /// Neither clearly independent nor clearly dependent.
    IllConditioned,
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Returns the
/// orthonormal basis and, for every input, whether it extended the basis.
pub fn orthonormal_basis(vectors: &[Array1<f64>]) -> (Vec<Array1<f64>>, Vec<Independence>) {
    let mut basis: Vec<Array1<f64>> = Vec::new();
    let mut status = Vec::with_capacity(vectors.len());
    for v in vectors {
        let original = norm(v.view());
        if original == 0.0 {
            status.push(Independence::Dependent);
            continue;
        }
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.scaled_add(-c, q);
            }
        }
        let rel = norm(r.view()) / original;
        if rel < 1e-12 {
            status.push(Independence::Dependent);
        } else if rel < 1e-6 {
            status.push(Independence::IllConditioned);
        } else {
            r /= norm(r.view());
            basis.push(r);
            status.push(Independence::Independent);
        }
    }
    (basis, status)
}
