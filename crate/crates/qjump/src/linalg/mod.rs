// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex-matrix kernel: Kronecker products, column-stacking
//! vectorization, matrix exponentials, adjoints and traces.
//!
//! Vectorization is column-stacking throughout the crate, so that
//! `vec(A X B) = (B^T ⊗ A) vec(X)`. This is the single global convention;
//! every superoperator in the crate is expressed in it.

mod eigh;
mod expm;
mod lu;

pub use eigh::{eigh, hermitian_eigenvalues};
pub use expm::expm;
pub(crate) use lu::LuFactors;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix in double precision.
pub type CMatrix = Array2<Complex64>;
/// Dense complex vector in double precision.
pub type CVector = Array1<Complex64>;

pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// d x d identity matrix.
pub fn identity(d: usize) -> CMatrix {
    Array2::eye(d)
}

/// d x d zero matrix.
pub fn zeros(d: usize) -> CMatrix {
    Array2::zeros((d, d))
}

/// Kronecker product, dims (rA*rB) x (cA*cB).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    ndarray::linalg::kron(a, b)
}

/// Conjugate transpose.
pub fn dag(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

/// Trace of a square matrix.
pub fn trace(a: &CMatrix) -> Result<Complex64> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() });
    }
    Ok(a.diag().sum())
}

/// Trace without the shape check, for internal call sites that construct
/// square matrices by construction.
#[inline]
pub(crate) fn tr(a: &CMatrix) -> Complex64 {
    debug_assert_eq!(a.nrows(), a.ncols());
    a.diag().sum()
}

/// Frobenius norm of the difference.
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.dim(), b.dim(), "frobenius_distance on mismatched shapes");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Frobenius norm.
pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Max-abs-entry deviation from the conjugate transpose is at most `tol`.
pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let d = a.nrows();
    for i in 0..d {
        for j in i..d {
            if (a[[i, j]] - a[[j, i]].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// (A + A†)/2.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    let d = a.nrows();
    debug_assert_eq!(d, a.ncols());
    let mut out = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            let z = (a[[i, j]] + a[[j, i]].conj()) * 0.5;
            out[[i, j]] = z;
        }
    }
    out
}

/// Column-stacking vectorization of a square matrix.
///
/// `vec(M)[i + j*d] = M[i, j]`; entries are copied bit-for-bit.
pub fn vectorize(m: &CMatrix) -> Result<CVector> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let mut v = Array1::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            v[j * d + i] = m[[i, j]];
        }
    }
    Ok(v)
}

/// Inverse of [`vectorize`]: reshape a d^2 vector back into a d x d matrix.
pub fn unvectorize(v: &CVector, d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "unvectorize: vector length {} != {}^2",
            v.len(),
            d
        )));
    }
    let mut m = Array2::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[[i, j]] = v[j * d + i];
        }
    }
    Ok(m)
}

/// Trace of `unvectorize(v)` read off directly from the vectorized form.
#[inline]
pub(crate) fn trace_of_vectorized(v: &CVector, d: usize) -> Complex64 {
    debug_assert_eq!(v.len(), d * d);
    (0..d).map(|i| v[i * d + i]).sum()
}

/// Spectral (2-) norm via the largest eigenvalue of A†A.
pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    let m = dag(a).dot(a);
    let vals = hermitian_eigenvalues(&m)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Check that every entry is finite.
pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
