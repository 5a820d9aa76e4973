// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Complex LU factorization with partial pivoting.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{CMatrix, CVector};
use crate::error::{Error, Result};

/// LU factors of a square complex matrix, P*A = L*U with unit-diagonal L.
pub(crate) struct LuFactors {
    lu: Array2<Complex64>,
    piv: Vec<usize>,
}

impl LuFactors {
    /// Factorize. Errors on an exactly-zero pivot.
    pub fn new(a: CMatrix) -> Result<Self> {
        Self::with_pivot_floor(a, 0.0)
    }

    /// Factorize, replacing any pivot smaller in magnitude than `floor` by
    /// `floor` (keeping its phase). `floor > 0` makes the factorization of a
    /// singular matrix usable for inverse iteration.
    pub fn with_pivot_floor(mut a: CMatrix, floor: f64) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() });
        }
        let mut piv = Vec::with_capacity(n);
        for k in 0..n {
            // pivot row by largest magnitude in column k
            let mut p = k;
            let mut best = a[[k, k]].norm_sqr();
            for r in (k + 1)..n {
                let m = a[[r, k]].norm_sqr();
                if m > best {
                    best = m;
                    p = r;
                }
            }
            if p != k {
                for c in 0..n {
                    let tmp = a[[k, c]];
                    a[[k, c]] = a[[p, c]];
                    a[[p, c]] = tmp;
                }
            }
            piv.push(p);

            let mut pivot = a[[k, k]];
            if pivot.norm() < floor {
                pivot = if pivot.norm() == 0.0 {
                    Complex64::new(floor, 0.0)
                } else {
                    pivot * (floor / pivot.norm())
                };
                a[[k, k]] = pivot;
            }
            if pivot.norm() == 0.0 {
                return Err(Error::SingularMatrix);
            }
            let inv = pivot.inv();
            for r in (k + 1)..n {
                let f = a[[r, k]] * inv;
                a[[r, k]] = f;
                if f != Complex64::new(0.0, 0.0) {
                    for c in (k + 1)..n {
                        let akc = a[[k, c]];
                        a[[r, c]] -= f * akc;
                    }
                }
            }
        }
        Ok(Self { lu: a, piv })
    }

    /// Solve A x = b for a single right-hand side.
    pub fn solve_vec(&self, b: &CVector) -> CVector {
        let n = self.lu.nrows();
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_owned();
        // rows were swapped in full during factorization, so the whole
        // permutation applies before the triangular solves
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        for k in 0..n {
            let xk = x[k];
            if xk != Complex64::new(0.0, 0.0) {
                for r in (k + 1)..n {
                    let f = self.lu[[r, k]];
                    x[r] -= f * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in (k + 1)..n {
                s -= self.lu[[k, c]] * x[c];
            }
            x[k] = s / self.lu[[k, k]];
        }
        x
    }

    /// Solve A X = B column by column.
    pub fn solve_mat(&self, b: &CMatrix) -> CMatrix {
        let n = self.lu.nrows();
        debug_assert_eq!(b.nrows(), n);
        let mut out = Array2::zeros(b.raw_dim());
        for j in 0..b.ncols() {
            let col: CVector = Array1::from_iter(b.column(j).iter().copied());
            let x = self.solve_vec(&col);
            for i in 0..n {
                out[[i, j]] = x[i];
            }
        }
        out
    }
}
