// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Matrix exponential by scaling-and-squaring with diagonal Padé
//! approximants (orders 3/5/7/9/13 selected by 1-norm thresholds).
//!
//! The no-jump generators this crate exponentiates are non-normal, so no
//! eigendecomposition is assumed anywhere.

use num_complex::Complex64;

use super::lu::LuFactors;
use super::{identity, CMatrix};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &CMatrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

fn scaled(a: &CMatrix, c: f64) -> CMatrix {
    a.mapv(|z| z * c)
}

/// U and V for a diagonal Padé approximant with coefficients `b`, given the
/// even powers [I, A2, A4, ...]. U collects odd coefficients times A, V even.
fn pade_uv(a: &CMatrix, even_powers: &[&CMatrix], b: &[f64]) -> (CMatrix, CMatrix) {
    let d = a.nrows();
    let mut u_inner: CMatrix = ndarray::Array2::zeros((d, d));
    let mut v: CMatrix = ndarray::Array2::zeros((d, d));
    for (k, pow) in even_powers.iter().enumerate() {
        u_inner = u_inner + scaled(pow, b[2 * k + 1]);
        v = v + scaled(pow, b[2 * k]);
    }
    (a.dot(&u_inner), v)
}

/// Matrix exponential `exp(A)`.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::NonSquare { rows: a.nrows(), cols: a.ncols() });
    }
    if n == 0 {
        return Ok(a.clone());
    }

    let norm = one_norm(a);
    if norm == 0.0 {
        return Ok(identity(n));
    }

    let eye = identity(n);
    let (u, v, squarings) = if norm <= THETA_9 {
        let a2 = a.dot(a);
        if norm <= THETA_3 {
            let (u, v) = pade_uv(a, &[&eye, &a2], &B3);
            (u, v, 0u32)
        } else if norm <= THETA_5 {
            let a4 = a2.dot(&a2);
            let (u, v) = pade_uv(a, &[&eye, &a2, &a4], &B5);
            (u, v, 0)
        } else if norm <= THETA_7 {
            let a4 = a2.dot(&a2);
            let a6 = a2.dot(&a4);
            let (u, v) = pade_uv(a, &[&eye, &a2, &a4, &a6], &B7);
            (u, v, 0)
        } else {
            let a4 = a2.dot(&a2);
            let a6 = a2.dot(&a4);
            let a8 = a4.dot(&a4);
            let (u, v) = pade_uv(a, &[&eye, &a2, &a4, &a6, &a8], &B9);
            (u, v, 0)
        }
    } else {
        let s = ((norm / THETA_13).log2().ceil() as i32).max(0) as u32;
        let a1 = scaled(a, 0.5f64.powi(s as i32));
        let a2 = a1.dot(&a1);
        let a4 = a2.dot(&a2);
        let a6 = a2.dot(&a4);
        // order-13 splitting: highest terms factored through A6
        let w1 = scaled(&a6, B13[13]) + scaled(&a4, B13[11]) + scaled(&a2, B13[9]);
        let w2 = scaled(&a6, B13[7]) + scaled(&a4, B13[5]) + scaled(&a2, B13[3]) + scaled(&eye, B13[1]);
        let u = a1.dot(&(a6.dot(&w1) + w2));
        let z1 = scaled(&a6, B13[12]) + scaled(&a4, B13[10]) + scaled(&a2, B13[8]);
        let v = a6.dot(&z1) + scaled(&a6, B13[6]) + scaled(&a4, B13[4]) + scaled(&a2, B13[2]) + scaled(&eye, B13[0]);
        (u, v, s)
    };

    // (V - U) F = (V + U)
    let vm = &v - &u;
    let vp = &v + &u;
    let lu = LuFactors::new(vm)?;
    let mut f = lu.solve_mat(&vp);
    for _ in 0..squarings {
        f = f.dot(&f);
    }
    Ok(f)
}
