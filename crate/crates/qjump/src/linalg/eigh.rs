// Copyright 2026 qjump Contributors
// SPDX-License-Identifier: Apache-2.0

//! Hermitian eigendecomposition.
//!
//! A complex Hermitian matrix H = A + iB is embedded as the real symmetric
//! matrix [[A, -B], [B, A]], which is reduced to tridiagonal form by
//! Householder reflections and diagonalized by the implicit-shift QL
//! iteration. Each eigenvalue of H appears twice in the embedding; pairs are
//! collapsed on output and eigenvectors are recovered as x = u + i v from an
//! embedding eigenvector [u; v].

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use super::{CMatrix, CVector};
use crate::error::{Error, Result};

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(h)?.0)
}

/// Eigenvalues (ascending) and matching eigenvectors of a Hermitian matrix.
///
/// The input is symmetrized internally; callers are expected to pass
/// matrices that are Hermitian up to rounding. For degenerate eigenvalues
/// the returned vectors span the eigenspace but are not guaranteed
/// orthogonal in it.
pub fn eigh(h: &CMatrix) -> Result<(Vec<f64>, Vec<CVector>)> {
    let n = h.nrows();
    if n != h.ncols() {
        return Err(Error::NonSquare { rows: h.nrows(), cols: h.ncols() });
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }

    // Real symmetric embedding, symmetrized to absorb rounding asymmetry.
    let m = 2 * n;
    let mut z = Array2::<f64>::zeros((m, m));
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (h[[i, j]].re + h[[j, i]].re);
            let im = 0.5 * (h[[i, j]].im - h[[j, i]].im);
            z[[i, j]] = re;
            z[[n + i, n + j]] = re;
            z[[i, n + j]] = -im;
            z[[n + i, j]] = im;
        }
    }

    let mut d = vec![0.0f64; m];
    let mut e = vec![0.0f64; m];
    tred2(&mut z, &mut d, &mut e);
    tql2(&mut d, &mut e, &mut z)?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());

    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let ia = order[2 * k];
        let ib = order[2 * k + 1];
        values.push(0.5 * (d[ia] + d[ib]));
        let mut x: CVector = Array1::zeros(n);
        let mut norm_sqr = 0.0;
        for r in 0..n {
            let c = Complex64::new(z[[r, ia]], z[[n + r, ia]]);
            norm_sqr += c.norm_sqr();
            x[r] = c;
        }
        if norm_sqr > 0.0 {
            let inv = 1.0 / norm_sqr.sqrt();
            x.mapv_inplace(|c| c * inv);
        }
        vectors.push(x);
    }
    Ok((values, vectors))
}

/// Householder reduction of a real symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transformation in place.
fn tred2(a: &mut Array2<f64>, d: &mut [f64], e: &mut [f64]) {
    let n = a.nrows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let mut scale = 0.0;
            for k in 0..=l {
                scale += a[[i, k]].abs();
            }
            if scale == 0.0 {
                e[i] = a[[i, l]];
            } else {
                for k in 0..=l {
                    a[[i, k]] /= scale;
                    h += a[[i, k]] * a[[i, k]];
                }
                let f = a[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[[i, l]] = f - g;
                let mut f_acc = 0.0;
                for j in 0..=l {
                    a[[j, i]] = a[[i, j]] / h;
                    let mut g_acc = 0.0;
                    for k in 0..=j {
                        g_acc += a[[j, k]] * a[[i, k]];
                    }
                    for k in (j + 1)..=l {
                        g_acc += a[[k, j]] * a[[i, k]];
                    }
                    e[j] = g_acc / h;
                    f_acc += e[j] * a[[i, j]];
                }
                let hh = f_acc / (h + h);
                for j in 0..=l {
                    let f = a[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let delta = f * e[k] + g * a[[i, k]];
                        a[[j, k]] -= delta;
                    }
                }
            }
        } else {
            e[i] = a[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += a[[i, k]] * a[[k, j]];
                }
                for k in 0..i {
                    let delta = g * a[[k, i]];
                    a[[k, j]] -= delta;
                }
            }
        }
        d[i] = a[[i, i]];
        a[[i, i]] = 1.0;
        for j in 0..i {
            a[[j, i]] = 0.0;
            a[[i, j]] = 0.0;
        }
    }
}

/// QL iteration with implicit shifts on a symmetric tridiagonal matrix,
/// rotating the accumulated transformation columns along.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut Array2<f64>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 80 {
                return Err(Error::EigenNoConvergence);
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut broke_early = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    broke_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    f = z[[k, i + 1]];
                    z[[k, i + 1]] = s * z[[k, i]] + c * f;
                    z[[k, i]] = c * z[[k, i]] - s * f;
                }
            }
            if broke_early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMatrix {
        let mut unit = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        let a = Array2::from_shape_fn((d, d), |_| {
            Complex64::new(2.0 * unit() - 1.0, 2.0 * unit() - 1.0)
        });
        crate::linalg::hermitize(&a)
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let sy = array![
            [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]
        ];
        let vals = hermitian_eigenvalues(&sy).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix_is_its_own_spectrum() {
        let a = Array2::from_diag(&ndarray::arr1(&[
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let vals = hermitian_eigenvalues(&a).unwrap();
        assert!((vals[0] + 3.0).abs() < 1e-13);
        assert!((vals[1] - 0.5).abs() < 1e-13);
        assert!((vals[2] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn residual_and_trace_on_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for d in [2usize, 3, 5, 8, 13] {
            let h = random_hermitian(&mut rng, d);
            let (vals, vecs) = eigh(&h).unwrap();
            // eigenvalue sum equals the trace
            let trace: f64 = h.diag().iter().map(|z| z.re).sum();
            let sum: f64 = vals.iter().sum();
            assert!((trace - sum).abs() < 1e-10 * (1.0 + trace.abs()));
            // residual ||H x - lambda x||
            for (lam, x) in vals.iter().zip(vecs.iter()) {
                let hx = h.dot(x);
                let res: f64 = hx
                    .iter()
                    .zip(x.iter())
                    .map(|(p, q)| (p - q * *lam).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-9, "residual {res:.3e} at d={d}");
                let norm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_matrix_has_nonnegative_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let a = random_hermitian(&mut rng, 6);
        let gram = crate::linalg::dag(&a).dot(&a);
        let vals = hermitian_eigenvalues(&gram).unwrap();
        assert!(vals.iter().all(|&v| v > -1e-10));
    }
}
