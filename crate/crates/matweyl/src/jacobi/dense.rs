//! Brute-force resolvent oracles: dense block-tridiagonal truncations of the
//! whole-line and half-line operators. These are the independent checks for
//! the Weyl-solution formulas, deliberately naive.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

use super::forward::Side;
use super::JacobiCoeffs;

/// Dense matrix of the operator restricted to `[lo, hi]` with Dirichlet
/// cutoffs (entries outside the window dropped).
pub fn truncation(c: &JacobiCoeffs, lo: i64, hi: i64) -> CMatrix {
    let m = c.dim();
    let sites = (hi - lo + 1) as usize;
    let mut t = CMatrix::zeros(sites * m);
    for s in 0..sites {
        let k = lo + s as i64;
        let b = c.b(k);
        for i in 0..m {
            for j in 0..m {
                t[(s * m + i, s * m + j)] = b[(i, j)];
            }
        }
        if s + 1 < sites {
            let a = c.a(k);
            for i in 0..m {
                for j in 0..m {
                    // coupling between sites k and k+1
                    t[(s * m + i, (s + 1) * m + j)] = a[(i, j)];
                    t[((s + 1) * m + i, s * m + j)] = a[(i, j)];
                }
            }
        }
    }
    t
}

/// `(k, l)` block of `(T - z)^{-1}` for the truncation over
/// `[min(k, l, k_min) - margin, max(k, l, k_max) + margin]`.
pub fn greens_dense(
    c: &JacobiCoeffs,
    z: Complex64,
    k: i64,
    l: i64,
    margin: i64,
) -> Result<CMatrix> {
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let lo = k.min(l).min(c.k_min()) - margin;
    let hi = k.max(l).max(c.k_max()) + margin;
    let m = c.dim();
    let t = truncation(c, lo, hi);
    let n = t.dim();
    let shifted = &t - &CMatrix::scalar(n, z);
    let lu = shifted.lu_factor()?;
    let row0 = ((k - lo) as usize) * m;
    let col0 = ((l - lo) as usize) * m;
    let mut out = CMatrix::zeros(m);
    for j in 0..m {
        let mut e = vec![Complex64::default(); n];
        e[col0 + j] = Complex64::new(1.0, 0.0);
        let x = lu.solve_vec(&e);
        for i in 0..m {
            out[(i, j)] = x[row0 + i];
        }
    }
    Ok(out)
}

/// Margin-doubling variant: doubles the truncation margin until two
/// successive evaluations differ by less than `tol`.
pub fn greens_dense_auto(
    c: &JacobiCoeffs,
    z: Complex64,
    k: i64,
    l: i64,
    tol: f64,
) -> Result<CMatrix> {
    let mut margin = 40;
    let mut prev = greens_dense(c, z, k, l, margin)?;
    for _ in 0..4 {
        margin *= 2;
        let next = greens_dense(c, z, k, l, margin)?;
        if (&next - &prev).max_abs() < tol {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Dense Dirichlet truncation of the half-line operator based at `k0`:
/// `L` sites extending toward `+infinity` (`Side::Plus`, sites ascending) or
/// `-infinity` (`Side::Minus`, sites ascending so `k0` is the last block).
pub fn halfline_truncation(c: &JacobiCoeffs, k0: i64, side: Side, len: usize) -> CMatrix {
    match side {
        Side::Plus => truncation(c, k0, k0 + len as i64 - 1),
        Side::Minus => truncation(c, k0 - len as i64 + 1, k0),
    }
}

/// `(k0, k0)` block of the truncated half-line resolvent; converges to the
/// half-line Weyl m-function as `len` grows.
pub fn halfline_m_dense(
    c: &JacobiCoeffs,
    z: Complex64,
    k0: i64,
    side: Side,
    len: usize,
) -> Result<CMatrix> {
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let m = c.dim();
    let t = halfline_truncation(c, k0, side, len);
    let n = t.dim();
    let shifted = &t - &CMatrix::scalar(n, z);
    let lu = shifted.lu_factor()?;
    let base = match side {
        Side::Plus => 0usize,
        Side::Minus => (len - 1) * m,
    };
    let mut out = CMatrix::zeros(m);
    for j in 0..m {
        let mut e = vec![Complex64::default(); n];
        e[base + j] = Complex64::new(1.0, 0.0);
        let x = lu.solve_vec(&e);
        for i in 0..m {
            out[(i, j)] = x[base + i];
        }
    }
    Ok(out)
}
