//! Forward Weyl theory for whole-line Jacobi operators: fundamental
//! solutions, Weyl M-matrices by exact Riccati propagation from the free
//! tails, Green's matrices, half-line m-functions, and the 2m x 2m
//! Weyl-Titchmarsh matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

use super::{GreensSample, JacobiCoeffs, MatSeq, WeylPair};

/// Fundamental solutions `phi`, `theta` of
/// `A(k) psi(k+1) + A(k-1) psi(k-1) + (B(k) - z) psi(k) = 0`
/// normalized by `theta(k0) = phi(k0+1) = I`, `phi(k0) = theta(k0+1) = 0`,
/// tabulated on `[k_lo, k_hi]`.
pub fn fundamental_solutions(
    c: &JacobiCoeffs,
    z: Complex64,
    k0: i64,
    k_lo: i64,
    k_hi: i64,
) -> Result<(MatSeq, MatSeq)> {
    if !(k_lo <= k0 && k0 + 1 <= k_hi) {
        return Err(Error::validation(
            "window must contain both normalization sites k0 and k0+1",
        ));
    }
    let m = c.dim();
    let len = (k_hi - k_lo + 1) as usize;
    let mut phi = vec![CMatrix::zeros(m); len];
    let mut theta = vec![CMatrix::zeros(m); len];
    let idx = |k: i64| (k - k_lo) as usize;
    phi[idx(k0 + 1)] = CMatrix::identity(m);
    theta[idx(k0)] = CMatrix::identity(m);

    let step_up = |psi: &mut Vec<CMatrix>, k: i64| -> Result<()> {
        // psi(k+1) = A(k)^{-1} [ (z - B(k)) psi(k) - A(k-1) psi(k-1) ]
        let zb = &CMatrix::scalar(m, z) - &c.b(k);
        let rhs = &(&zb * &psi[idx(k)]) - &(&c.a(k - 1) * &psi[idx(k - 1)]);
        psi[idx(k + 1)] = c.a(k).solve(&rhs)?;
        Ok(())
    };
    let step_down = |psi: &mut Vec<CMatrix>, k: i64| -> Result<()> {
        // psi(k-1) = A(k-1)^{-1} [ (z - B(k)) psi(k) - A(k) psi(k+1) ]
        let zb = &CMatrix::scalar(m, z) - &c.b(k);
        let rhs = &(&zb * &psi[idx(k)]) - &(&c.a(k) * &psi[idx(k + 1)]);
        psi[idx(k - 1)] = c.a(k - 1).solve(&rhs)?;
        Ok(())
    };

    for k in (k0 + 1)..k_hi {
        step_up(&mut phi, k)?;
        step_up(&mut theta, k)?;
    }
    for k in ((k_lo + 1)..=k0).rev() {
        step_down(&mut phi, k)?;
        step_down(&mut theta, k)?;
    }
    Ok((MatSeq::new(k_lo, phi), MatSeq::new(k_lo, theta)))
}

/// Wronskian `W(f, g)(k) = f(k) A(k) g(k+1) - f(k+1) A(k) g(k)`.
pub fn wronskian(c: &JacobiCoeffs, f: &MatSeq, g: &MatSeq, k: i64) -> CMatrix {
    let a = c.a(k);
    &(&(f.get(k) * &a) * g.get(k + 1)) - &(&(f.get(k + 1) * &a) * g.get(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Constant-coefficient Weyl matrix of the free operator: the root of
/// `M + M^{-1} + z = 0` selected so `Plus` is the Herglotz branch
/// (`M ~ -1/z`, modulus below 1) and `Minus` the anti-Herglotz branch
/// (`M ~ -z`). Scalar multiple of the identity.
pub fn weyl_m_tail(z: Complex64, side: Side, m: usize) -> Result<CMatrix> {
    Ok(CMatrix::scalar(m, weyl_tail_scalar(z, side)?))
}

pub fn weyl_tail_scalar(z: Complex64, side: Side) -> Result<Complex64> {
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let s = (z * z - 4.0).sqrt();
    // stable quadratic: take the larger-magnitude root of M^2 + zM + 1 = 0
    let r_big = if (-z + s).norm() >= (-z - s).norm() {
        (-z + s) * 0.5
    } else {
        (-z - s) * 0.5
    };
    let r_small = 1.0 / r_big; // product of the roots is 1
    match side {
        Side::Plus => Ok(r_small),
        Side::Minus => Ok(r_big),
    }
}

/// `M_+(z, k)` for every `k` in `[lo, hi]`, by downward Riccati propagation
/// from the exact free tail at `max(hi, k_max) + 1`.
pub fn weyl_m_plus_field(c: &JacobiCoeffs, z: Complex64, lo: i64, hi: i64) -> Result<MatSeq> {
    let m = c.dim();
    let start = (c.k_max() + 1).max(hi);
    let mut cur = weyl_m_tail(z, Side::Plus, m)?;
    let mut vals: Vec<CMatrix> = Vec::new();
    let mut k = start;
    if k <= hi {
        vals.push(cur.clone());
    }
    while k > lo {
        // M_+(k-1) = A(k-1) [B(k) - z - M_+(k)]^{-1} A(k-1)
        let a = c.a(k - 1);
        let core = &(&c.b(k) - &CMatrix::scalar(m, z)) - &cur;
        cur = &a * &core.solve(&a).map_err(|_| step_error(z, k))?;
        k -= 1;
        if k <= hi {
            vals.push(cur.clone());
        }
    }
    vals.reverse();
    Ok(MatSeq::new(lo, vals))
}

/// `M_-(z, k)` for every `k` in `[lo, hi]`, by upward Riccati propagation
/// from the exact free tail at `min(lo, k_min) - 1`.
pub fn weyl_m_minus_field(c: &JacobiCoeffs, z: Complex64, lo: i64, hi: i64) -> Result<MatSeq> {
    let m = c.dim();
    let start = (c.k_min() - 1).min(lo);
    let mut cur = weyl_m_tail(z, Side::Minus, m)?;
    let mut vals: Vec<CMatrix> = Vec::new();
    let mut k = start;
    if k >= lo {
        vals.push(cur.clone());
    }
    while k < hi {
        // M_-(k+1) = (B(k+1) - z) - A(k) M_-(k)^{-1} A(k)
        let a = c.a(k);
        let inner = cur.solve(&a).map_err(|_| step_error(z, k))?;
        cur = &(&c.b(k + 1) - &CMatrix::scalar(m, z)) - &(&a * &inner);
        k += 1;
        if k >= lo {
            vals.push(cur.clone());
        }
    }
    Ok(MatSeq::new(lo, vals))
}

fn step_error(z: Complex64, k: i64) -> Error {
    Error::singular(format!(
        "Riccati propagation hit an ill-conditioned inversion at k = {k}, z = {z} (spectral point too close to the real axis?)"
    ))
}

/// Weyl pair `(M_+(z, k0), M_-(z, k0))`.
pub fn weyl_m(c: &JacobiCoeffs, z: Complex64, k0: i64) -> Result<WeylPair> {
    let plus = weyl_m_plus_field(c, z, k0, k0)?;
    let minus = weyl_m_minus_field(c, z, k0, k0)?;
    Ok(WeylPair {
        z,
        k0,
        m_plus: plus.get(k0).clone(),
        m_minus: minus.get(k0).clone(),
    })
}

/// Riccati residual `M(k) + A(k-1) M(k-1)^{-1} A(k-1) - B(k) + z` for a
/// propagated field, at site `k`.
pub fn riccati_residual(c: &JacobiCoeffs, field: &MatSeq, z: Complex64, k: i64) -> Result<f64> {
    let m = c.dim();
    let a = c.a(k - 1);
    let inner = field.get(k - 1).solve(&a)?;
    let lhs = &(&(field.get(k) + &(&a * &inner)) - &c.b(k)) + &CMatrix::scalar(m, z);
    Ok(lhs.op_norm())
}

/// Finite-section Weyl matrix: the unique `M_N` whose Weyl-type solution
/// `theta - phi A(k0)^{-1} M_N` vanishes at the Dirichlet cutoff site `N`,
/// i.e. `M_N(z, k0) = A(k0) phi(z, N, k0)^{-1} theta(z, N, k0)`. Converges
/// to `M_+` as `N -> +infinity` and to `M_-` as `N -> -infinity`.
pub fn weyl_m_truncated(c: &JacobiCoeffs, z: Complex64, k0: i64, n: i64) -> Result<CMatrix> {
    if n == k0 {
        return Err(Error::validation("truncation site must differ from k0"));
    }
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let lo = k0.min(n);
    let hi = (k0 + 1).max(n);
    let (phi, theta) = fundamental_solutions(c, z, k0, lo, hi)?;
    Ok(&c.a(k0) * &phi.get(n).solve(theta.get(n))?)
}

/// Weyl solutions `psi_+- = theta - phi A(k0)^{-1} M_+-(z, k0)` tabulated on
/// `[k_lo, k_hi]`, along with the Weyl pair that generated them.
pub fn weyl_solutions(
    c: &JacobiCoeffs,
    z: Complex64,
    k0: i64,
    k_lo: i64,
    k_hi: i64,
) -> Result<(MatSeq, MatSeq, WeylPair)> {
    let pair = weyl_m(c, z, k0)?;
    let (phi, theta) = fundamental_solutions(c, z, k0, k_lo.min(k0), k_hi.max(k0 + 1))?;
    let a0_inv = c.a(k0).inv()?;
    let build = |mw: &CMatrix| -> Vec<CMatrix> {
        let coef = &a0_inv * mw;
        (k_lo..=k_hi)
            .map(|k| theta.get(k) - &(phi.get(k) * &coef))
            .collect()
    };
    let psi_plus = MatSeq::new(k_lo, build(&pair.m_plus));
    let psi_minus = MatSeq::new(k_lo, build(&pair.m_minus));
    Ok((psi_plus, psi_minus, pair))
}

/// Green's matrix `G(z, k, l)` of the whole-line operator via the Weyl
/// solutions. The conjugate-point solutions use `M_+-(conj z) = M_+-(z)^*`.
pub fn greens_matrix(c: &JacobiCoeffs, z: Complex64, k0: i64, k: i64, l: i64) -> Result<CMatrix> {
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let lo = k.min(l).min(k0);
    let hi = k.max(l).max(k0 + 1);
    let (psi_p, psi_m, pair) = weyl_solutions(c, z, k0, lo, hi)?;
    let (psi_p_bar, psi_m_bar, _) = weyl_solutions(c, z.conj(), k0, lo, hi)?;
    let dinv = (&pair.m_minus - &pair.m_plus).inv()?;
    if l <= k {
        Ok(&(psi_p.get(k) * &dinv) * &psi_m_bar.get(l).adjoint())
    } else {
        Ok(&(psi_m.get(k) * &dinv) * &psi_p_bar.get(l).adjoint())
    }
}

/// All four Green's blocks the inverse theorems consume, from one setup.
pub fn greens_sample(c: &JacobiCoeffs, z: Complex64, k0: i64) -> Result<GreensSample> {
    if z.im == 0.0 {
        return Err(Error::RealAxis);
    }
    let (psi_p, psi_m, pair) = weyl_solutions(c, z, k0, k0, k0 + 1)?;
    let (psi_p_bar, psi_m_bar, _) = weyl_solutions(c, z.conj(), k0, k0, k0 + 1)?;
    let dinv = (&pair.m_minus - &pair.m_plus).inv()?;
    let g0 = &(psi_p.get(k0) * &dinv) * &psi_m_bar.get(k0).adjoint();
    let g01 = &(psi_m.get(k0) * &dinv) * &psi_p_bar.get(k0 + 1).adjoint();
    let g10 = &(psi_p.get(k0 + 1) * &dinv) * &psi_m_bar.get(k0).adjoint();
    let g1 = &(psi_p.get(k0 + 1) * &dinv) * &psi_m_bar.get(k0 + 1).adjoint();
    Ok(GreensSample {
        z,
        k0,
        g0,
        g1,
        g01,
        g10,
    })
}

/// Samples along the ray `arg z = angle` at the given moduli.
pub fn ray_samples(
    c: &JacobiCoeffs,
    k0: i64,
    angle: f64,
    moduli: &[f64],
) -> Result<Vec<GreensSample>> {
    let dir = c64(angle.cos(), angle.sin());
    moduli
        .iter()
        .map(|&r| greens_sample(c, dir * r, k0))
        .collect()
}

/// Half-line Weyl m-function of the Dirichlet restriction to
/// `[k0, +-infinity)`, derived from the whole-line Weyl matrices:
/// `m_+ = -(M_+ + z - B(k0))^{-1}` and `m_- = M_-^{-1}`.
pub fn halfline_m(c: &JacobiCoeffs, z: Complex64, k0: i64, side: Side) -> Result<CMatrix> {
    let m = c.dim();
    let pair = weyl_m(c, z, k0)?;
    match side {
        Side::Plus => {
            let core = &(&pair.m_plus + &CMatrix::scalar(m, z)) - &c.b(k0);
            Ok(-&core.inv()?)
        }
        Side::Minus => pair.m_minus.inv(),
    }
}

/// The 2m x 2m Weyl-Titchmarsh matrix of the whole-line operator, assembled
/// from the Weyl pair. `ordering_flipped` selects the other reading of the
/// lower-right block (the two agree).
pub fn big_m(c: &JacobiCoeffs, z: Complex64, k0: i64, ordering_flipped: bool) -> Result<CMatrix> {
    let pair = weyl_m(c, z, k0)?;
    let dinv = (&pair.m_minus - &pair.m_plus).inv()?;
    let sum = &pair.m_minus + &pair.m_plus;
    let m11 = dinv.clone();
    let m12 = (&dinv * &sum).scale(c64(0.5, 0.0));
    let m21 = (&sum * &dinv).scale(c64(0.5, 0.0));
    let m22 = if ordering_flipped {
        &(&pair.m_minus * &dinv) * &pair.m_plus
    } else {
        &(&pair.m_plus * &dinv) * &pair.m_minus
    };
    Ok(CMatrix::from_blocks(&m11, &m12, &m21, &m22))
}

/// Residual of the identity relating the 2m x 2m Weyl-Titchmarsh matrix to
/// the 2 x 2 block Green's matrix at `(k0, k0+1)`:
/// `M = diag(I, -A(k0)) GG diag(I, -A(k0)) + antidiag(I, I)/2`.
pub fn big_m_remark_residual(c: &JacobiCoeffs, z: Complex64, k0: i64) -> Result<f64> {
    let m = c.dim();
    let big = big_m(c, z, k0, false)?;
    let s = greens_sample(c, z, k0)?;
    let gg = CMatrix::from_blocks(&s.g0, &s.g01, &s.g10, &s.g1);
    let zero = CMatrix::zeros(m);
    let eye = CMatrix::identity(m);
    let d = CMatrix::from_blocks(&eye, &zero, &zero, &(-&c.a(k0)));
    let anti = CMatrix::from_blocks(&zero, &eye, &eye, &zero).scale(c64(0.5, 0.0));
    let check = &(&(&d * &gg) * &d) + &anti;
    Ok((&big - &check).max_abs())
}
