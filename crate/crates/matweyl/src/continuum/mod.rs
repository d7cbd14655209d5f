//! Matrix-valued Schrodinger and Dirac operators on the line, sampled on a
//! uniform grid with compactly supported coefficients: Riccati evolution of
//! the Weyl matrices from the exact free tails, diagonal Green's-matrix
//! identities, pointwise recovery of the Weyl matrices from `(g, g')`, the
//! Dirac-squaring map, and the exponential-locality probe.

pub mod ode;
mod ops;

pub use ops::{
    diag_green_dirac, diag_green_schrodinger, dirac_square, dirac_to_schrodinger_m,
    energy_identity_gap_dirac, energy_identity_gap_schrodinger, local_closeness_probe,
    recover_m_dirac, recover_m_schrodinger, riccati_evolve_dirac, riccati_evolve_schrodinger,
    riccati_residuals_dirac, riccati_residuals_schrodinger, upper_sqrt, weyl_tail_dirac,
    weyl_tail_schrodinger, DiagGreen, ProbeKind, ProbePair,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Uniform grid `x_lo, x_lo + h, ..., x_lo + (len-1) h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_lo: f64,
    pub h: f64,
    pub len: usize,
}

impl Grid {
    pub fn new(x_lo: f64, h: f64, len: usize) -> Result<Self> {
        if !(h > 0.0) || len < 9 {
            return Err(Error::validation(
                "grid needs positive step and at least 9 points",
            ));
        }
        Ok(Grid { x_lo, h, len })
    }

    /// Symmetric grid around `center` with half-width `r`.
    pub fn centered(center: f64, r: f64, h: f64) -> Result<Self> {
        let half = (r / h).ceil() as usize;
        Grid::new(center - half as f64 * h, h, 2 * half + 1)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + self.h * i as f64
    }

    pub fn x_hi(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn points(&self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator + '_ {
        (0..self.len).map(|i| self.x(i))
    }

    pub fn center_index(&self) -> usize {
        (self.len - 1) / 2
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.x_lo) / self.h;
        let i = t.round();
        if (t - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.len {
            Some(i as usize)
        } else {
            None
        }
    }
}

fn validate_hermitian_samples(name: &str, grid: &Grid, vals: &[CMatrix], m: usize) -> Result<()> {
    if vals.len() != grid.len {
        return Err(Error::validation(format!(
            "{name} has {} samples for a {}-point grid",
            vals.len(),
            grid.len
        )));
    }
    for (i, v) in vals.iter().enumerate() {
        if v.dim() != m {
            return Err(Error::validation(format!("{name}[{i}] has wrong dimension")));
        }
        if !v.is_finite() {
            return Err(Error::validation(format!("{name}[{i}] has non-finite entries")));
        }
        if v.hermitian_defect() > 1e-10 * (1.0 + v.max_abs()) {
            return Err(Error::validation(format!("{name}[{i}] is not Hermitian")));
        }
    }
    // the free-tail initialization assumes the coefficients vanish at the
    // edges of the grid
    for idx in [0, grid.len - 1] {
        if vals[idx].max_abs() > 1e-10 {
            return Err(Error::validation(format!(
                "{name} must vanish at the grid edge (index {idx})"
            )));
        }
    }
    Ok(())
}

/// Grid-sampled Hermitian potential `Q(x)`, identically zero outside the
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SchrodingerModel {
    pub m: usize,
    pub grid: Grid,
    pub q: Vec<CMatrix>,
}

impl SchrodingerModel {
    pub fn new(m: usize, grid: Grid, q: Vec<CMatrix>) -> Result<Self> {
        validate_hermitian_samples("Q", &grid, &q, m)?;
        Ok(SchrodingerModel { m, grid, q })
    }

    pub fn max_norm(&self) -> f64 {
        self.q.iter().map(|v| v.op_norm()).fold(0.0, f64::max)
    }
}

/// Grid-sampled Dirac coefficients in the off-diagonal normal form
/// (`B11`, `B12` Hermitian; the lower blocks are `B12`, `-B11`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiracModel {
    pub m: usize,
    pub grid: Grid,
    pub b11: Vec<CMatrix>,
    pub b12: Vec<CMatrix>,
}

impl DiracModel {
    pub fn new(m: usize, grid: Grid, b11: Vec<CMatrix>, b12: Vec<CMatrix>) -> Result<Self> {
        validate_hermitian_samples("B11", &grid, &b11, m)?;
        validate_hermitian_samples("B12", &grid, &b12, m)?;
        Ok(DiracModel { m, grid, b11, b12 })
    }

    pub fn max_norm(&self) -> f64 {
        self.b11
            .iter()
            .chain(self.b12.iter())
            .map(|v| v.op_norm())
            .fold(0.0, f64::max)
    }
}

/// Weyl matrices `M_+-(z, x)` tabulated on the grid.
#[derive(Debug, Clone)]
pub struct WeylField {
    pub z: Complex64,
    pub grid: Grid,
    pub m_plus: Vec<CMatrix>,
    pub m_minus: Vec<CMatrix>,
}

impl WeylField {
    /// Herglotz structure check: `Im(+-M_+-) > 0` at every gridpoint for
    /// `Im z > 0`.
    pub fn validate(&self) -> Result<()> {
        let sign = self.z.im.signum();
        for (i, (p, q)) in self.m_plus.iter().zip(self.m_minus.iter()).enumerate() {
            let mp = p.imag_part().scale(crate::c64(sign, 0.0)).min_eig_hermitian()?;
            let mq = q.imag_part().scale(crate::c64(-sign, 0.0)).min_eig_hermitian()?;
            if mp <= 0.0 || mq <= 0.0 {
                return Err(Error::validation(format!(
                    "Weyl field loses the Herglotz property at gridpoint {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Values of a gridded matrix function at an arbitrary point by 6-point
/// local Lagrange interpolation (exact at the gridpoints).
pub(crate) fn interp_gridded(grid: &Grid, vals: &[CMatrix], x: f64) -> CMatrix {
    const POINTS: usize = 6;
    let n = grid.len;
    let t = (x - grid.x_lo) / grid.h;
    // exact hit avoids interpolation noise
    let r = t.round();
    if (t - r).abs() < 1e-12 && r >= 0.0 && (r as usize) < n {
        return vals[r as usize].clone();
    }
    let near = t.floor() as isize;
    let mut start = near - (POINTS as isize / 2 - 1);
    if start < 0 {
        start = 0;
    }
    if start as usize + POINTS > n {
        start = (n - POINTS) as isize;
    }
    let start = start as usize;
    let m = vals[0].dim();
    let mut acc = CMatrix::zeros(m);
    for i in 0..POINTS {
        let xi = grid.x(start + i);
        let mut w = 1.0;
        for j in 0..POINTS {
            if i != j {
                let xj = grid.x(start + j);
                w *= (x - xj) / (xi - xj);
            }
        }
        acc = &acc + &vals[start + i].scale(crate::c64(w, 0.0));
    }
    acc
}

/// Fourth-order first derivative of a gridded matrix function at index `i`
/// (central stencil inside, one-sided at the edges).
pub(crate) fn grid_derivative_4th(grid: &Grid, vals: &[CMatrix], i: usize) -> CMatrix {
    let n = grid.len;
    let h = grid.h;
    let m = vals[0].dim();
    let coef = |k: usize, c: f64| vals[k].scale(crate::c64(c / (12.0 * h), 0.0));
    if i >= 2 && i + 2 < n {
        let mut acc = CMatrix::zeros(m);
        acc = &acc + &coef(i - 2, 1.0);
        acc = &acc + &coef(i - 1, -8.0);
        acc = &acc + &coef(i + 1, 8.0);
        acc = &acc + &coef(i + 2, -1.0);
        acc
    } else if i < 2 {
        // one-sided 4th-order forward stencil
        let c = [-25.0, 48.0, -36.0, 16.0, -3.0];
        let mut acc = CMatrix::zeros(m);
        for (j, &cj) in c.iter().enumerate() {
            acc = &acc + &coef(i + j, cj);
        }
        acc
    } else {
        let c = [25.0, -48.0, 36.0, -16.0, 3.0];
        let mut acc = CMatrix::zeros(m);
        for (j, &cj) in c.iter().enumerate() {
            acc = &acc + &coef(i - j, cj);
        }
        acc
    }
}

/// Composite Simpson quadrature of gridded matrices over the index range
/// `[lo, hi]` (uniform step). Falls back to the 3/8 rule on the last three
/// cells when the interval count is odd.
pub(crate) fn simpson_gridded(grid: &Grid, vals: &[CMatrix], lo: usize, hi: usize) -> CMatrix {
    assert!(hi > lo && hi < grid.len);
    let m = vals[0].dim();
    let h = grid.h;
    let n_int = hi - lo;
    let mut acc = CMatrix::zeros(m);
    let simpson_upto = if n_int % 2 == 0 { hi } else { hi - 3 };
    let mut i = lo;
    while i + 2 <= simpson_upto {
        acc = &acc
            + &(&(&vals[i] + &vals[i + 1].scale(crate::c64(4.0, 0.0))) + &vals[i + 2])
                .scale(crate::c64(h / 3.0, 0.0));
        i += 2;
    }
    if n_int % 2 != 0 {
        let j = hi - 3;
        let term = (&(&vals[j] + &vals[j + 1].scale(crate::c64(3.0, 0.0)))
            + &(&vals[j + 2].scale(crate::c64(3.0, 0.0)) + &vals[j + 3]))
            .scale(crate::c64(3.0 * h / 8.0, 0.0));
        acc = &acc + &term;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c64;

    #[test]
    fn grid_indexing() {
        let g = Grid::centered(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.len, 9);
        assert!((g.x_lo + 1.0).abs() < 1e-15);
        assert_eq!(g.index_of(0.0), Some(g.center_index()));
        assert_eq!(g.index_of(0.13), None);
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = Grid::new(0.0, 0.1, 21).unwrap();
        let vals: Vec<CMatrix> = g
            .points()
            .map(|x| CMatrix::scalar(1, c64(1.0 + x + x.powi(3) - 0.5 * x.powi(5), 0.0)))
            .collect();
        for &x in &[0.037f64, 0.51, 1.234, 1.99] {
            let e = 1.0 + x + x.powi(3) - 0.5 * x.powi(5);
            let v = interp_gridded(&g, &vals, x)[(0, 0)].re;
            assert!((v - e).abs() < 1e-12, "interp at {x}: {v} vs {e}");
        }
    }

    #[test]
    fn derivative_stencils_are_fourth_order() {
        let g = Grid::new(0.0, 0.02, 101).unwrap();
        let vals: Vec<CMatrix> = g
            .points()
            .map(|x| CMatrix::scalar(1, c64((2.0 * x).sin(), 0.0)))
            .collect();
        for i in [0usize, 1, 25, 50, 99, 100] {
            let x = g.x(i);
            let d = grid_derivative_4th(&g, &vals, i)[(0, 0)].re;
            assert!((d - 2.0 * (2.0 * x).cos()).abs() < 1e-5, "index {i}");
        }
    }

    #[test]
    fn simpson_integrates_smooth_functions() {
        let g = Grid::new(0.0, 0.01, 101).unwrap();
        let vals: Vec<CMatrix> = g
            .points()
            .map(|x| CMatrix::scalar(1, c64(x.exp(), 0.0)))
            .collect();
        let q = simpson_gridded(&g, &vals, 0, 100)[(0, 0)].re;
        assert!((q - (1.0f64.exp() - 1.0)).abs() < 1e-10);
        // odd interval count path
        let q = simpson_gridded(&g, &vals, 0, 99)[(0, 0)].re;
        assert!((q - (0.99f64.exp() - 1.0)).abs() < 1e-10);
    }
}
