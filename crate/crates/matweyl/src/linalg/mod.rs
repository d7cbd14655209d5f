//! Dense complex matrix kernel.
//!
//! Everything in the library works with small dense complex matrices
//! (`m` rarely above 8, dense truncations up to a few hundred). The kernel
//! is self-contained: storage, arithmetic, LU solves, eigenvalues of general
//! complex matrices, Hermitian eigendecompositions, and circle contours for
//! Cauchy-integral quadrature.

mod contour;
mod eig;

pub use contour::{cauchy_quadrature, cauchy_quadrature_adaptive, Contour, Orientation};

use num_complex::Complex64;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Shorthand complex constructor.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Condition-estimate ceiling used by [`CMatrix::inverse`] unless the caller
/// overrides it. Separates genuine singularity from roundoff noise.
pub const COND_LIMIT_DEFAULT: f64 = 1e12;

/// Dense square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.n, self.n)?;
        for i in 0..self.n {
            write!(f, "  ")?;
            for j in 0..self.n {
                let v = self[(i, j)];
                write!(f, "{:+.4e}{:+.4e}i  ", v.re, v.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix dimension must be at least 1");
        CMatrix {
            n,
            data: vec![Complex64::default(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c64(1.0, 0.0);
        }
        m
    }

    /// `c * I_n`.
    pub fn scalar(n: usize, c: Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::validation("empty matrix"));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::validation(format!(
                    "row {i} has length {} in a {n}-row matrix",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        Ok(m)
    }

    /// 2x2 block assembly; all blocks must share the same dimension.
    pub fn from_blocks(b11: &CMatrix, b12: &CMatrix, b21: &CMatrix, b22: &CMatrix) -> Self {
        let m = b11.n;
        assert!(b12.n == m && b21.n == m && b22.n == m);
        let mut out = Self::zeros(2 * m);
        for i in 0..m {
            for j in 0..m {
                out[(i, j)] = b11[(i, j)];
                out[(i, j + m)] = b12[(i, j)];
                out[(i + m, j)] = b21[(i, j)];
                out[(i + m, j + m)] = b22[(i, j)];
            }
        }
        out
    }

    /// Extract the `m x m` block with upper-left corner `(i0, j0)`.
    pub fn block(&self, i0: usize, j0: usize, m: usize) -> CMatrix {
        assert!(i0 + m <= self.n && j0 + m <= self.n);
        CMatrix::from_fn(m, |i, j| self[(i0 + i, j0 + j)])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| self[(i, j)].conj())
    }

    pub fn scale(&self, c: Complex64) -> CMatrix {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Hermitian part `(M + M*)/2`.
    pub fn hermitian_part(&self) -> CMatrix {
        CMatrix::from_fn(self.n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)].conj()))
    }

    /// Imaginary part in the operator sense, `(M - M*)/(2i)`. Hermitian by
    /// construction.
    pub fn imag_part(&self) -> CMatrix {
        let half_i = c64(0.0, -0.5); // 1/(2i)
        CMatrix::from_fn(self.n, |i, j| (self[(i, j)] - self[(j, i)].conj()) * half_i)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn hermitian_defect(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        let mut out = vec![Complex64::default(); self.n];
        for i in 0..self.n {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            let mut acc = Complex64::default();
            for (a, x) in row.iter().zip(v.iter()) {
                acc += a * x;
            }
            out[i] = acc;
        }
        out
    }

    fn matmul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.n, rhs.n, "dimension mismatch in matrix product");
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::default() {
                    continue;
                }
                let rrow = &rhs.data[k * n..(k + 1) * n];
                let orow = &mut out.data[i * n..(i + 1) * n];
                for (o, b) in orow.iter_mut().zip(rrow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// LU factorization with partial pivoting, reusable across right-hand
    /// sides.
    pub fn lu_factor(&self) -> Result<Lu> {
        let (lu, piv) = self.lu()?;
        Ok(Lu { n: self.n, lu, piv })
    }

    /// LU factorization with partial pivoting. Returns the packed factors and
    /// the pivot permutation.
    fn lu(&self) -> Result<(Vec<Complex64>, Vec<usize>)> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for i in (k + 1)..n {
                let v = a[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::singular(format!("zero pivot at column {k}")));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in (k + 1)..n {
                let factor = a[i * n + k] / pivot;
                a[i * n + k] = factor;
                for j in (k + 1)..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= factor * akj;
                }
            }
        }
        Ok((a, piv))
    }

    /// Solve `self * X = rhs`.
    pub fn solve(&self, rhs: &CMatrix) -> Result<CMatrix> {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let (lu, piv) = self.lu()?;
        let mut x = CMatrix::zeros(n);
        // permute rhs rows
        for (i, &pi) in piv.iter().enumerate() {
            for j in 0..n {
                x[(i, j)] = rhs[(pi, j)];
            }
        }
        // forward substitution (unit lower)
        for i in 0..n {
            for k in 0..i {
                let l = lu[i * n + k];
                for j in 0..n {
                    let v = x[(k, j)];
                    x[(i, j)] -= l * v;
                }
            }
        }
        // back substitution
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = lu[i * n + k];
                for j in 0..n {
                    let v = x[(k, j)];
                    x[(i, j)] -= u * v;
                }
            }
            let d = lu[i * n + i];
            for j in 0..n {
                x[(i, j)] /= d;
            }
        }
        Ok(x)
    }

    /// Inverse with a 1-norm condition estimate gate.
    ///
    /// Refuses matrices whose condition estimate exceeds `cond_limit`
    /// (pass [`COND_LIMIT_DEFAULT`] for the standard gate).
    pub fn inverse(&self, cond_limit: f64) -> Result<CMatrix> {
        let inv = self.solve(&CMatrix::identity(self.n))?;
        let cond = self.norm_1() * inv.norm_1();
        if !cond.is_finite() || cond > cond_limit {
            return Err(Error::singular(format!(
                "condition estimate {cond:.3e} exceeds limit {cond_limit:.3e}"
            )));
        }
        Ok(inv)
    }

    /// Inverse with the default condition gate.
    pub fn inv(&self) -> Result<CMatrix> {
        self.inverse(COND_LIMIT_DEFAULT)
    }
}

/// Packed LU factors with partial pivoting.
pub struct Lu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl Lu {
    /// Solve for a single right-hand side vector.
    pub fn solve_vec(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                let v = x[k];
                x[i] -= l * v;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[i * n + k];
                let v = x[k];
                x[i] -= u * v;
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&CMatrix> for &CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                assert_eq!(self.n, rhs.n);
                CMatrix {
                    n: self.n,
                    data: self
                        .data
                        .iter()
                        .zip(rhs.data.iter())
                        .map(|(a, b)| a $op b)
                        .collect(),
                }
            }
        }
    };
}

macro_rules! binop_owned {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &CMatrix) -> CMatrix {
                (&self) $op rhs
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop_owned!(Add, add, +);
binop_owned!(Sub, sub, -);

impl Mul<&CMatrix> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(c64(-1.0, 0.0))
    }
}

impl Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, c: Complex64) -> CMatrix {
        self.scale(c)
    }
}

impl Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, c: f64) -> CMatrix {
        self.scale(c64(c, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i2() -> CMatrix {
        CMatrix::identity(2)
    }

    #[test]
    fn imag_part_of_purely_imaginary_identity() {
        let m = CMatrix::scalar(2, c64(0.0, 1.0));
        let im = m.imag_part();
        assert!((&im - &i2()).max_abs() < 1e-15);
    }

    #[test]
    fn imag_part_of_hermitian_is_zero() {
        let h = CMatrix::from_rows(&[
            vec![c64(2.0, 0.0), c64(1.0, 3.0)],
            vec![c64(1.0, -3.0), c64(-1.0, 0.0)],
        ])
        .unwrap();
        assert!(h.imag_part().max_abs() < 1e-15);
    }

    #[test]
    fn imag_part_scalar_definition() {
        let m = CMatrix::scalar(1, c64(1.0, 2.0));
        let im = m.imag_part();
        assert!((im[(0, 0)] - c64(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn imag_part_is_hermitian_and_odd() {
        let m = CMatrix::from_rows(&[
            vec![c64(0.3, -1.2), c64(2.0, 0.7)],
            vec![c64(-0.1, 0.4), c64(1.5, 2.5)],
        ])
        .unwrap();
        let im = m.imag_part();
        assert!(im.hermitian_defect() < 1e-14);
        let sum = &im + &(-&m).imag_part();
        assert!(sum.max_abs() < 1e-14);
    }

    #[test]
    fn solve_and_inverse_round_trip() {
        let a = CMatrix::from_rows(&[
            vec![c64(2.0, 1.0), c64(-1.0, 0.5)],
            vec![c64(0.0, 3.0), c64(1.0, -2.0)],
        ])
        .unwrap();
        let inv = a.inv().unwrap();
        let prod = &a * &inv;
        assert!((&prod - &i2()).max_abs() < 1e-13);
    }

    #[test]
    fn inverse_of_diagonal() {
        let d = CMatrix::from_rows(&[
            vec![c64(2.0, 0.0), c64(0.0, 0.0)],
            vec![c64(0.0, 0.0), c64(0.0, 1.0)],
        ])
        .unwrap();
        let inv = d.inv().unwrap();
        assert!((inv[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-15);
        assert!((inv[(1, 1)] - c64(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let s = CMatrix::from_rows(&[
            vec![c64(1.0, 0.0), c64(2.0, 0.0)],
            vec![c64(2.0, 0.0), c64(4.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(s.inv(), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn block_assembly_round_trip() {
        let a = CMatrix::scalar(2, c64(1.0, 0.0));
        let b = CMatrix::scalar(2, c64(2.0, 0.0));
        let c = CMatrix::scalar(2, c64(3.0, 0.0));
        let d = CMatrix::scalar(2, c64(4.0, 0.0));
        let big = CMatrix::from_blocks(&a, &b, &c, &d);
        assert_eq!(big.block(0, 2, 2), b);
        assert_eq!(big.block(2, 0, 2), c);
    }
}
