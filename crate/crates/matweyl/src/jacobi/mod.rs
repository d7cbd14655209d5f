//! Matrix-valued Jacobi operators `H = A S^+ + A^- S^- + B` on the lattice,
//! modeled as compactly supported perturbations of the free operator
//! (`A = I`, `B = 0` outside a finite window).

pub mod dense;
pub mod forward;
pub mod inverse;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Hermiticity / positivity slack used when validating coefficients.
const COEFF_TOL: f64 = 1e-10;

/// Coefficient sequences of a whole-line Jacobi operator. `a(k)` is the
/// off-diagonal (Hermitian positive definite) and `b(k)` the diagonal
/// (Hermitian) coefficient; outside `[k_min, k_max]` they are implicitly
/// `I` and `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiCoeffs {
    m: usize,
    k_min: i64,
    k_max: i64,
    a: Vec<CMatrix>,
    b: Vec<CMatrix>,
    bound: f64,
}

impl JacobiCoeffs {
    /// Free operator with no perturbation window (window degenerates to a
    /// single site holding the free values).
    pub fn free(m: usize) -> Self {
        JacobiCoeffs {
            m,
            k_min: 0,
            k_max: -1,
            a: Vec::new(),
            b: Vec::new(),
            bound: 1.0,
        }
    }

    /// Build from explicit windows. `a[i]`, `b[i]` are the coefficients at
    /// site `k_min + i`.
    pub fn new(m: usize, k_min: i64, a: Vec<CMatrix>, b: Vec<CMatrix>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::validation("A and B windows must have equal length"));
        }
        for (i, mat) in a.iter().enumerate() {
            if mat.dim() != m {
                return Err(Error::validation(format!("A({}) has wrong dimension", k_min + i as i64)));
            }
            if !mat.is_finite() {
                return Err(Error::validation(format!("A({}) has non-finite entries", k_min + i as i64)));
            }
            if mat.hermitian_defect() > COEFF_TOL * (1.0 + mat.max_abs()) {
                return Err(Error::validation(format!(
                    "A({}) is not Hermitian",
                    k_min + i as i64
                )));
            }
            let min_eig = mat.hermitian_part().min_eig_hermitian()?;
            if min_eig <= 0.0 {
                return Err(Error::validation(format!(
                    "A({}) is not positive definite (min eigenvalue {min_eig:.3e})",
                    k_min + i as i64
                )));
            }
        }
        for (i, mat) in b.iter().enumerate() {
            if mat.dim() != m {
                return Err(Error::validation(format!("B({}) has wrong dimension", k_min + i as i64)));
            }
            if !mat.is_finite() {
                return Err(Error::validation(format!("B({}) has non-finite entries", k_min + i as i64)));
            }
            if mat.hermitian_defect() > COEFF_TOL * (1.0 + mat.max_abs()) {
                return Err(Error::validation(format!(
                    "B({}) is not Hermitian",
                    k_min + i as i64
                )));
            }
        }
        let mut bound: f64 = 1.0; // free tail contributes ||I|| + 0
        for (am, bm) in a.iter().zip(b.iter()) {
            bound = bound.max(am.op_norm() + bm.op_norm());
        }
        let k_max = k_min + a.len() as i64 - 1;
        Ok(JacobiCoeffs {
            m,
            k_min,
            k_max,
            a,
            b,
            bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_max
    }

    /// Uniform coefficient bound `max_k (||A(k)|| + ||B(k)||)`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn support_len(&self) -> usize {
        if self.k_max < self.k_min {
            0
        } else {
            (self.k_max - self.k_min + 1) as usize
        }
    }

    pub fn a(&self, k: i64) -> CMatrix {
        if k >= self.k_min && k <= self.k_max {
            self.a[(k - self.k_min) as usize].clone()
        } else {
            CMatrix::identity(self.m)
        }
    }

    pub fn b(&self, k: i64) -> CMatrix {
        if k >= self.k_min && k <= self.k_max {
            self.b[(k - self.k_min) as usize].clone()
        } else {
            CMatrix::zeros(self.m)
        }
    }

    pub fn is_free_at(&self, k: i64) -> bool {
        k < self.k_min || k > self.k_max
    }
}

/// Matrix sequence on a contiguous window of lattice sites.
#[derive(Debug, Clone)]
pub struct MatSeq {
    k_lo: i64,
    mats: Vec<CMatrix>,
}

impl MatSeq {
    pub fn new(k_lo: i64, mats: Vec<CMatrix>) -> Self {
        MatSeq { k_lo, mats }
    }

    pub fn k_lo(&self) -> i64 {
        self.k_lo
    }

    pub fn k_hi(&self) -> i64 {
        self.k_lo + self.mats.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> &CMatrix {
        let idx = k - self.k_lo;
        assert!(
            idx >= 0 && (idx as usize) < self.mats.len(),
            "site {k} outside stored window [{}, {}]",
            self.k_lo,
            self.k_hi()
        );
        &self.mats[idx as usize]
    }

    pub fn contains(&self, k: i64) -> bool {
        k >= self.k_lo && k <= self.k_hi()
    }
}

/// Half-line Weyl M-matrices `M_+(z, k0)` and `M_-(z, k0)` of a whole-line
/// operator at a reference site.
#[derive(Debug, Clone)]
pub struct WeylPair {
    pub z: Complex64,
    pub k0: i64,
    pub m_plus: CMatrix,
    pub m_minus: CMatrix,
}

impl WeylPair {
    /// Herglotz-type structure checks: for `Im z > 0` the imaginary parts of
    /// `+-M_+-` are positive definite and the difference is invertible.
    pub fn validate(&self) -> Result<()> {
        if self.z.im == 0.0 {
            return Err(Error::RealAxis);
        }
        let sign = self.z.im.signum();
        let p = self.m_plus.imag_part().scale(crate::c64(sign, 0.0));
        let q = self.m_minus.imag_part().scale(crate::c64(-sign, 0.0));
        let min_p = p.min_eig_hermitian()?;
        let min_q = q.min_eig_hermitian()?;
        if min_p <= 0.0 || min_q <= 0.0 {
            return Err(Error::validation(format!(
                "Weyl pair violates the Herglotz property (min eigenvalues {min_p:.3e}, {min_q:.3e})"
            )));
        }
        (&self.m_minus - &self.m_plus).inv().map_err(|_| {
            Error::validation("M_- and M_+ coincide; the difference must be invertible")
        })?;
        Ok(())
    }
}

/// Green's-matrix data at one spectral point that the uniqueness theorems
/// consume: both diagonal blocks at `k0`, `k0 + 1` and both off-diagonal
/// neighbors.
#[derive(Debug, Clone)]
pub struct GreensSample {
    pub z: Complex64,
    pub k0: i64,
    /// `G(z, k0, k0)`
    pub g0: CMatrix,
    /// `G(z, k0+1, k0+1)`
    pub g1: CMatrix,
    /// `G(z, k0, k0+1)`
    pub g01: CMatrix,
    /// `G(z, k0+1, k0)`
    pub g10: CMatrix,
}

impl GreensSample {
    /// Diagonal Herglotz property for `Im z > 0`.
    pub fn validate(&self) -> Result<()> {
        if self.z.im > 0.0 {
            for (name, g) in [("g0", &self.g0), ("g1", &self.g1)] {
                let min = g.imag_part().min_eig_hermitian()?;
                if min <= 0.0 {
                    return Err(Error::validation(format!(
                        "{name} lost the Herglotz property (min imag eigenvalue {min:.3e})"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Finite point-mass matrix measure, normalized so the weights sum to the
/// identity.
#[derive(Debug, Clone)]
pub struct SpectralMeasure {
    pub m: usize,
    /// strictly increasing support points with Hermitian PSD weights
    pub atoms: Vec<(f64, CMatrix)>,
}

impl SpectralMeasure {
    pub fn new(m: usize, atoms: Vec<(f64, CMatrix)>) -> Result<Self> {
        let meas = SpectralMeasure { m, atoms };
        meas.validate()?;
        Ok(meas)
    }

    pub fn validate(&self) -> Result<()> {
        let mut total = CMatrix::zeros(self.m);
        let mut prev = f64::NEG_INFINITY;
        for (lam, w) in &self.atoms {
            if !(*lam > prev) {
                return Err(Error::validation("support points must increase strictly"));
            }
            prev = *lam;
            if w.dim() != self.m {
                return Err(Error::validation("weight dimension mismatch"));
            }
            if w.hermitian_defect() > 1e-10 * (1.0 + w.max_abs()) {
                return Err(Error::validation("weight is not Hermitian"));
            }
            let min = w.min_eig_hermitian()?;
            if min < -1e-10 {
                return Err(Error::validation(format!(
                    "weight has negative eigenvalue {min:.3e}"
                )));
            }
            total = &total + w;
        }
        let defect = (&total - &CMatrix::identity(self.m)).max_abs();
        if defect > 1e-10 {
            return Err(Error::validation(format!(
                "weights sum to I with defect {defect:.3e}"
            )));
        }
        Ok(())
    }

    /// Stieltjes transform `sum_j W_j / (lambda_j - z)`.
    pub fn stieltjes(&self, z: Complex64) -> CMatrix {
        let mut acc = CMatrix::zeros(self.m);
        for (lam, w) in &self.atoms {
            acc = &acc + &w.scale(1.0 / (crate::c64(*lam, 0.0) - z));
        }
        acc
    }
}

/// Windows and recovered coefficients produced by the inverse procedures.
#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub m: usize,
    pub k0: i64,
    /// recovered `A(k)` on `valid_a_range`
    pub a_rec: Vec<(i64, CMatrix)>,
    /// recovered `B(k)` on `valid_b_range`
    pub b_rec: Vec<(i64, CMatrix)>,
    pub valid_a_range: (i64, i64),
    pub valid_b_range: (i64, i64),
    /// per-coefficient extrapolation/consistency error estimates, keyed like
    /// the coefficient lists
    pub a_residuals: Vec<(i64, f64)>,
    pub b_residuals: Vec<(i64, f64)>,
}

impl ReconstructionReport {
    pub fn a_at(&self, k: i64) -> Option<&CMatrix> {
        self.a_rec.iter().find(|(kk, _)| *kk == k).map(|(_, m)| m)
    }

    pub fn b_at(&self, k: i64) -> Option<&CMatrix> {
        self.b_rec.iter().find(|(kk, _)| *kk == k).map(|(_, m)| m)
    }
}
