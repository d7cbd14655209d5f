//! Eigenvalue machinery: shifted QR for general complex matrices and a
//! threshold cyclic Jacobi scheme for Hermitian ones.

use num_complex::Complex64;

use super::{c64, CMatrix};
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

impl CMatrix {
    /// Eigenvalues (with multiplicity) of a general complex matrix.
    ///
    /// Householder reduction to Hessenberg form followed by explicitly
    /// shifted QR with Wilkinson shifts. `tol` participates only in the
    /// convergence bookkeeping; deflation happens at roundoff level.
    pub fn spectrum(&self, tol: f64) -> Result<Vec<Complex64>> {
        assert!(tol > 0.0, "spectrum: tol must be positive");
        let n = self.n;
        if n == 1 {
            return Ok(vec![self[(0, 0)]]);
        }
        let mut h = self.hessenberg();
        let scale = h.max_abs().max(1.0);
        let budget = 100 * n;
        let mut eigs: Vec<Complex64> = Vec::with_capacity(n);
        let mut hi = n - 1;
        let mut iters_on_block = 0usize;
        let mut total_iters = 0usize;

        loop {
            // deflate negligible subdiagonals
            for i in 0..hi {
                let sub = h[(i + 1, i)].norm();
                let local = h[(i, i)].norm() + h[(i + 1, i + 1)].norm();
                if sub <= EPS * local.max(EPS * scale) {
                    h[(i + 1, i)] = Complex64::default();
                }
            }
            // peel converged eigenvalues from the bottom
            while hi > 0 && h[(hi, hi - 1)] == Complex64::default() {
                eigs.push(h[(hi, hi)]);
                hi -= 1;
                iters_on_block = 0;
            }
            if hi == 0 {
                eigs.push(h[(0, 0)]);
                break;
            }
            // active block [lo, hi]
            let mut lo = hi;
            while lo > 0 && h[(lo, lo - 1)] != Complex64::default() {
                lo -= 1;
            }

            if total_iters >= budget {
                return Err(Error::NonConvergence {
                    n,
                    sweeps: total_iters,
                });
            }

            let shift = if iters_on_block > 0 && iters_on_block % 12 == 0 {
                // exceptional shift to break symmetry stalls
                h[(hi, hi)] + c64(0.75, 0.3) * h[(hi, hi - 1)].norm()
            } else {
                wilkinson_shift(
                    h[(hi - 1, hi - 1)],
                    h[(hi - 1, hi)],
                    h[(hi, hi - 1)],
                    h[(hi, hi)],
                )
            };
            qr_step(&mut h, lo, hi, shift);
            iters_on_block += 1;
            total_iters += 1;
        }
        Ok(eigs)
    }

    /// Unitary reduction to upper Hessenberg form (similarity transform).
    fn hessenberg(&self) -> CMatrix {
        let n = self.n;
        let mut h = self.clone();
        for k in 0..n.saturating_sub(2) {
            // Householder vector for column k below the subdiagonal
            let mut x: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
            let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if xnorm <= EPS * h.max_abs() {
                continue;
            }
            let alpha = if x[0].norm() > 0.0 {
                -(x[0] / x[0].norm()) * xnorm
            } else {
                c64(-xnorm, 0.0)
            };
            x[0] -= alpha;
            let vnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if vnorm == 0.0 {
                continue;
            }
            for v in x.iter_mut() {
                *v /= vnorm;
            }
            // H <- (I - 2vv*) H (I - 2vv*)
            for j in 0..n {
                let mut dot = Complex64::default();
                for (idx, v) in x.iter().enumerate() {
                    dot += v.conj() * h[(k + 1 + idx, j)];
                }
                let dot = dot * 2.0;
                for (idx, v) in x.iter().enumerate() {
                    let upd = v * dot;
                    h[(k + 1 + idx, j)] -= upd;
                }
            }
            for i in 0..n {
                let mut dot = Complex64::default();
                for (idx, v) in x.iter().enumerate() {
                    dot += h[(i, k + 1 + idx)] * v;
                }
                let dot = dot * 2.0;
                for (idx, v) in x.iter().enumerate() {
                    let upd = dot * v.conj();
                    h[(i, k + 1 + idx)] -= upd;
                }
            }
            for i in k + 2..n {
                h[(i, k)] = Complex64::default();
            }
        }
        h
    }

    /// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues
    /// and a unitary matrix whose columns are the eigenvectors.
    ///
    /// Threshold cyclic Jacobi; quadratically convergent and unconditionally
    /// stable at the sizes used here.
    pub fn eig_hermitian(&self) -> Result<(Vec<f64>, CMatrix)> {
        self.jacobi_hermitian(true)
    }

    /// Eigenvalues only.
    pub fn eigvals_hermitian(&self) -> Result<Vec<f64>> {
        Ok(self.jacobi_hermitian(false)?.0)
    }

    fn jacobi_hermitian(&self, want_vectors: bool) -> Result<(Vec<f64>, CMatrix)> {
        let n = self.n;
        debug_assert!(
            self.hermitian_defect() <= 1e-10 * (1.0 + self.max_abs()),
            "jacobi_hermitian called on a non-Hermitian matrix"
        );
        let mut a = self.hermitian_part();
        let mut v = CMatrix::identity(n);
        let fnorm = a.frob_norm().max(EPS);
        let max_sweeps = 40;

        for _sweep in 0..max_sweeps {
            let off: f64 = {
                let mut s = 0.0;
                for p in 0..n {
                    for q in (p + 1)..n {
                        s += a[(p, q)].norm_sqr();
                    }
                }
                (2.0 * s).sqrt()
            };
            if off <= 1e-15 * fnorm {
                return finish_jacobi(a, v, want_vectors);
            }
            let thresh = off / (n as f64);
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let g = apq.norm();
                    if g <= thresh * 1e-3 || g <= 1e-300 {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let phase = apq / g;
                    // real Jacobi rotation on the phase-reduced block
                    let tau = (aqq - app) / (2.0 * g);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // U columns: u1 = (c, -s*conj(phase)), u2 = (s, c*conj(phase))
                    let u11 = c64(c, 0.0);
                    let u21 = phase.conj() * (-s);
                    let u12 = c64(s, 0.0);
                    let u22 = phase.conj() * c;
                    // A <- U* A U (rows/cols p, q)
                    for j in 0..n {
                        let ap = a[(p, j)];
                        let aq = a[(q, j)];
                        a[(p, j)] = u11.conj() * ap + u21.conj() * aq;
                        a[(q, j)] = u12.conj() * ap + u22.conj() * aq;
                    }
                    for i in 0..n {
                        let ap = a[(i, p)];
                        let aq = a[(i, q)];
                        a[(i, p)] = ap * u11 + aq * u21;
                        a[(i, q)] = ap * u12 + aq * u22;
                    }
                    a[(p, q)] = Complex64::default();
                    a[(q, p)] = Complex64::default();
                    if want_vectors {
                        for i in 0..n {
                            let vp = v[(i, p)];
                            let vq = v[(i, q)];
                            v[(i, p)] = vp * u11 + vq * u21;
                            v[(i, q)] = vp * u12 + vq * u22;
                        }
                    }
                }
            }
        }
        Err(Error::NonConvergence { n, sweeps: 40 })
    }

    /// Largest singular value (spectral norm).
    pub fn op_norm(&self) -> f64 {
        let n = self.n;
        if self.max_abs() == 0.0 {
            return 0.0;
        }
        if n <= 64 {
            let gram = &self.adjoint() * self;
            match gram.eigvals_hermitian() {
                Ok(vals) => vals.last().copied().unwrap_or(0.0).max(0.0).sqrt(),
                Err(_) => self.op_norm_power(),
            }
        } else {
            self.op_norm_power()
        }
    }

    fn op_norm_power(&self) -> f64 {
        let n = self.n;
        let mut v: Vec<Complex64> = (0..n)
            .map(|i| c64(1.0 + 0.3 * ((i * 2654435761) % 97) as f64 / 97.0, 0.1))
            .collect();
        normalize(&mut v);
        let adj = self.adjoint();
        let mut sigma = 0.0f64;
        for _ in 0..5000 {
            let w = self.matvec(&v);
            let new_sigma = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut u = adj.matvec(&w);
            normalize(&mut u);
            let done = (new_sigma - sigma).abs() <= 1e-13 * new_sigma.max(1e-300);
            sigma = new_sigma;
            v = u.drain(..).collect();
            if done {
                break;
            }
        }
        sigma
    }

    /// Smallest eigenvalue of a Hermitian matrix.
    pub fn min_eig_hermitian(&self) -> Result<f64> {
        Ok(self
            .eigvals_hermitian()?
            .first()
            .copied()
            .unwrap_or(f64::NAN))
    }

    /// Hermitian PSD square root. Eigenvalues below `-neg_tol` raise
    /// `NotPositiveDefinite`; small negatives inside the tolerance are
    /// clamped to zero.
    pub fn hermitian_sqrt(&self, neg_tol: f64) -> Result<CMatrix> {
        let (vals, v) = self.eig_hermitian()?;
        let scale = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1.0);
        if let Some(&min) = vals.first() {
            if min < -neg_tol * scale {
                return Err(Error::NotPositiveDefinite { min_eig: min });
            }
        }
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for (k, &lam) in vals.iter().enumerate() {
            let r = lam.max(0.0).sqrt();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += v[(i, k)] * r * v[(j, k)].conj();
                }
            }
        }
        Ok(out)
    }

    /// Eigenvector for an already computed eigenvalue via one-shot inverse
    /// iteration. Used by tests to certify eigenpair residuals.
    pub fn eigvec_for(&self, lambda: Complex64) -> Result<Vec<Complex64>> {
        let n = self.n;
        let scale = self.max_abs().max(1.0);
        let shift = lambda + c64(1e-11 * scale, 1e-12 * scale);
        let shifted = self - &CMatrix::scalar(n, shift);
        let mut b = CMatrix::zeros(n);
        for i in 0..n {
            b[(i, 0)] = c64(1.0 + (i as f64) * 0.17, 0.41 - 0.05 * i as f64);
        }
        let mut v: Vec<Complex64> = (0..n).map(|i| b[(i, 0)]).collect();
        for _ in 0..3 {
            let rhs = CMatrix::from_fn(n, |i, j| if j == 0 { v[i] } else { Complex64::default() });
            let sol = shifted.solve(&rhs)?;
            v = (0..n).map(|i| sol[(i, 0)]).collect();
            normalize(&mut v);
        }
        Ok(v)
    }
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

fn finish_jacobi(a: CMatrix, v: CMatrix, want_vectors: bool) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vecs = if want_vectors {
        CMatrix::from_fn(n, |i, j| v[(i, order[j])])
    } else {
        CMatrix::identity(1)
    };
    Ok((vals, vecs))
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    // eigenvalue of [[a, b], [c, d]] closest to d
    let tr = a + d;
    let det = a * d - b * c;
    let disc = (tr * tr - det * 4.0).sqrt();
    let l1 = (tr + disc) * 0.5;
    let l2 = (tr - disc) * 0.5;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// One explicit QR step with shift on the active window `[lo, hi]`.
fn qr_step(h: &mut CMatrix, lo: usize, hi: usize, shift: Complex64) {
    let n = h.dim();
    let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo);
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    // QR by Givens: zero subdiagonal of the shifted Hessenberg block
    for i in lo..hi {
        let a = h[(i, i)];
        let b = h[(i + 1, i)];
        let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 || a.norm() == 0.0 && b.norm() == 0.0 {
            (1.0, Complex64::default())
        } else if a.norm() == 0.0 {
            (0.0, c64(1.0, 0.0))
        } else {
            let alpha = a / a.norm();
            (a.norm() / r, alpha * b.conj() / r)
        };
        rot.push((c, s));
        // apply G = [[c, s], [-conj(s), c]] to rows i, i+1
        for j in i..n {
            let hi_j = h[(i, j)];
            let hip_j = h[(i + 1, j)];
            h[(i, j)] = hi_j * c + s * hip_j;
            h[(i + 1, j)] = -s.conj() * hi_j + hip_j * c;
        }
    }
    // RQ: multiply by G_i^* on the right (columns i, i+1)
    for (idx, &(c, s)) in rot.iter().enumerate() {
        let i = lo + idx;
        let top = if i + 2 <= hi { i + 2 } else { hi };
        for row in 0..=top.min(n - 1) {
            let hct = h[(row, i)];
            let hcp = h[(row, i + 1)];
            h[(row, i)] = hct * c + hcp * s.conj();
            h[(row, i + 1)] = -(hct * s) + hcp * c;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}
