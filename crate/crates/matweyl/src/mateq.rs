//! Matrix-equation solvers: Sylvester equations `AX - XB = C` under spectral
//! separation (direct linearization and Cauchy-contour representation), the
//! accretive norm bound, the contractive Riccati fixed point `Y = YAY + B`,
//! and the spectrum-location predicate for Herglotz-type matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c64, cauchy_quadrature_adaptive, CMatrix, Contour};

/// Relative spectral-separation tolerance for Sylvester solvability.
pub const SYLVESTER_SEPARATION_RTOL: f64 = 1e-8;

/// Default residual tolerance for the Riccati fixed point.
pub const RICCATI_TOL_DEFAULT: f64 = 1e-12;
/// Default iteration budget for the Riccati fixed point. The contraction
/// factor is below 1 by hypothesis, so geometric convergence makes 200 ample.
pub const RICCATI_MAX_ITER_DEFAULT: usize = 200;

#[derive(Debug, Clone)]
pub struct SylvesterProblem {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl SylvesterProblem {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let n = a.dim();
        if b.dim() != n || c.dim() != n {
            return Err(Error::validation(
                "Sylvester problem requires three square matrices of equal dimension",
            ));
        }
        Ok(SylvesterProblem { a, b, c })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `|| A X - X B - C ||` in the spectral norm.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        (&(&(&self.a * x) - &(x * &self.b)) - &self.c).op_norm()
    }
}

#[derive(Debug, Clone)]
pub struct RiccatiProblem {
    pub a: CMatrix,
    pub b: CMatrix,
}

impl RiccatiProblem {
    /// Both norms must be strictly below 1/2 for the contraction argument.
    pub fn new(a: CMatrix, b: CMatrix) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::validation("Riccati problem dimension mismatch"));
        }
        let na = a.op_norm();
        let nb = b.op_norm();
        if na >= 0.5 || nb >= 0.5 {
            return Err(Error::ContractionViolated {
                detail: format!("need ||A|| < 1/2 and ||B|| < 1/2, got {na:.4} and {nb:.4}"),
            });
        }
        Ok(RiccatiProblem { a, b })
    }

    /// `|| X - X A X - B ||` in the spectral norm.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        (&(x - &(&(x * &self.a) * x)) - &self.b).op_norm()
    }
}

/// Minimum pairwise distance between two eigenvalue lists.
fn spectral_gap(sa: &[Complex64], sb: &[Complex64]) -> f64 {
    let mut gap = f64::INFINITY;
    for &x in sa {
        for &y in sb {
            gap = gap.min((x - y).norm());
        }
    }
    gap
}

fn check_separation(p: &SylvesterProblem) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let sa = p.a.spectrum(1e-10)?;
    let sb = p.b.spectrum(1e-10)?;
    let needed = SYLVESTER_SEPARATION_RTOL * (p.a.op_norm() + p.b.op_norm());
    let gap = spectral_gap(&sa, &sb);
    if gap <= needed {
        return Err(Error::SpectraOverlap {
            separation: gap,
            needed,
        });
    }
    Ok((sa, sb))
}

/// Unique solution of `AX - XB = C` via the Kronecker linearization
/// `(I (x) A - B^t (x) I) vec(X) = vec(C)`.
///
/// Intended for the small dimensions this library works at; fails with
/// `SpectraOverlap` when the solvability hypothesis is violated.
pub fn sylvester_direct(p: &SylvesterProblem) -> Result<CMatrix> {
    check_separation(p)?;
    solve_sylvester_kron(p)
}

fn solve_sylvester_kron(p: &SylvesterProblem) -> Result<CMatrix> {
    let n = p.dim();
    let nn = n * n;
    // vec(X) stacks columns: index (i, j) -> j*n + i
    let mut big = CMatrix::zeros(nn);
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for k in 0..n {
                big[(row, j * n + k)] += p.a[(i, k)];
            }
            for k in 0..n {
                big[(row, k * n + i)] -= p.b[(k, j)];
            }
        }
    }
    let mut rhs = CMatrix::zeros(nn);
    for j in 0..n {
        for i in 0..n {
            rhs[(j * n + i, 0)] = p.c[(i, j)];
        }
    }
    let sol = big.solve(&rhs)?;
    Ok(CMatrix::from_fn(n, |i, j| sol[(j * n + i, 0)]))
}

/// Circle enclosing `spec(A)` and excluding `spec(B)`, centered at the mean
/// of `spec(A)`. Radius follows the 1.25 x spread rule where that verifies,
/// otherwise the midpoint between the two spectral clusters.
pub fn default_contour(a: &CMatrix, b: &CMatrix) -> Result<Contour> {
    let sa = a.spectrum(1e-10)?;
    let sb = b.spectrum(1e-10)?;
    let center = sa.iter().sum::<Complex64>() / sa.len() as f64;
    let spread = sa.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    let dist_b = sb
        .iter()
        .map(|z| (z - center).norm())
        .fold(f64::INFINITY, f64::min);
    if spread >= dist_b {
        return Err(Error::SpectraMisplaced {
            detail: format!(
                "spec(B) (distance {dist_b:.3e}) intrudes into the spread of spec(A) ({spread:.3e})"
            ),
        });
    }
    let mut radius = 1.25 * spread;
    if !(radius > 0.0) || radius >= 0.9 * dist_b {
        radius = 0.5 * (spread + dist_b);
    }
    Contour::counterclockwise(center, radius, 64)
}

/// Explicit contour solution of `AX - XB = C`,
/// `X = (2 pi i)^{-1} \oint (A - z)^{-1} C (B - z)^{-1} dz`,
/// valid when `spec(A)` has winding number +1 and `spec(B)` winding number 0
/// with respect to the contour. Node count doubles adaptively.
pub fn sylvester_contour(p: &SylvesterProblem, contour: &Contour) -> Result<CMatrix> {
    let sa = p.a.spectrum(1e-10)?;
    let sb = p.b.spectrum(1e-10)?;
    // all of spec(A) strictly inside, all of spec(B) strictly outside
    for (name, spec, want_inside) in [("A", &sa, true), ("B", &sb, false)] {
        for &lam in spec.iter() {
            let d = contour.distance_to(lam);
            if d <= 1e-6 * contour.radius {
                return Err(Error::SpectraOnContour {
                    dist: d,
                    radius: contour.radius,
                });
            }
            if contour.contains(lam) != want_inside {
                return Err(Error::SpectraMisplaced {
                    detail: format!("eigenvalue {lam} of {name} on the wrong side of the contour"),
                });
            }
        }
    }
    let n = p.dim();
    let eye = CMatrix::identity(n);
    cauchy_quadrature_adaptive(contour, 1e-10, |z| {
        let az = &p.a - &eye.scale(z);
        let bz = &p.b - &eye.scale(z);
        // (A - z)^{-1} C (B - z)^{-1}
        let left = az.solve(&p.c).expect("resolvent off spectrum");
        let right_t = bz
            .adjoint()
            .solve(&left.adjoint())
            .expect("resolvent off spectrum");
        right_t.adjoint()
    })
}

/// Norm-bound check for the accretive Sylvester case: verifies the
/// preconditions (`A - (d/2)I` and `-B - (d/2)I` accretive) and returns
/// whether `|||X||| <= d^{-1} |||C|||` holds in both the spectral and the
/// Frobenius norm.
pub fn accretive_bound_check(p: &SylvesterProblem, delta: f64, x: &CMatrix) -> Result<bool> {
    if !(delta > 0.0) {
        return Err(Error::validation("delta must be positive"));
    }
    let n = p.dim();
    let half = CMatrix::scalar(n, c64(delta / 2.0, 0.0));
    let slack = 1e-10 * (1.0 + p.a.op_norm().max(p.b.op_norm()));
    let a_acc = (&p.a - &half).hermitian_part().min_eig_hermitian()?;
    let b_acc = (&(-&p.b) - &half).hermitian_part().min_eig_hermitian()?;
    if a_acc < -slack || b_acc < -slack {
        return Err(Error::NotAccretive {
            detail: format!(
                "Hermitian parts have min eigenvalues {a_acc:.3e} and {b_acc:.3e} after the delta/2 shift"
            ),
        });
    }
    let tol = 1e-12 * (1.0 + p.c.op_norm());
    let spectral_ok = x.op_norm() <= p.c.op_norm() / delta + tol;
    let frob_ok = x.frob_norm() <= p.c.frob_norm() / delta + tol;
    Ok(spectral_ok && frob_ok)
}

/// Record of one fixed-point solve, including the iterate norms used by the
/// contraction-rate diagnostics.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: CMatrix,
    pub residual: f64,
    pub iterations: usize,
    /// `||B_{k+1} - B_k||` for each recorded step.
    pub step_norms: Vec<f64>,
}

/// Unique unit-ball solution of `Y = Y A Y + B` by the contraction iteration
/// `B_0 = B`, `B_{k+1} = B_k A B_k + B`.
pub fn riccati_fixed_point(
    p: &RiccatiProblem,
    tol: f64,
    max_iter: usize,
) -> Result<RiccatiSolution> {
    if !(tol > 0.0) {
        return Err(Error::validation("tol must be positive"));
    }
    let mut x = p.b.clone();
    let mut step_norms = Vec::new();
    for k in 0..max_iter {
        let next = &(&(&x * &p.a) * &x) + &p.b;
        step_norms.push((&next - &x).op_norm());
        x = next;
        let res = p.residual(&x);
        if res <= tol {
            return Ok(RiccatiSolution {
                x,
                residual: res,
                iterations: k + 1,
                step_norms,
            });
        }
    }
    Err(Error::IterationBudgetExceeded {
        residual: p.residual(&x),
        tol,
        iters: max_iter,
    })
}

/// Slack (RHS minus LHS) of the fixed-point perturbation bound
/// `||X1 - X2|| <= (||A1 - A2|| + ||B1 - B2||) / (1 - 2 min ||Aj||)`.
/// Non-negative (up to roundoff) whenever `x1`, `x2` really solve their
/// problems in the unit ball.
pub fn riccati_perturbation_gap(
    p1: &RiccatiProblem,
    p2: &RiccatiProblem,
    x1: &CMatrix,
    x2: &CMatrix,
) -> Result<f64> {
    for (p, x) in [(p1, x1), (p2, x2)] {
        let res = p.residual(x);
        if res > 1e-10 {
            return Err(Error::NotASolution { residual: res });
        }
    }
    let da = (&p1.a - &p2.a).op_norm();
    let db = (&p1.b - &p2.b).op_norm();
    let amin = p1.a.op_norm().min(p2.a.op_norm());
    let rhs = (da + db) / (1.0 - 2.0 * amin);
    Ok(rhs - (x1 - x2).op_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumLocation {
    StrictlyUpper,
    OnOrBelow,
}

/// Returns `StrictlyUpper` iff every eigenvalue of `m` has imaginary part
/// above `tol`. Certifies the spectrum-separation hypothesis before solving
/// Sylvester equations with `(A, B) = (M, -M)`.
pub fn herglotz_spectrum_check(m: &CMatrix, tol: f64) -> Result<SpectrumLocation> {
    let eigs = m.spectrum(1e-10)?;
    if eigs.iter().all(|z| z.im > tol) {
        Ok(SpectrumLocation::StrictlyUpper)
    } else {
        Ok(SpectrumLocation::OnOrBelow)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sm(v: f64) -> CMatrix {
        CMatrix::scalar(1, c64(v, 0.0))
    }

    #[test]
    fn scalar_closed_form() {
        let p = SylvesterProblem::new(sm(2.0), sm(-1.0), sm(3.0)).unwrap();
        let x = sylvester_direct(&p).unwrap();
        assert!((x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CMatrix::from_rows(&[
            vec![c64(2.0, 0.1), c64(0.3, 0.0)],
            vec![c64(0.0, -0.2), c64(1.5, 0.0)],
        ])
        .unwrap();
        let b = CMatrix::from_rows(&[
            vec![c64(-2.0, 0.0), c64(0.1, 0.1)],
            vec![c64(0.2, 0.0), c64(-1.0, 0.3)],
        ])
        .unwrap();
        let p = SylvesterProblem::new(a, b, CMatrix::zeros(2)).unwrap();
        let x = sylvester_direct(&p).unwrap();
        assert!(x.max_abs() < 1e-13);
    }

    #[test]
    fn residual_certified_on_random_instance() {
        let a = CMatrix::from_rows(&[
            vec![c64(1.4, 0.2), c64(0.5, -0.1)],
            vec![c64(-0.3, 0.1), c64(2.1, 0.0)],
        ])
        .unwrap();
        let b = CMatrix::from_rows(&[
            vec![c64(-1.2, 0.0), c64(0.2, 0.3)],
            vec![c64(0.1, -0.2), c64(-2.2, 0.1)],
        ])
        .unwrap();
        let c = CMatrix::from_rows(&[
            vec![c64(0.7, -0.4), c64(1.1, 0.0)],
            vec![c64(0.0, 0.9), c64(-0.5, 0.2)],
        ])
        .unwrap();
        let p = SylvesterProblem::new(a, b, c).unwrap();
        let x = sylvester_direct(&p).unwrap();
        assert!(p.residual(&x) <= 1e-10 * (1.0 + p.c.op_norm()));
    }

    #[test]
    fn contour_matches_direct_scalar() {
        let p = SylvesterProblem::new(sm(2.0), sm(-1.0), sm(3.0)).unwrap();
        let contour = Contour::counterclockwise(c64(2.0, 0.0), 1.0, 64).unwrap();
        let x = sylvester_contour(&p, &contour).unwrap();
        assert!((x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn contour_rejects_misplaced_spectra() {
        let p = SylvesterProblem::new(sm(2.0), sm(-1.0), sm(3.0)).unwrap();
        // contour around B instead of A
        let contour = Contour::counterclockwise(c64(-1.0, 0.0), 0.5, 64).unwrap();
        assert!(matches!(
            sylvester_contour(&p, &contour),
            Err(Error::SpectraMisplaced { .. })
        ));
    }

    #[test]
    fn contour_rejects_eigenvalue_on_contour() {
        let p = SylvesterProblem::new(sm(2.0), sm(-1.0), sm(3.0)).unwrap();
        let contour = Contour::counterclockwise(c64(1.0, 0.0), 1.0 + 1e-9, 64).unwrap();
        assert!(matches!(
            sylvester_contour(&p, &contour),
            Err(Error::SpectraOnContour { .. })
        ));
    }

    #[test]
    fn overlap_is_detected() {
        let p = SylvesterProblem::new(sm(1.0), sm(1.0), sm(1.0)).unwrap();
        assert!(matches!(
            sylvester_direct(&p),
            Err(Error::SpectraOverlap { .. })
        ));
    }

    #[test]
    fn accretive_scalar_equality_case() {
        let p = SylvesterProblem::new(sm(1.0), sm(-1.0), sm(1.0)).unwrap();
        let x = sylvester_direct(&p).unwrap();
        assert!((x[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-14);
        assert!(accretive_bound_check(&p, 2.0, &x).unwrap());
    }

    #[test]
    fn accretive_rejects_bad_precondition() {
        let p = SylvesterProblem::new(sm(0.1), sm(-0.1), sm(1.0)).unwrap();
        let x = sylvester_direct(&p).unwrap();
        assert!(matches!(
            accretive_bound_check(&p, 2.0, &x),
            Err(Error::NotAccretive { .. })
        ));
    }

    #[test]
    fn riccati_zero_b_gives_zero() {
        let p = RiccatiProblem::new(sm(0.3), sm(0.0)).unwrap();
        let sol = riccati_fixed_point(&p, 1e-12, 200).unwrap();
        assert!(sol.x.max_abs() < 1e-14);
    }

    #[test]
    fn riccati_scalar_closed_form() {
        // x = x^2/4 + 1/4 -> x^2 - 4x + 1 = 0 -> unit-ball root 2 - sqrt(3)
        let p = RiccatiProblem::new(sm(0.25), sm(0.25)).unwrap();
        let sol = riccati_fixed_point(&p, 1e-14, 400).unwrap();
        let expect = 2.0 - 3.0_f64.sqrt();
        assert!((sol.x[(0, 0)] - c64(expect, 0.0)).norm() < 1e-12);
        assert!(sol.residual <= 1e-14);
    }

    #[test]
    fn riccati_contraction_rate_recorded() {
        let a = CMatrix::from_rows(&[
            vec![c64(0.2, 0.1), c64(0.1, 0.0)],
            vec![c64(0.0, -0.1), c64(0.15, 0.0)],
        ])
        .unwrap();
        let b = CMatrix::from_rows(&[
            vec![c64(0.3, 0.0), c64(0.0, 0.1)],
            vec![c64(0.0, -0.1), c64(0.25, 0.0)],
        ])
        .unwrap();
        let p = RiccatiProblem::new(a, b).unwrap();
        let sol = riccati_fixed_point(&p, 1e-13, 200).unwrap();
        let rate = 2.0 * p.a.op_norm();
        for w in sol.step_norms.windows(2) {
            assert!(w[1] <= rate * w[0] + 1e-15);
        }
    }

    #[test]
    fn riccati_gate_enforced() {
        assert!(matches!(
            RiccatiProblem::new(sm(0.6), sm(0.1)),
            Err(Error::ContractionViolated { .. })
        ));
    }

    #[test]
    fn perturbation_gap_identical_is_zero() {
        let p = RiccatiProblem::new(sm(0.25), sm(0.25)).unwrap();
        let sol = riccati_fixed_point(&p, 1e-14, 400).unwrap();
        let slack = riccati_perturbation_gap(&p, &p, &sol.x, &sol.x).unwrap();
        assert!(slack.abs() <= (sol.x[(0, 0)].norm()) + 1e-12); // slack = rhs >= 0 here
        assert!(slack >= -1e-12);
    }

    #[test]
    fn perturbation_gap_scalar_family() {
        let a = 0.25;
        let p1 = RiccatiProblem::new(sm(a), sm(0.25)).unwrap();
        let p2 = RiccatiProblem::new(sm(a), sm(0.30)).unwrap();
        let x1 = riccati_fixed_point(&p1, 1e-14, 400).unwrap().x;
        let x2 = riccati_fixed_point(&p2, 1e-14, 400).unwrap().x;
        let slack = riccati_perturbation_gap(&p1, &p2, &x1, &x2).unwrap();
        assert!(slack >= -1e-10, "slack {slack}");
    }

    #[test]
    fn perturbation_gap_rejects_non_solution() {
        let p = RiccatiProblem::new(sm(0.25), sm(0.25)).unwrap();
        let bogus = sm(0.9);
        assert!(matches!(
            riccati_perturbation_gap(&p, &p, &bogus, &bogus),
            Err(Error::NotASolution { .. })
        ));
    }

    #[test]
    fn herglotz_check_cases() {
        let upper = CMatrix::scalar(2, c64(0.0, 1.0));
        assert_eq!(
            herglotz_spectrum_check(&upper, 1e-12).unwrap(),
            SpectrumLocation::StrictlyUpper
        );
        let herm = CMatrix::from_rows(&[
            vec![c64(1.0, 0.0), c64(0.2, 0.5)],
            vec![c64(0.2, -0.5), c64(-1.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(
            herglotz_spectrum_check(&herm, 1e-12).unwrap(),
            SpectrumLocation::OnOrBelow
        );
    }

    #[test]
    fn positive_imag_part_implies_upper_spectrum() {
        // M = H + i P with P positive definite: spectrum stays above min eig of P
        let h = CMatrix::from_rows(&[
            vec![c64(0.4, 0.0), c64(1.0, -0.3)],
            vec![c64(1.0, 0.3), c64(-0.9, 0.0)],
        ])
        .unwrap();
        let pd = CMatrix::from_rows(&[
            vec![c64(1.5, 0.0), c64(0.3, 0.2)],
            vec![c64(0.3, -0.2), c64(0.8, 0.0)],
        ])
        .unwrap();
        let mu = pd.min_eig_hermitian().unwrap();
        assert!(mu > 0.0);
        let m = &h + &pd.scale(c64(0.0, 1.0));
        for lam in m.spectrum(1e-12).unwrap() {
            assert!(lam.im >= mu - 1e-10);
        }
        assert_eq!(
            herglotz_spectrum_check(&m, 1e-12).unwrap(),
            SpectrumLocation::StrictlyUpper
        );
    }
}
