//! Invariant suites: run the structural identities of the theory against
//! one operator and report measured residuals. Backs the `verify` command
//! and the acceptance checks on the bundled demo models.

use num_complex::Complex64;

use crate::continuum::{
    diag_green_dirac, diag_green_schrodinger, dirac_square, dirac_to_schrodinger_m,
    energy_identity_gap_dirac, energy_identity_gap_schrodinger, recover_m_dirac,
    recover_m_schrodinger, riccati_evolve_dirac, riccati_evolve_schrodinger,
    riccati_residuals_dirac, riccati_residuals_schrodinger, DiracModel, SchrodingerModel,
};
use crate::error::Result;
use crate::jacobi::forward::{
    big_m_remark_residual, fundamental_solutions, greens_sample, ray_samples, riccati_residual,
    weyl_m, weyl_m_minus_field, weyl_m_plus_field, weyl_solutions, wronskian,
};
use crate::jacobi::inverse::{
    invert_from_greens, recover_weyl_case_i, recover_weyl_case_ii, recover_weyl_case_iii,
    InvertCase, InvertOptions,
};
use crate::jacobi::{dense, JacobiCoeffs, MatSeq};
use crate::linalg::{c64, CMatrix};
use crate::par::par_map;
use crate::sampling;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        let passed = measured.is_finite() && measured <= tolerance;
        CheckResult {
            name: name.into(),
            measured,
            tolerance,
            passed,
        }
    }
}

pub fn all_passed(checks: &[CheckResult]) -> bool {
    checks.iter().all(|c| c.passed)
}

fn upper_z_samples(seed: u64, count: usize) -> Vec<Complex64> {
    let mut r = sampling::rng(seed);
    (0..count)
        .map(|_| sampling::random_upper_z(&mut r, 3.0, 0.5, 4.0))
        .collect()
}

/// Invariant suite for a whole-line Jacobi operator.
pub fn verify_jacobi(c: &JacobiCoeffs, seed: u64, quick: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let m = c.dim();
    let k0 = (c.k_min() + c.k_max()).div_euclid(2).max(c.k_min());
    let lo = c.k_min() - 1;
    let hi = c.k_max() + 1;
    let herglotz_count = if quick { 20 } else { 200 };

    // Riccati residual of the propagated Weyl fields across the window
    {
        let z = c64(0.7, 1.3);
        let plus = weyl_m_plus_field(c, z, lo, hi)?;
        let minus = weyl_m_minus_field(c, z, lo, hi)?;
        let mut worst: f64 = 0.0;
        for k in (lo + 1)..=hi {
            worst = worst.max(riccati_residual(c, &plus, z, k)?);
            worst = worst.max(riccati_residual(c, &minus, z, k)?);
        }
        out.push(CheckResult::new("jacobi.riccati_residual", worst, 1e-10));
    }

    // Herglotz positivity of +-M_+- over random upper-half-plane points
    {
        let zs = upper_z_samples(seed ^ 0x9e3779b9, herglotz_count);
        let worst = par_map(&zs, |&z| -> Result<f64> {
            let pair = weyl_m(c, z, k0)?;
            let p = pair.m_plus.imag_part().min_eig_hermitian()?;
            let q = (-&pair.m_minus).imag_part().min_eig_hermitian()?;
            Ok(-p.min(q)) // negative when both are positive definite
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
        out.push(CheckResult::new("jacobi.herglotz_positivity", worst, 0.0));
    }

    // Wronskian constancy of W(theta(conj z)*, phi(z)) across the window
    {
        let z = c64(-0.6, 0.9);
        let (phi, _) = fundamental_solutions(c, z, k0, lo - 2, hi + 2)?;
        let (_, theta_bar) = fundamental_solutions(c, z.conj(), k0, lo - 2, hi + 2)?;
        let theta_star = MatSeq::new(
            lo - 2,
            ((lo - 2)..=(hi + 2)).map(|k| theta_bar.get(k).adjoint()).collect(),
        );
        let w_ref = wronskian(c, &theta_star, &phi, k0);
        let mut worst: f64 = 0.0;
        for k in (lo - 2)..(hi + 1) {
            worst = worst.max((&wronskian(c, &theta_star, &phi, k) - &w_ref).max_abs());
        }
        out.push(CheckResult::new("jacobi.wronskian_constancy", worst, 1e-12 * (1.0 + w_ref.max_abs())));
    }

    // Green's matrix against the dense-truncation resolvent
    {
        let z = c64(1.0, 1.0);
        let mut worst: f64 = 0.0;
        for (k, l) in [(k0, k0), (k0, k0 + 1), (k0 + 1, k0)] {
            let fast = crate::jacobi::forward::greens_matrix(c, z, k0, k, l)?;
            let oracle = dense::greens_dense(c, z, k, l, 40)?;
            worst = worst.max((&fast - &oracle).op_norm() / oracle.op_norm().max(1e-30));
        }
        out.push(CheckResult::new("jacobi.greens_dense_oracle", worst, 1e-8));
    }

    // base-shift and jump identities across the window
    {
        let z = c64(0.4, 1.1);
        let (psi_p, psi_m, pair) = weyl_solutions(c, z, k0, lo, hi + 1)?;
        let (psi_p_bar, psi_m_bar, _) = weyl_solutions(c, z.conj(), k0, lo, hi + 1)?;
        let dinv = (&pair.m_minus - &pair.m_plus).inv()?;
        let plus_field = weyl_m_plus_field(c, z, lo, hi)?;
        let minus_field = weyl_m_minus_field(c, z, lo, hi)?;
        let mut worst_shift: f64 = 0.0;
        let mut worst_jump: f64 = 0.0;
        for k in lo..=hi {
            let lhs = &(psi_p.get(k) * &dinv) * &psi_m_bar.get(k).adjoint();
            let rhs = (minus_field.get(k) - plus_field.get(k)).inv()?;
            worst_shift = worst_shift.max((&lhs - &rhs).max_abs());
            let a = c.a(k);
            let t1 = &(&(&a * psi_p.get(k + 1)) * &dinv) * &psi_m_bar.get(k).adjoint();
            let t2 = &(&(&a * psi_m.get(k + 1)) * &dinv) * &psi_p_bar.get(k).adjoint();
            worst_jump = worst_jump.max(((&t1 - &t2) - &CMatrix::identity(m)).max_abs());
        }
        out.push(CheckResult::new("jacobi.diagonal_shift_identity", worst_shift, 1e-9));
        out.push(CheckResult::new("jacobi.jump_identity", worst_jump, 1e-9));
    }

    // 2m x 2m Weyl-Titchmarsh matrix vs the block Green's matrix
    {
        let z = c64(0.5, 1.0);
        out.push(CheckResult::new(
            "jacobi.big_m_greens_identity",
            big_m_remark_residual(c, z, k0)?,
            1e-9,
        ));
    }

    // three-case Weyl recovery agreement at one admissible point
    {
        let z = c64(0.0, 15.0);
        let s = greens_sample(c, z, k0)?;
        let a0 = c.a(k0);
        let p1 = recover_weyl_case_i(&s, &a0)?;
        let p2 = recover_weyl_case_ii(&s, &a0)?;
        let p3 = recover_weyl_case_iii(&s.g0, &s.g1, &a0, z, k0)?;
        let d12 = (&p1.m_plus - &p2.m_plus).op_norm();
        let d13 = (&p1.m_plus - &p3.m_plus).op_norm();
        out.push(CheckResult::new("jacobi.case_cross_consistency", d12.max(d13), 1e-7));
    }

    // full inverse round trip from ray samples
    if !quick {
        let angle = 3.0 * std::f64::consts::FRAC_PI_4;
        let moduli = sampling::log_moduli(10.0, 1e5, 12);
        let samples = ray_samples(c, k0, angle, &moduli)?;
        let rep = invert_from_greens(&samples, InvertCase::I, None, &InvertOptions::default())?;
        let mut worst: f64 = 0.0;
        for k in c.k_min()..=c.k_max() {
            if let Some(a) = rep.a_at(k) {
                worst = worst.max((a - &c.a(k)).op_norm());
            }
            if let Some(b) = rep.b_at(k) {
                worst = worst.max((b - &c.b(k)).op_norm());
            }
        }
        out.push(CheckResult::new("jacobi.inverse_round_trip", worst, 1e-6));
    }

    Ok(out)
}

/// Invariant suite for a Schrodinger model.
pub fn verify_schrodinger(mdl: &SchrodingerModel, seed: u64, quick: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let scale = |z: Complex64| z.norm() + mdl.max_norm();
    let zs = upper_z_samples(seed ^ 0x5bd1e995, if quick { 2 } else { 4 });

    for (i, &z) in zs.iter().enumerate() {
        let field = riccati_evolve_schrodinger(mdl, z)?;
        let res = riccati_residuals_schrodinger(mdl, &field);
        let worst = res.into_iter().fold(0.0f64, f64::max);
        out.push(CheckResult::new(
            format!("schrodinger.riccati_residual[{i}]"),
            worst,
            1e-6 * scale(z),
        ));
        let herglotz = field.validate().is_ok();
        out.push(CheckResult::new(
            format!("schrodinger.herglotz_field[{i}]"),
            if herglotz { 0.0 } else { 1.0 },
            0.5,
        ));
    }

    // conjugation symmetry M(conj z) = M(z)^*
    {
        let z = c64(1.1, 1.3);
        let f = riccati_evolve_schrodinger(mdl, z)?;
        let fbar = riccati_evolve_schrodinger(mdl, z.conj())?;
        let mut worst: f64 = 0.0;
        for i in (0..f.grid.len).step_by((f.grid.len / 16).max(1)) {
            worst = worst.max((&f.m_plus[i].adjoint() - &fbar.m_plus[i]).max_abs());
            worst = worst.max((&f.m_minus[i].adjoint() - &fbar.m_minus[i]).max_abs());
        }
        out.push(CheckResult::new("schrodinger.conjugation_symmetry", worst, 1e-8));
    }

    // dual diagonal identity g' -+ I = g M_+- + M_+- g
    {
        let z = c64(0.6, 1.2);
        let f = riccati_evolve_schrodinger(mdl, z)?;
        let dg = diag_green_schrodinger(&f)?;
        let eye = CMatrix::identity(mdl.m);
        let mut worst: f64 = 0.0;
        for i in (0..f.grid.len).step_by((f.grid.len / 16).max(1)) {
            let plus_read = &(&dg[i].g * &f.m_plus[i]) + &(&f.m_plus[i] * &dg[i].g);
            let minus_read = &(&dg[i].g * &f.m_minus[i]) + &(&f.m_minus[i] * &dg[i].g);
            worst = worst.max(((&dg[i].gprime - &eye) - &plus_read).max_abs());
            worst = worst.max(((&dg[i].gprime + &eye) - &minus_read).max_abs());
        }
        out.push(CheckResult::new("schrodinger.diag_green_identity", worst, 1e-8));
    }

    // pointwise recovery round trip where the certificate holds
    {
        let z = c64(1.5, 2.0);
        let f = riccati_evolve_schrodinger(mdl, z)?;
        let dg = diag_green_schrodinger(&f)?;
        let i0 = mdl.grid.center_index();
        let (mp, mm) = recover_m_schrodinger(&dg[i0].g, &dg[i0].gprime, z)?;
        let worst = (&mp - &f.m_plus[i0])
            .op_norm()
            .max((&mm - &f.m_minus[i0]).op_norm());
        out.push(CheckResult::new("schrodinger.recovery_round_trip", worst, 1e-7));
    }

    // energy identity at the center
    {
        let z = c64(0.8, 1.4);
        let f = riccati_evolve_schrodinger(mdl, z)?;
        out.push(CheckResult::new(
            "schrodinger.energy_identity",
            energy_identity_gap_schrodinger(&f)?,
            1e-4,
        ));
    }

    Ok(out)
}

/// Invariant suite for a Dirac model.
pub fn verify_dirac(mdl: &DiracModel, seed: u64, quick: bool) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let scale = |z: Complex64| z.norm() + mdl.max_norm();
    let zs = upper_z_samples(seed ^ 0x2545f491, if quick { 2 } else { 4 });

    for (i, &z) in zs.iter().enumerate() {
        let field = riccati_evolve_dirac(mdl, z)?;
        let res = riccati_residuals_dirac(mdl, &field);
        let worst = res.into_iter().fold(0.0f64, f64::max);
        out.push(CheckResult::new(
            format!("dirac.riccati_residual[{i}]"),
            worst,
            1e-6 * scale(z),
        ));
        let herglotz = field.validate().is_ok();
        out.push(CheckResult::new(
            format!("dirac.herglotz_field[{i}]"),
            if herglotz { 0.0 } else { 1.0 },
            0.5,
        ));
    }

    // pointwise recovery round trip at large Im z
    {
        let z = c64(0.0, 10.0);
        let f = riccati_evolve_dirac(mdl, z)?;
        let dg = diag_green_dirac(mdl, &f)?;
        let i0 = mdl.grid.center_index();
        let (mp, mm) = recover_m_dirac(&dg[i0].g, &dg[i0].gprime, &mdl.b11[i0], &mdl.b12[i0], z)?;
        let worst = (&mp - &f.m_plus[i0])
            .op_norm()
            .max((&mm - &f.m_minus[i0]).op_norm());
        out.push(CheckResult::new("dirac.recovery_round_trip", worst, 1e-7));
    }

    // energy identity
    {
        let z = c64(0.4, 1.6);
        let f = riccati_evolve_dirac(mdl, z)?;
        out.push(CheckResult::new(
            "dirac.energy_identity",
            energy_identity_gap_dirac(mdl, &f)?,
            1e-4,
        ));
    }

    // squaring consistency at one first-quadrant point
    {
        let z = c64(1.2, 1.1);
        let f_z = riccati_evolve_dirac(mdl, z)?;
        let f_neg = riccati_evolve_dirac(mdl, -z.conj())?;
        let i0 = mdl.grid.center_index();
        let md_neg = f_neg.m_plus[i0].adjoint();
        let mh = dirac_to_schrodinger_m(&f_z.m_plus[i0], &md_neg, &mdl.b11[i0], &mdl.b12[i0], z)?;
        let sq = dirac_square(mdl)?;
        let f_sq = riccati_evolve_schrodinger(&sq, z * z)?;
        out.push(CheckResult::new(
            "dirac.squaring_consistency",
            (&mh - &f_sq.m_plus[i0]).op_norm(),
            1e-6,
        ));
    }

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_jacobi_passes_quick_suite() {
        let c = JacobiCoeffs::free(1);
        let checks = verify_jacobi(&c, 1, true).unwrap();
        for ch in &checks {
            assert!(ch.passed, "{} failed: {:.3e} > {:.3e}", ch.name, ch.measured, ch.tolerance);
        }
    }

    #[test]
    fn random_model_passes_quick_suite() {
        let mut r = sampling::rng(42);
        let c = sampling::random_jacobi(&mut r, 2, 3, 0, 0.3, 0.3);
        let checks = verify_jacobi(&c, 2, true).unwrap();
        for ch in &checks {
            assert!(ch.passed, "{} failed: {:.3e} > {:.3e}", ch.name, ch.measured, ch.tolerance);
        }
    }
}
