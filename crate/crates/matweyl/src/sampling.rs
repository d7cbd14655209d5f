//! Deterministic generation of test operators and spectral points. All
//! draws go through a seeded ChaCha stream so experiments reproduce exactly.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::continuum::{DiracModel, Grid, SchrodingerModel};
use crate::jacobi::JacobiCoeffs;
use crate::linalg::{c64, CMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(r: &mut ChaCha8Rng, m: usize, scale: f64) -> CMatrix {
    let mut h = CMatrix::zeros(m);
    for i in 0..m {
        h[(i, i)] = c64(r.random_range(-scale..scale), 0.0);
        for j in (i + 1)..m {
            let v = c64(
                r.random_range(-scale..scale),
                r.random_range(-scale..scale),
            );
            h[(i, j)] = v;
            h[(j, i)] = v.conj();
        }
    }
    h
}

/// Random Hermitian positive definite matrix `I + H` with `||H|| <= dev < 1`.
pub fn random_hpd_near_identity(r: &mut ChaCha8Rng, m: usize, dev: f64) -> CMatrix {
    let h = random_hermitian(r, m, 1.0);
    let norm = h.op_norm().max(1e-12);
    let amp = r.random_range(0.2..1.0) * dev / norm;
    &CMatrix::identity(m) + &h.scale(c64(amp, 0.0))
}

/// Random general complex matrix with entries of order `scale`.
pub fn random_complex(r: &mut ChaCha8Rng, m: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(m, |_, _| {
        c64(
            r.random_range(-scale..scale),
            r.random_range(-scale..scale),
        )
    })
}

/// Compactly supported random Jacobi model: `support` perturbed sites
/// centered near `k0`, `||A(k) - I|| <= a_dev`, `||B(k)|| <= b_dev`.
pub fn random_jacobi(
    r: &mut ChaCha8Rng,
    m: usize,
    support: usize,
    k0: i64,
    a_dev: f64,
    b_dev: f64,
) -> JacobiCoeffs {
    assert!(support >= 1);
    let k_min = k0 - (support as i64 - 1) / 2;
    let a: Vec<CMatrix> = (0..support)
        .map(|_| random_hpd_near_identity(r, m, a_dev))
        .collect();
    let b: Vec<CMatrix> = (0..support)
        .map(|_| {
            let h = random_hermitian(r, m, 1.0);
            let norm = h.op_norm().max(1e-12);
            h.scale(c64(r.random_range(0.2..1.0) * b_dev / norm, 0.0))
        })
        .collect();
    JacobiCoeffs::new(m, k_min, a, b).expect("generated coefficients are admissible")
}

/// Smooth compact bump, identically zero for `|t| >= 1`.
pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

fn random_bump_profile(
    r: &mut ChaCha8Rng,
    m: usize,
    grid: &Grid,
    n_bumps: usize,
    amp: f64,
    inner: f64,
) -> Vec<CMatrix> {
    let dirs: Vec<CMatrix> = (0..n_bumps)
        .map(|_| {
            let h = random_hermitian(r, m, 1.0);
            let norm = h.op_norm().max(1e-12);
            h.scale(c64(r.random_range(0.3..1.0) * amp / norm, 0.0))
        })
        .collect();
    // wide bumps keep the high derivatives moderate, which the
    // finite-difference residual certification relies on
    let widths: Vec<f64> = (0..n_bumps)
        .map(|_| r.random_range(0.55 * inner..0.75 * inner))
        .collect();
    let centers: Vec<f64> = widths
        .iter()
        .map(|&w| {
            let room = (inner - w).max(0.01);
            r.random_range(-room..room)
        })
        .collect();
    grid.points()
        .map(|x| {
            let mut acc = CMatrix::zeros(m);
            for ((d, &c), &w) in dirs.iter().zip(centers.iter()).zip(widths.iter()) {
                acc = &acc + &d.scale(c64(bump((x - c) / w), 0.0));
            }
            acc
        })
        .collect()
}

/// Random compactly supported Schrodinger model on a centered grid.
pub fn random_schrodinger(
    r: &mut ChaCha8Rng,
    m: usize,
    half_width: f64,
    step: f64,
    amp: f64,
) -> SchrodingerModel {
    let grid = Grid::centered(0.0, half_width, step).expect("valid grid");
    let inner = half_width * 0.8;
    let q = random_bump_profile(r, m, &grid, 2, amp, inner);
    SchrodingerModel::new(m, grid, q).expect("generated potential is admissible")
}

/// Random compactly supported Dirac model on a centered grid.
pub fn random_dirac(
    r: &mut ChaCha8Rng,
    m: usize,
    half_width: f64,
    step: f64,
    amp: f64,
) -> DiracModel {
    let grid = Grid::centered(0.0, half_width, step).expect("valid grid");
    let inner = half_width * 0.8;
    let b11 = random_bump_profile(r, m, &grid, 2, amp, inner);
    let b12 = random_bump_profile(r, m, &grid, 2, amp, inner);
    DiracModel::new(m, grid, b11, b12).expect("generated coefficients are admissible")
}

/// Logarithmically spaced moduli in `[lo, hi]`.
pub fn log_moduli(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect()
}

/// Random spectral point in the open upper half-plane with `Im z` in
/// `[im_lo, im_hi]` and `|Re z| <= re_max`.
pub fn random_upper_z(r: &mut ChaCha8Rng, re_max: f64, im_lo: f64, im_hi: f64) -> Complex64 {
    c64(
        r.random_range(-re_max..re_max),
        r.random_range(im_lo..im_hi),
    )
}
