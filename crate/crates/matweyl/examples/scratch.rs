use matweyl::jacobi::forward::{greens_sample, ray_samples};
use matweyl::jacobi::inverse::{invert_from_greens, InvertCase, InvertOptions};
use matweyl::jacobi::JacobiCoeffs;
use matweyl::linalg::CMatrix;
use matweyl::sampling::{self, log_moduli};

const RAY: f64 = 3.0 * std::f64::consts::FRAC_PI_4;

fn misfit(cc: &JacobiCoeffs, samples: &[matweyl::jacobi::GreensSample]) -> f64 {
    let mut acc = 0.0f64;
    for s in samples {
        let model = greens_sample(cc, s.z, 0).unwrap();
        let w = s.z.norm();
        for (a, b) in [(&model.g0, &s.g0), (&model.g1, &s.g1), (&model.g01, &s.g01), (&model.g10, &s.g10)] {
            acc += ((a - b).frob_norm() * w).powi(2);
        }
    }
    acc.sqrt()
}

fn main() {
    let moduli = log_moduli(6.0, 600.0, 12);
    let i = 6u64;
    let mut r = sampling::rng(5000 + i * 17);
    let m = 1 + (i % 3) as usize;
    let support = 1 + (i % 7) as usize;
    let c = sampling::random_jacobi(&mut r, m, support, 0, 0.3, 0.3);
    println!("model {i}: m={m} support={support} window [{},{}]", c.k_min(), c.k_max());
    for k in c.k_min()..=c.k_max() {
        println!("  true A({k}) {:.4}  B({k}) {:.4}", c.a(k)[(0,0)].re, c.b(k)[(0,0)].re);
    }
    let samples = ray_samples(&c, 0, RAY, &moduli).unwrap();
    let rep = invert_from_greens(&samples, InvertCase::I, None, &InvertOptions::default()).unwrap();
    println!("rep A range {:?}  B range {:?}", rep.valid_a_range, rep.valid_b_range);
    let k_lo = rep.valid_a_range.0;
    let k_hi = rep.valid_a_range.1;
    let mut av = Vec::new();
    let mut bv = Vec::new();
    for k in k_lo..=k_hi {
        av.push(rep.a_at(k).cloned().unwrap_or_else(|| CMatrix::identity(m)));
        bv.push(rep.b_at(k).cloned().unwrap_or_else(|| CMatrix::zeros(m)));
    }
    let crec = JacobiCoeffs::new(m, k_lo, av, bv).unwrap();
    println!("misfit(truth) = {:.3e}", misfit(&c, &samples));
    println!("misfit(recon) = {:.3e}", misfit(&crec, &samples));
    for k in k_lo..=k_hi {
        println!("  rec A({k}) {:.4} (err {:.2e})  B({k}) {:.4} (err {:.2e})",
            rep.a_at(k).map(|a| a[(0,0)].re).unwrap_or(f64::NAN),
            rep.a_at(k).map(|a| (a - &c.a(k)).op_norm()).unwrap_or(f64::NAN),
            rep.b_at(k).map(|b| b[(0,0)].re).unwrap_or(f64::NAN),
            rep.b_at(k).map(|b| (b - &c.b(k)).op_norm()).unwrap_or(f64::NAN));
    }
}
