//! Adaptive matrix-valued ODE integration (Dormand-Prince 5(4) embedded
//! pair) with exact landing on a prescribed set of output points.

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix};

#[derive(Debug, Clone, Copy)]
pub struct OdeOpts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// entry magnitude treated as a Riccati blow-up
    pub blowup: f64,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 2_000_000,
            blowup: 1e6,
        }
    }
}

// Dormand-Prince coefficients
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// 4th-order weights (for the error estimate)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lincomb(y: &CMatrix, terms: &[(f64, &CMatrix)], h: f64) -> CMatrix {
    let mut acc = y.clone();
    for (c, k) in terms {
        acc = &acc + &k.scale(c64(c * h, 0.0));
    }
    acc
}

/// Integrate `y' = f(x, y)` from `xs[0]` through every point of `xs`
/// (strictly monotone, increasing or decreasing), returning the solution at
/// each point. Adaptive substeps land exactly on the output points.
pub fn integrate_to_grid(
    f: &dyn Fn(f64, &CMatrix) -> CMatrix,
    y0: CMatrix,
    xs: &[f64],
    opts: &OdeOpts,
) -> Result<Vec<CMatrix>> {
    assert!(xs.len() >= 2, "need at least two output points");
    let dir = (xs[1] - xs[0]).signum();
    let mut out = Vec::with_capacity(xs.len());
    out.push(y0.clone());
    let mut y = y0;
    let mut x = xs[0];
    let mut h = dir * (xs[1] - xs[0]).abs().min(1e-2);
    let mut k1 = f(x, &y);
    let mut steps = 0usize;

    for &target in &xs[1..] {
        while (target - x) * dir > 1e-14 * (1.0 + x.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::StepFailure {
                    x,
                    detail: format!("step budget {} exhausted", opts.max_steps),
                });
            }
            if (x + h - target) * dir > 0.0 {
                h = target - x;
            }
            let k2 = f(x + A21 * h, &lincomb(&y, &[(A21, &k1)], h));
            let k3 = f(x + 0.3 * h, &lincomb(&y, &[(A31, &k1), (A32, &k2)], h));
            let k4 = f(
                x + 0.8 * h,
                &lincomb(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h),
            );
            let k5 = f(
                x + 8.0 / 9.0 * h,
                &lincomb(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h),
            );
            let y6 = lincomb(
                &y,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                h,
            );
            let k6 = f(x + h, &y6);
            let y_next = lincomb(
                &y,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
                h,
            );
            let k7 = f(x + h, &y_next);
            // embedded error estimate
            let err_mat = lincomb(
                &CMatrix::zeros(y.dim()),
                &[
                    (E1, &k1),
                    (E3, &k3),
                    (E4, &k4),
                    (E5, &k5),
                    (E6, &k6),
                    (E7, &k7),
                ],
                h,
            );
            let mut ratio: f64 = 0.0;
            for ((e, v), old) in err_mat
                .data()
                .iter()
                .zip(y_next.data().iter())
                .zip(y.data().iter())
            {
                let sc = opts.atol + opts.rtol * v.norm().max(old.norm());
                ratio = ratio.max(e.norm() / sc);
            }
            if !ratio.is_finite() || y_next.max_abs() > opts.blowup {
                return Err(Error::StepFailure {
                    x,
                    detail: "solution escaping (Riccati blow-up or non-finite step)".into(),
                });
            }
            if ratio <= 1.0 {
                x += h;
                y = y_next;
                k1 = k7; // FSAL
            }
            let factor = if ratio > 0.0 {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h *= factor;
            if h.abs() < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::StepFailure {
                    x,
                    detail: "step size underflow".into(),
                });
            }
        }
        x = target;
        out.push(y.clone());
    }
    Ok(out)
}
