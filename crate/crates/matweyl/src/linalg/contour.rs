//! Circle contours and trapezoid quadrature of Cauchy integrals.
//!
//! Integrands here are analytic in an annulus around the circle, so the
//! trapezoid rule converges exponentially in the node count.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{c64, CMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Counterclockwise,
    Clockwise,
}

/// Circle contour for `(2 pi i)^{-1} \oint f` quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
    pub orientation: Orientation,
}

impl Contour {
    pub fn new(
        center: Complex64,
        radius: f64,
        nodes: usize,
        orientation: Orientation,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::validation("contour radius must be positive"));
        }
        if nodes < 16 {
            return Err(Error::validation("contour needs at least 16 nodes"));
        }
        Ok(Contour {
            center,
            radius,
            nodes,
            orientation,
        })
    }

    pub fn counterclockwise(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        Self::new(center, radius, nodes, Orientation::Counterclockwise)
    }

    /// Equispaced points and weights such that `sum_j w_j f(p_j)`
    /// approximates `(2 pi i)^{-1} \oint f(z) dz`.
    pub fn quadrature_nodes(&self) -> Vec<(Complex64, Complex64)> {
        let n = self.nodes;
        let sign = match self.orientation {
            Orientation::Counterclockwise => 1.0,
            Orientation::Clockwise => -1.0,
        };
        (0..n)
            .map(|j| {
                let theta = sign * 2.0 * std::f64::consts::PI * (j as f64) / (n as f64);
                let e = c64(theta.cos(), theta.sin());
                let point = self.center + e * self.radius;
                let weight = e * (sign * self.radius / n as f64);
                (point, weight)
            })
            .collect()
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    /// Signed distance data: smallest gap between `z` and the circle.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        ((z - self.center).norm() - self.radius).abs()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// Fixed-node quadrature of `(2 pi i)^{-1} \oint f`.
pub fn cauchy_quadrature(contour: &Contour, mut f: impl FnMut(Complex64) -> CMatrix) -> CMatrix {
    let nodes = contour.quadrature_nodes();
    let mut acc: Option<CMatrix> = None;
    for (p, w) in nodes {
        let term = f(p).scale(w);
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    acc.expect("contour has at least 16 nodes")
}

/// Node-doubling quadrature: doubles the node count until two successive
/// evaluations agree to `tol`, starting from `contour.nodes`.
pub fn cauchy_quadrature_adaptive(
    contour: &Contour,
    tol: f64,
    mut f: impl FnMut(Complex64) -> CMatrix,
) -> Result<CMatrix> {
    let mut nodes = contour.nodes.max(16);
    let mut prev = cauchy_quadrature(&contour.with_nodes(nodes), &mut f);
    loop {
        nodes *= 2;
        if nodes > 16384 {
            return Err(Error::NonConvergence { n: nodes, sweeps: 0 });
        }
        let next = cauchy_quadrature(&contour.with_nodes(nodes), &mut f);
        let gap = (&next - &prev).max_abs();
        if gap <= tol * (1.0 + next.max_abs()) {
            return Ok(next);
        }
        prev = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(z: Complex64) -> CMatrix {
        CMatrix::scalar(1, z)
    }

    #[test]
    fn residue_of_simple_pole_at_origin() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        let q = cauchy_quadrature(&c, |z| scalar(1.0 / z));
        assert!((q[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn entire_integrand_gives_zero() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        let q = cauchy_quadrature(&c, |_| scalar(c64(1.0, 0.0)));
        assert!(q[(0, 0)].norm() < 1e-14);
    }

    #[test]
    fn interior_pole_off_center() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        let a = c64(0.3, 0.0);
        let q = cauchy_quadrature(&c, |z| scalar(1.0 / (z - a)));
        assert!((q[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn exterior_pole_gives_zero() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        let a = c64(1.3, 0.4);
        let q = cauchy_quadrature_adaptive(&c, 1e-11, |z| scalar(1.0 / (z - a))).unwrap();
        assert!(q[(0, 0)].norm() < 1e-10);
    }

    #[test]
    fn pole_ratios_from_spec_with_doubling() {
        // |a| = 0.8 r inside and 1.25 r outside, 1e-10 after node doubling
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        let inside = c64(0.0, 0.8);
        let q = cauchy_quadrature_adaptive(&c, 1e-11, |z| scalar(1.0 / (z - inside))).unwrap();
        assert!((q[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-10);
        let outside = c64(-1.25, 0.0);
        let q = cauchy_quadrature_adaptive(&c, 1e-11, |z| scalar(1.0 / (z - outside))).unwrap();
        assert!(q[(0, 0)].norm() < 1e-10);
    }

    #[test]
    fn clockwise_flips_sign() {
        let c = Contour::new(c64(0.0, 0.0), 1.0, 64, Orientation::Clockwise).unwrap();
        let q = cauchy_quadrature(&c, |z| scalar(1.0 / z));
        assert!((q[(0, 0)] + c64(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn monomials_integrate_exactly() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 64).unwrap();
        for k in [-3i32, -2, 0, 1, 2, 5] {
            let q = cauchy_quadrature(&c, |z| scalar(z.powi(k)));
            let expect = if k == -1 { 1.0 } else { 0.0 };
            assert!(
                (q[(0, 0)] - c64(expect, 0.0)).norm() < 1e-12,
                "monomial {k} failed"
            );
        }
    }

    #[test]
    fn adaptive_doubling_converges() {
        let c = Contour::counterclockwise(c64(0.0, 0.0), 1.0, 16).unwrap();
        let a = c64(0.78, 0.0); // pole close to the contour: needs doubling
        let q = cauchy_quadrature_adaptive(&c, 1e-10, |z| scalar(1.0 / (z - a))).unwrap();
        assert!((q[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn invalid_contours_rejected() {
        assert!(Contour::counterclockwise(c64(0.0, 0.0), 0.0, 64).is_err());
        assert!(Contour::counterclockwise(c64(0.0, 0.0), 1.0, 8).is_err());
    }
}
