//! Gauss–Legendre quadrature on knot spans.

use std::f64::consts::PI;

use crate::bspline::SplineSpace1D;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the Chebyshev-like initial guess.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Tensor Gauss rule with `q` points per direction on every knot span.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub q: usize,
    /// `(a, b)` of every knot span.
    pub elements: Vec<(f64, f64)>,
    /// Points and weights per span, in span order.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

impl QuadratureRule {
    pub fn with_points(space: &SplineSpace1D, q: usize) -> Self {
        let (x, w) = gauss_legendre(q);
        let elements = space.elements();
        let points = elements
            .iter()
            .map(|&(a, b)| x.iter().map(|t| a + (b - a) * t).collect())
            .collect();
        let weights = elements
            .iter()
            .map(|&(a, b)| w.iter().map(|t| (b - a) * t).collect())
            .collect();
        Self {
            q,
            elements,
            points,
            weights,
        }
    }

    /// Integrates `f` over `[0, 1]`.
    pub fn integrate_1d(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .flat_map(|(x, w)| x.iter().zip(w))
            .map(|(x, w)| w * f(*x))
            .sum()
    }

    /// Integrates `f` over the unit square.
    pub fn integrate_2d(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (xa, wa) in self.points.iter().zip(&self.weights) {
            for (xb, wb) in self.points.iter().zip(&self.weights) {
                for (x, u) in xa.iter().zip(wa) {
                    for (y, v) in xb.iter().zip(wb) {
                        s += u * v * f(*x, *y);
                    }
                }
            }
        }
        s
    }
}

/// Points per direction beyond the degree. The integrands are rational on
/// bilinear patches; with fewer points, doubling `q` still moves the
/// stiffness entries by more than `1e-10` relative on strongly distorted
/// patches.
pub const EXTRA_POINTS: usize = 5;

/// The rule used by assembly and error norms: `q = p + EXTRA_POINTS`.
pub fn quadrature_rule(space: &SplineSpace1D) -> QuadratureRule {
    QuadratureRule::with_points(space, space.degree() + EXTRA_POINTS)
}
