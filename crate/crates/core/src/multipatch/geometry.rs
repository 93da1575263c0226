//! Bilinear patch maps and their derivatives.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::symmetry::SquareSymmetry;
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// `F(ξ1, ξ2) = c00 (1-ξ1)(1-ξ2) + c10 ξ1 (1-ξ2) + c01 (1-ξ1) ξ2 + c11 ξ1 ξ2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearPatch {
    pub c00: Point,
    pub c10: Point,
    pub c11: Point,
    pub c01: Point,
}

/// Value and derivatives of a patch map at one parameter point.
#[derive(Clone, Copy, Debug)]
pub struct GeometryJet {
    pub point: Vector2<f64>,
    /// Columns are `∂F/∂ξ1` and `∂F/∂ξ2`.
    pub jacobian: Matrix2<f64>,
    /// `∂²F/∂ξ1∂ξ2`, the only nonzero second derivative.
    pub mixed: Vector2<f64>,
    pub det: f64,
    /// `J^{-T} J^{-1} |det J|`.
    pub k: Matrix2<f64>,
    /// `J^{-1}`.
    pub inverse: Matrix2<f64>,
}

fn v(p: Point) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

fn cross(a: Vector2<f64>, b: Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

impl BilinearPatch {
    /// Corners in counterclockwise order `c00, c10, c11, c01`.
    pub fn from_corners(c: [Point; 4]) -> Self {
        Self {
            c00: c[0],
            c10: c[1],
            c11: c[2],
            c01: c[3],
        }
    }

    pub fn corners(&self) -> [Point; 4] {
        [self.c00, self.c10, self.c11, self.c01]
    }

    /// Cross products of consecutive edge vectors at the four corners.
    pub fn corner_turns(&self) -> [f64; 4] {
        let c = self.corners();
        std::array::from_fn(|i| {
            let prev = v(c[i]) - v(c[(i + 3) % 4]);
            let next = v(c[(i + 1) % 4]) - v(c[i]);
            cross(prev, next)
        })
    }

    pub fn eval(&self, xi1: f64, xi2: f64) -> Vector2<f64> {
        v(self.c00) * ((1.0 - xi1) * (1.0 - xi2))
            + v(self.c10) * (xi1 * (1.0 - xi2))
            + v(self.c01) * ((1.0 - xi1) * xi2)
            + v(self.c11) * (xi1 * xi2)
    }

    pub fn d1(&self, xi2: f64) -> Vector2<f64> {
        (v(self.c10) - v(self.c00)) * (1.0 - xi2) + (v(self.c11) - v(self.c01)) * xi2
    }

    pub fn d2(&self, xi1: f64) -> Vector2<f64> {
        (v(self.c01) - v(self.c00)) * (1.0 - xi1) + (v(self.c11) - v(self.c10)) * xi1
    }

    pub fn mixed(&self) -> Vector2<f64> {
        v(self.c00) - v(self.c10) - v(self.c01) + v(self.c11)
    }

    pub fn det(&self, xi1: f64, xi2: f64) -> f64 {
        cross(self.d1(xi2), self.d2(xi1))
    }

    /// The same surface seen through a reparameterization: the returned
    /// patch `G` satisfies `G(u, v) = F(sym(u, v))`.
    pub fn reparameterize(&self, sym: &SquareSymmetry) -> Self {
        let p = |a: f64, b: f64| {
            let (x, y) = sym.apply(a, b);
            let q = self.eval(x, y);
            [q.x, q.y]
        };
        Self {
            c00: p(0.0, 0.0),
            c10: p(1.0, 0.0),
            c11: p(1.0, 1.0),
            c01: p(0.0, 1.0),
        }
    }

    pub fn diameter(&self) -> f64 {
        let c = self.corners();
        let mut m: f64 = 0.0;
        for a in &c {
            for b in &c {
                m = m.max((v(*a) - v(*b)).norm());
            }
        }
        m
    }

    /// Inverse of the patch map, by Newton iteration with a closed-form
    /// fallback.
    pub fn inverse_map(&self, x: [f64; 2]) -> Result<(f64, f64)> {
        let target = v(x);
        let tol = 1e-11 * self.diameter().max(f64::MIN_POSITIVE);
        let accept = |xi: (f64, f64)| {
            let inside = (-1e-9..=1.0 + 1e-9).contains(&xi.0) && (-1e-9..=1.0 + 1e-9).contains(&xi.1);
            inside && (self.eval(xi.0, xi.1) - target).norm() <= tol
        };
        if let Some(xi) = self.newton(target) {
            if accept(xi) {
                return Ok(clamp(xi));
            }
        }
        for xi in self.closed_form_candidates(target) {
            if accept(xi) {
                return Ok(clamp(xi));
            }
        }
        Err(Error::NotFound(x[0], x[1]))
    }

    fn newton(&self, target: Vector2<f64>) -> Option<(f64, f64)> {
        let (mut a, mut b) = (0.5, 0.5);
        for _ in 0..60 {
            let r = self.eval(a, b) - target;
            let j = Matrix2::from_columns(&[self.d1(b), self.d2(a)]);
            let step = j.lu().solve(&r)?;
            a -= step.x;
            b -= step.y;
            if !(a.is_finite() && b.is_finite()) {
                return None;
            }
            if step.norm() < 1e-15 {
                break;
            }
        }
        Some((a, b))
    }

    fn closed_form_candidates(&self, target: Vector2<f64>) -> Vec<(f64, f64)> {
        // q = a ξ1 + b ξ2 + c ξ1 ξ2; crossing with (a + c ξ2) removes ξ1.
        let q = target - v(self.c00);
        let a = v(self.c10) - v(self.c00);
        let b = v(self.c01) - v(self.c00);
        let c = self.mixed();
        let qa = cross(q, a);
        let qc = cross(q, c);
        let ba = cross(b, a);
        let bc = cross(b, c);
        let roots: Vec<f64> = if bc.abs() < 1e-14 * (ba.abs() + qc.abs()).max(1.0) {
            let lin = ba - qc;
            if lin == 0.0 {
                vec![]
            } else {
                vec![qa / lin]
            }
        } else {
            let disc = (ba - qc).powi(2) + 4.0 * bc * qa;
            if disc < 0.0 {
                vec![]
            } else {
                let s = disc.sqrt();
                vec![(-(ba - qc) + s) / (2.0 * bc), (-(ba - qc) - s) / (2.0 * bc)]
            }
        };
        roots
            .into_iter()
            .map(|xi2| {
                let den = a + c * xi2;
                let num = q - b * xi2;
                let xi1 = if den.x.abs() > den.y.abs() {
                    num.x / den.x
                } else {
                    num.y / den.y
                };
                (xi1, xi2)
            })
            .collect()
    }
}

fn clamp(xi: (f64, f64)) -> (f64, f64) {
    (xi.0.clamp(0.0, 1.0), xi.1.clamp(0.0, 1.0))
}

/// Exact derivatives of `patch` at `(xi1, xi2)`.
pub fn geometry_jet(patch: &BilinearPatch, xi1: f64, xi2: f64) -> Result<GeometryJet> {
    let jet = signed_jet(patch, xi1, xi2)?;
    if jet.det <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "det J = {:e} at ({xi1}, {xi2})",
            jet.det
        )));
    }
    Ok(jet)
}

/// Like [`geometry_jet`] but accepts orientation-reversing maps, as produced
/// by reparameterizing a patch with a reflection.
pub fn signed_jet(patch: &BilinearPatch, xi1: f64, xi2: f64) -> Result<GeometryJet> {
    let jacobian = Matrix2::from_columns(&[patch.d1(xi2), patch.d2(xi1)]);
    let det = jacobian.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::DegenerateGeometry(format!(
            "det J = {det:e} at ({xi1}, {xi2})"
        )));
    }
    let inverse = Matrix2::new(
        jacobian[(1, 1)],
        -jacobian[(0, 1)],
        -jacobian[(1, 0)],
        jacobian[(0, 0)],
    ) / det;
    let k = inverse.transpose() * inverse * det.abs();
    Ok(GeometryJet {
        point: patch.eval(xi1, xi2),
        jacobian,
        mixed: patch.mixed(),
        det,
        k,
        inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skew() -> BilinearPatch {
        BilinearPatch::from_corners([[0.0, 0.0], [3.0, 0.4], [3.5, 2.6], [0.3, 2.0]])
    }

    #[test]
    fn identity_and_scaled_square() {
        let unit = BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let j = geometry_jet(&unit, 0.3, 0.6).unwrap();
        assert_eq!(j.jacobian, Matrix2::identity());
        assert_eq!(j.k, Matrix2::identity());
        let big = BilinearPatch::from_corners([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        let j = geometry_jet(&big, 0.3, 0.6).unwrap();
        assert_eq!(j.det, 4.0);
        assert!((j.k - Matrix2::identity()).norm() < 1e-15);
    }

    #[test]
    fn skew_k_matches_dense_oracle() {
        let p = skew();
        let jet = geometry_jet(&p, 0.3, 0.7).unwrap();
        // Finite differences of F give J independently.
        let e = 1e-6;
        let d1 = (p.eval(0.3 + e, 0.7) - p.eval(0.3 - e, 0.7)) / (2.0 * e);
        let d2 = (p.eval(0.3, 0.7 + e) - p.eval(0.3, 0.7 - e)) / (2.0 * e);
        let j = Matrix2::from_columns(&[d1, d2]);
        let ji = j.try_inverse().unwrap();
        let k = ji.transpose() * ji * j.determinant().abs();
        assert!((k - jet.k).norm() < 1e-8);
        assert!((jet.k - jet.k.transpose()).norm() < 1e-14);
        let eig = jet.k.symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn inverse_map_round_trip() {
        let p = skew();
        for (i, c) in p.corners().iter().enumerate() {
            let xi = p.inverse_map(*c).unwrap();
            let want = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)][i];
            assert!((xi.0 - want.0).abs() < 1e-12 && (xi.1 - want.1).abs() < 1e-12);
        }
        let x = p.eval(0.25, 0.5);
        let xi = p.inverse_map([x.x, x.y]).unwrap();
        assert!((xi.0 - 0.25).abs() < 1e-12 && (xi.1 - 0.5).abs() < 1e-12);
        assert!(matches!(
            p.inverse_map([10.0, 10.0]),
            Err(Error::NotFound(..))
        ));
    }

    #[test]
    fn closed_form_agrees_with_newton() {
        let p = skew();
        let x = p.eval(0.81, 0.13);
        let cands = p.closed_form_candidates(x);
        assert!(cands
            .iter()
            .any(|c| (c.0 - 0.81).abs() < 1e-10 && (c.1 - 0.13).abs() < 1e-10));
    }

    #[test]
    fn degenerate_jet() {
        let flat = BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        assert!(matches!(
            geometry_jet(&flat, 0.5, 0.5),
            Err(Error::DegenerateGeometry(_))
        ));
    }
}
