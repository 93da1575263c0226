//! Gluing data of an interface and the conditions for `C²` continuity
//! across it.
//!
//! Everything here is expressed in the standardized parameters of the two
//! sides, where the interface is `ξ1 = 0` on both patches and `ξ2 = ξ` runs
//! along it in the same direction. The side `ℓ` is the one whose
//! standardized map reverses orientation (`ᾱ^(ℓ) < 0`).

use serde::{Deserialize, Serialize};

use crate::basis::function::IsogeometricFunction;
use crate::bspline::{Polynomial1D, SplineSpace1D};
use crate::error::{Error, Result};
use crate::multipatch::{BilinearPatch, MultiPatchDomain};

/// Indices into the `[ℓ, ℓ']` arrays.
pub const L: usize = 0;
pub const LP: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceGluing {
    pub alpha_bar: [Polynomial1D; 2],
    pub beta_bar: Polynomial1D,
    pub beta_side: [Polynomial1D; 2],
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: [Polynomial1D; 2],
    pub alpha_hat: [Polynomial1D; 2],
    pub beta: Polynomial1D,
    pub d_alpha: usize,
}

type V2 = [f64; 2];

fn sub(a: V2, b: V2) -> V2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: V2, b: V2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `∂F/∂ξ1 (0, ξ) = a + b ξ` and `∂F/∂ξ2 (0, ξ) = e`.
fn trace_frame(p: &BilinearPatch) -> (V2, V2, V2) {
    let a = sub(p.c10, p.c00);
    let b = sub(sub(p.c11, p.c01), a);
    let e = sub(p.c01, p.c00);
    (a, b, e)
}

/// Gluing data from the two standardized patches `[ℓ, ℓ']`.
pub fn gluing_from_patches(std: [&BilinearPatch; 2]) -> Result<InterfaceGluing> {
    let frames = std.map(trace_frame);
    let alpha_bar = frames.map(|(a, b, e)| Polynomial1D::linear(cross(a, e), cross(b, e)));
    for (tau, want_neg) in [(L, true), (LP, false)] {
        let ends = [alpha_bar[tau].eval(0.0), alpha_bar[tau].eval(1.0)];
        let ok = ends.iter().all(|&x| if want_neg { x < 0.0 } else { x > 0.0 });
        if !ok {
            return Err(Error::InvalidInterface {
                interface: usize::MAX,
                reason: format!(
                    "alpha_bar on side {tau} has end values {:?}, expected {}",
                    ends,
                    if want_neg { "negative" } else { "positive" }
                ),
            });
        }
    }
    let (al, bl, _) = frames[L];
    let (ar, br, _) = frames[LP];
    let beta_bar = Polynomial1D::new(vec![
        cross(al, ar),
        cross(al, br) + cross(bl, ar),
        cross(bl, br),
    ]);
    let beta_side = frames.map(|(a, b, e)| {
        let n2 = dot(e, e);
        Polynomial1D::linear(dot(a, e) / n2, dot(b, e) / n2)
    });
    let num = alpha_bar[LP].sub(&alpha_bar[L]).integrate_unit();
    let den = alpha_bar[L]
        .mul(&alpha_bar[L])
        .add(&alpha_bar[LP].mul(&alpha_bar[LP]))
        .integrate_unit();
    let gamma1 = num / den;
    let gamma2 = 1.0;
    let alpha = alpha_bar.clone().map(|a| a.scale(gamma1));
    let alpha_hat = alpha_bar.clone().map(|a| a.scale(gamma2));
    let beta = beta_bar.scale(gamma1);
    let d_alpha = alpha[L].degree().max(alpha[LP].degree());
    Ok(InterfaceGluing {
        alpha_bar,
        beta_bar,
        beta_side,
        gamma1,
        gamma2,
        alpha,
        alpha_hat,
        beta,
        d_alpha,
    })
}

/// Gluing data of interface `s`.
pub fn gluing_data(domain: &MultiPatchDomain, s: usize) -> Result<InterfaceGluing> {
    let iface = domain
        .interfaces
        .get(s)
        .ok_or_else(|| Error::IndexOutOfRange(format!("interface {s}")))?;
    let std = iface
        .sides
        .map(|side| domain.standardized_patch(side.patch, &side.symmetry));
    gluing_from_patches([&std[L], &std[LP]]).map_err(|e| match e {
        Error::InvalidInterface { reason, .. } => Error::InvalidInterface { interface: s, reason },
        other => other,
    })
}

impl InterfaceGluing {
    /// `||α^(ℓ) + 1||² + ||α^(ℓ') - 1||²` for a given `γ1`.
    pub fn gamma_objective(&self, gamma1: f64) -> f64 {
        let a = self.alpha_bar[L].scale(gamma1).add(&Polynomial1D::constant(1.0));
        let b = self.alpha_bar[LP].scale(gamma1).sub(&Polynomial1D::constant(1.0));
        a.mul(&a).integrate_unit() + b.mul(&b).integrate_unit()
    }

    /// Coefficient error of `β = α^(ℓ) β^(ℓ') - α^(ℓ') β^(ℓ)`.
    pub fn beta_identity_error(&self) -> f64 {
        let rhs = self.alpha[L]
            .mul(&self.beta_side[LP])
            .sub(&self.alpha[LP].mul(&self.beta_side[L]));
        self.beta.sub(&rhs).max_abs()
    }
}

/// Standardized derivatives `g, g_1, g_2, g_11, g_12, g_22` at `(0, ξ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceJet {
    pub g: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl TraceJet {
    /// From a table `[a][b]` of `∂^a_1 ∂^b_2` derivatives.
    pub fn from_table(t: &[Vec<f64>]) -> Self {
        Self {
            g: t[0][0],
            d1: t[1][0],
            d2: t[0][1],
            d11: t[2][0],
            d12: t[1][1],
            d22: t[0][2],
        }
    }
}

/// Which factor multiplies `w` in the second-order condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SecondOrderForm {
    /// `α^(ℓ) w + η D_1 g + θ D_2 g`: homogeneous of degree three in `γ1`.
    Consistent,
    /// `α̂^(ℓ) w + η D_1 g + θ D_2 g` with `α̂ = γ2 ᾱ`.
    AsPrinted,
}

/// `(ρ0, ρ1, ρ2)` at one parameter `ξ` from the two sides' trace jets.
pub fn residual_triple(
    glue: &InterfaceGluing,
    xi: f64,
    gl: &TraceJet,
    gr: &TraceJet,
    form: SecondOrderForm,
) -> [f64; 3] {
    let al = glue.alpha[L].eval(xi);
    let ar = glue.alpha[LP].eval(xi);
    let dal = glue.alpha[L].derivative().eval(xi);
    let beta = glue.beta.eval(xi);
    let bl = glue.beta_side[L].eval(xi);
    let dbl = glue.beta_side[L].derivative().eval(xi);
    let rho0 = gl.g - gr.g;
    let rho1 = ar * gl.d1 - al * gr.d1 + beta * gl.d2;
    let w = al * al * gr.d11
        - (ar * ar * gl.d11 + 2.0 * ar * beta * gl.d12 + beta * beta * gl.d22);
    let eta = 2.0 * glue.gamma2 * dal * ar * beta;
    let theta = 2.0 * glue.gamma2 * (al * dbl - dal * bl) * ar * beta;
    let lead = match form {
        SecondOrderForm::Consistent => al,
        SecondOrderForm::AsPrinted => glue.alpha_hat[L].eval(xi),
    };
    [rho0, rho1, lead * w + eta * gl.d1 + theta * gl.d2]
}

/// Residuals of the continuity conditions of `phi` across interface `s` at
/// the given parameters.
pub fn g2_residuals(
    phi: &IsogeometricFunction,
    domain: &MultiPatchDomain,
    glue: &InterfaceGluing,
    s: usize,
    space: &SplineSpace1D,
    samples: &[f64],
) -> Vec<[f64; 3]> {
    let iface = &domain.interfaces[s];
    let d = space.dim();
    let grids = iface.sides.map(|side| {
        phi.grid(side.patch)
            .map(|g| g.to_standard(&side.symmetry))
            .unwrap_or_else(|| crate::basis::function::SparseGrid::empty(d))
    });
    samples
        .iter()
        .map(|&xi| {
            let jl = TraceJet::from_table(&grids[L].eval(space, 0.0, xi, 2));
            let jr = TraceJet::from_table(&grids[LP].eval(space, 0.0, xi, 2));
            residual_triple(glue, xi, &jl, &jr, SecondOrderForm::Consistent)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipatch::build_topology;
    use crate::poly2d::Polynomial2D;

    fn squares(scale: f64) -> MultiPatchDomain {
        let s = scale;
        build_topology(vec![
            BilinearPatch::from_corners([[0.0, 0.0], [s, 0.0], [s, s], [0.0, s]]),
            BilinearPatch::from_corners([[s, 0.0], [2.0 * s, 0.0], [2.0 * s, s], [s, s]]),
        ])
        .unwrap()
    }

    #[test]
    fn unit_squares() {
        let g = gluing_data(&squares(1.0), 0).unwrap();
        assert_eq!(g.alpha_bar[L].coeffs, vec![-1.0, 0.0]);
        assert_eq!(g.alpha_bar[LP].coeffs, vec![1.0, 0.0]);
        assert_eq!(g.beta_bar.max_abs(), 0.0);
        assert_eq!(g.gamma1, 1.0);
        assert_eq!(g.d_alpha, 0);
    }

    #[test]
    fn scaled_squares() {
        let g = gluing_data(&squares(2.0), 0).unwrap();
        assert!((g.gamma1 - 0.25).abs() < 1e-15);
        assert!((g.alpha[L].eval(0.5) + 1.0).abs() < 1e-15);
        assert!((g.alpha[LP].eval(0.5) - 1.0).abs() < 1e-15);
    }

    fn skew_pair() -> [BilinearPatch; 2] {
        // Standardized: interface from (0,0) to (0.3,2) at u = 0.
        let l = BilinearPatch::from_corners([[0.0, 0.0], [-2.0, 0.2], [-1.7, 2.6], [0.3, 2.0]]);
        let r = BilinearPatch::from_corners([[0.0, 0.0], [1.8, -0.3], [2.5, 2.2], [0.3, 2.0]]);
        [l, r]
    }

    #[test]
    fn beta_identity_and_optimality() {
        let [l, r] = skew_pair();
        let g = gluing_from_patches([&l, &r]).unwrap();
        assert_eq!(g.d_alpha, 1);
        assert!(g.beta_identity_error() < 1e-12);
        let f0 = g.gamma_objective(g.gamma1);
        assert!(g.gamma_objective(g.gamma1 + 1e-3) > f0);
        assert!(g.gamma_objective(g.gamma1 - 1e-3) > f0);
    }

    /// Standardized derivatives of `u ∘ G` for a polynomial `u`.
    fn jet_of(u: &Polynomial2D, p: &BilinearPatch, xi: f64) -> TraceJet {
        let x = p.eval(0.0, xi);
        let d = |a: u32, b: u32| {
            let mut q = u.clone();
            for _ in 0..a {
                q = q.differentiate(1);
            }
            for _ in 0..b {
                q = q.differentiate(2);
            }
            q.eval(x.x, x.y)
        };
        let f1 = p.d1(xi);
        let f2 = p.d2(0.0);
        let f12 = p.mixed();
        let grad = [d(1, 0), d(0, 1)];
        let hess = [[d(2, 0), d(1, 1)], [d(1, 1), d(0, 2)]];
        let quad = |a: nalgebra::Vector2<f64>, b: nalgebra::Vector2<f64>| {
            let (a, b) = ([a.x, a.y], [b.x, b.y]);
            (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| hess[i][j] * a[i] * b[j])
                .sum::<f64>()
        };
        let lin = |a: nalgebra::Vector2<f64>| grad[0] * a.x + grad[1] * a.y;
        TraceJet {
            g: d(0, 0),
            d1: lin(f1),
            d2: lin(f2),
            d11: quad(f1, f1),
            d12: quad(f1, f2) + lin(f12),
            d22: quad(f2, f2),
        }
    }

    #[test]
    fn smooth_function_satisfies_conditions() {
        let [l, r] = skew_pair();
        let g = gluing_from_patches([&l, &r]).unwrap();
        assert!((g.gamma1 - 1.0).abs() > 0.1);
        let u = Polynomial2D::from_terms([((3, 0), 1.0), ((1, 2), -0.7), ((2, 1), 0.4), ((0, 1), 2.0)]);
        let mut printed = 0.0f64;
        for xi in [0.1, 0.5, 0.9] {
            let jl = jet_of(&u, &l, xi);
            let jr = jet_of(&u, &r, xi);
            let rc = residual_triple(&g, xi, &jl, &jr, SecondOrderForm::Consistent);
            for v in rc {
                assert!(v.abs() < 1e-9, "{rc:?}");
            }
            let rp = residual_triple(&g, xi, &jl, &jr, SecondOrderForm::AsPrinted);
            printed = printed.max(rp[2].abs());
        }
        // With γ1 ≠ 1 the printed scaling does not vanish on smooth functions.
        assert!(printed > 1e-3);
    }

    #[test]
    fn orientation_violation() {
        let [l, r] = skew_pair();
        assert!(matches!(
            gluing_from_patches([&r, &l]),
            Err(Error::InvalidInterface { .. })
        ));
    }
}
