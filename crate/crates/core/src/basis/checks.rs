//! Sampling checks of smoothness and boundary conditions.

use crate::error::Result;
use crate::gluing::{L, LP};
use crate::multipatch::MultiPatchDomain;
use crate::physical::{physical_derivatives, PhysicalDerivatives};

use super::function::IsogeometricFunction;
use super::space::GlobalBasis;

fn samples(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |t| t as f64 / (n - 1).max(1) as f64)
}

fn flat(d: &PhysicalDerivatives) -> [f64; 7] {
    [
        d.value,
        d.grad[0],
        d.grad[1],
        d.hess[0][0],
        d.hess[0][1],
        d.hess[1][0],
        d.hess[1][1],
    ]
}

/// Largest jump of value, gradient and Hessian of `f` across any interface,
/// relative to the largest of these quantities seen on either side.
pub fn interface_jump(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    f: &IsogeometricFunction,
    n: usize,
) -> Result<f64> {
    let mut jump = 0.0f64;
    let mut scale = 0.0f64;
    for iface in &domain.interfaces {
        for v in samples(n) {
            let side = |tau: usize| -> Result<[f64; 7]> {
                let s = iface.sides[tau];
                let geo = domain.standardized_patch(s.patch, &s.symmetry);
                let t = match f.grid(s.patch) {
                    Some(g) => g.to_standard(&s.symmetry).eval(&basis.space, 0.0, v, 2),
                    None => vec![vec![0.0; 3]; 3],
                };
                Ok(flat(&physical_derivatives(&geo, 0.0, v, &t, 2)?))
            };
            let (a, b) = (side(L)?, side(LP)?);
            for (x, y) in a.iter().zip(&b) {
                jump = jump.max((x - y).abs());
                scale = scale.max(x.abs()).max(y.abs());
            }
        }
    }
    Ok(if scale == 0.0 { 0.0 } else { jump / scale })
}

/// Largest value, gradient or Hessian entry of `f` on the domain boundary,
/// relative to the largest coefficient of `f`.
pub fn boundary_residual(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    f: &IsogeometricFunction,
    n: usize,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(patch, edge) in &domain.boundary_edges {
        let Some(g) = f.grid(patch) else { continue };
        for t in samples(n) {
            let (x1, x2) = match edge {
                0 => (t, 0.0),
                1 => (1.0, t),
                2 => (t, 1.0),
                _ => (0.0, t),
            };
            let tab = g.eval(&basis.space, x1, x2, 2);
            let d = physical_derivatives(&domain.patches[patch], x1, x2, &tab, 2)?;
            worst = flat(&d).iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    let c = f.max_coefficient();
    Ok(if c == 0.0 { 0.0 } else { worst / c })
}
