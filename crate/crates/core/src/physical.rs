//! Physical derivatives of functions given on bilinear patches.
//!
//! For `g = w ∘ F` the chain rule is inverted order by order. A bilinear map
//! has `F_11 = F_22 = 0` and vanishing third derivatives, so only the mixed
//! second derivative enters.

use nalgebra::Matrix2;

use crate::error::Result;
use crate::multipatch::{signed_jet, BilinearPatch, GeometryJet};

/// Physical derivatives up to third order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhysicalDerivatives {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    /// `third[i][j][k] = ∂³w / ∂x_i ∂x_j ∂x_k`.
    pub third: [[[f64; 2]; 2]; 2],
}

impl PhysicalDerivatives {
    pub fn laplacian(&self) -> f64 {
        self.hess[0][0] + self.hess[1][1]
    }

    /// `∇Δw`.
    pub fn grad_laplacian(&self) -> [f64; 2] {
        [
            self.third[0][0][0] + self.third[0][1][1],
            self.third[1][0][0] + self.third[1][1][1],
        ]
    }
}

/// Second derivative `F^i_{ab}`.
fn f2(jet: &GeometryJet, i: usize, a: usize, b: usize) -> f64 {
    if a != b {
        jet.mixed[i]
    } else {
        0.0
    }
}

/// Converts parametric derivatives `t[a][b] = ∂^a_1 ∂^b_2 g` (total order
/// up to `order <= 3`) into physical derivatives.
pub fn from_parametric(jet: &GeometryJet, t: &[Vec<f64>], order: usize) -> PhysicalDerivatives {
    let a: Matrix2<f64> = jet.jacobian;
    let b: Matrix2<f64> = jet.inverse;
    let get = |i: usize, j: usize| t.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
    // Parametric derivative by multi-index of direction labels.
    let g1 = |x: usize| if x == 0 { get(1, 0) } else { get(0, 1) };
    let g2 = |x: usize, y: usize| {
        let n1 = (x == 0) as usize + (y == 0) as usize;
        get(n1, 2 - n1)
    };
    let g3 = |x: usize, y: usize, z: usize| {
        let n1 = (x == 0) as usize + (y == 0) as usize + (z == 0) as usize;
        get(n1, 3 - n1)
    };
    let mut out = PhysicalDerivatives {
        value: get(0, 0),
        ..Default::default()
    };
    if order == 0 {
        return out;
    }
    for i in 0..2 {
        out.grad[i] = (0..2).map(|p| g1(p) * b[(p, i)]).sum();
    }
    if order == 1 {
        return out;
    }
    for i in 0..2 {
        for j in 0..2 {
            let mut s = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    let corr: f64 = (0..2).map(|k| out.grad[k] * f2(jet, k, p, q)).sum();
                    s += (g2(p, q) - corr) * b[(p, i)] * b[(q, j)];
                }
            }
            out.hess[i][j] = s;
        }
    }
    if order == 2 {
        return out;
    }
    // g_pqs = w_ijk A_ip A_jq A_ks + w_ij (F^i_ps A_jq + A_ip F^j_qs)
    //       + w_ik A_ks F^i_pq
    let w2 = out.hess;
    let mut rhs = [[[0.0; 2]; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            for s in 0..2 {
                let mut corr = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        corr += w2[i][j]
                            * (f2(jet, i, p, s) * a[(j, q)]
                                + a[(i, p)] * f2(jet, j, q, s)
                                + a[(j, s)] * f2(jet, i, p, q));
                    }
                }
                rhs[p][q][s] = g3(p, q, s) - corr;
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        for r in 0..2 {
                            s += rhs[p][q][r] * b[(p, i)] * b[(q, j)] * b[(r, k)];
                        }
                    }
                }
                out.third[i][j][k] = s;
            }
        }
    }
    out
}

/// Physical derivatives of a patch function with parametric table `t` at
/// parameter `(xi1, xi2)`.
pub fn physical_derivatives(
    patch: &BilinearPatch,
    xi1: f64,
    xi2: f64,
    t: &[Vec<f64>],
    order: usize,
) -> Result<PhysicalDerivatives> {
    let jet = signed_jet(patch, xi1, xi2)?;
    Ok(from_parametric(&jet, t, order))
}
