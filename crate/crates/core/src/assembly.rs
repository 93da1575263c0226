//! Stiffness and load assembly for the triharmonic weak form
//! `∫ ∇Δu · ∇Δv = ∫ f v`.
//!
//! Each patch first gets its operator in the tensor B-spline basis. The
//! global system is then `S = Σ Cᵀ K C` with `C` the coefficient
//! extraction of the basis functions on that patch.

use std::io::Write;
use std::path::Path;

use sprs::{CsMat, TriMat};

use crate::basis::GlobalBasis;
use crate::bspline::SplineSpace1D;
use crate::error::{Error, Result};
use crate::multipatch::{geometry_jet, BilinearPatch, GeometryJet, MultiPatchDomain};
use crate::par;
use crate::physical::from_parametric;
use crate::poly2d::Polynomial2D;
use crate::quadrature::{quadrature_rule, QuadratureRule};

/// Parametric derivative orders `(a, b)` of total order 1 to 3.
pub const DERIVATIVE_ORDERS: [(usize, usize); 9] = [
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

/// Linear map from the derivatives listed in [`DERIVATIVE_ORDERS`] to `∇Δw`.
pub fn grad_laplacian_map(jet: &GeometryJet) -> [[f64; 9]; 2] {
    let mut out = [[0.0; 9]; 2];
    for (col, &(a, b)) in DERIVATIVE_ORDERS.iter().enumerate() {
        let mut t = vec![vec![0.0; 4]; 4];
        t[a][b] = 1.0;
        let g = from_parametric(jet, &t, 3).grad_laplacian();
        out[0][col] = g[0];
        out[1][col] = g[1];
    }
    out
}

/// Operator of one patch in its tensor B-spline basis, indexed `i·d + j`.
#[derive(Clone, Debug)]
pub struct PatchOperator {
    pub stiffness: CsMat<f64>,
    pub load: Vec<f64>,
}

/// Assembled Galerkin system.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    /// Symmetrized stiffness matrix.
    pub matrix: CsMat<f64>,
    pub rhs: Vec<f64>,
    /// `‖S - Sᵀ‖_max / ‖S‖_max` before symmetrization.
    pub asymmetry: f64,
}

impl LinearSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }
}

struct ElementBlock {
    i0: usize,
    j0: usize,
    values: Vec<f64>,
    load: Vec<f64>,
}

/// Stiffness and load of `patch` in the tensor basis of `space`.
pub fn patch_operator(
    patch_id: usize,
    patch: &BilinearPatch,
    space: &SplineSpace1D,
    rule: &QuadratureRule,
    rhs: &Polynomial2D,
) -> Result<PatchOperator> {
    let d = space.dim();
    let p = space.degree();
    let ne = rule.elements.len();
    let nb = p + 1;
    let rows: Vec<Result<Vec<ElementBlock>>> = par::map_range(ne, |e1| {
        let mut out = Vec::with_capacity(ne);
        for e2 in 0..ne {
            let mut k = vec![0.0; nb * nb * nb * nb];
            let mut f = vec![0.0; nb * nb];
            let mut first = (0, 0);
            let mut grads = vec![[0.0; 2]; nb * nb];
            let mut vals = vec![0.0; nb * nb];
            for (x1, w1) in rule.points[e1].iter().zip(&rule.weights[e1]) {
                let (f1, u) = space.eval_local(*x1, 3);
                for (x2, w2) in rule.points[e2].iter().zip(&rule.weights[e2]) {
                    let (f2, v) = space.eval_local(*x2, 3);
                    first = (f1, f2);
                    let jet = geometry_jet(patch, *x1, *x2).map_err(|_| {
                        Error::QuadratureDegeneracy {
                            patch: patch_id,
                            det: patch.det(*x1, *x2),
                        }
                    })?;
                    let map = grad_laplacian_map(&jet);
                    let wdet = w1 * w2 * jet.det.abs();
                    let x = jet.point;
                    let fx = rhs.eval(x.x, x.y) * wdet;
                    for a in 0..nb {
                        for b in 0..nb {
                            let der = DERIVATIVE_ORDERS.map(|(da, db)| u[da][a] * v[db][b]);
                            let mut g = [0.0; 2];
                            for c in 0..2 {
                                g[c] = (0..9).map(|m| map[c][m] * der[m]).sum();
                            }
                            grads[a * nb + b] = g;
                            vals[a * nb + b] = u[0][a] * v[0][b];
                        }
                    }
                    for r in 0..nb * nb {
                        f[r] += fx * vals[r];
                        let gr = grads[r];
                        for c in 0..=r {
                            let gc = grads[c];
                            k[r * nb * nb + c] += wdet * (gr[0] * gc[0] + gr[1] * gc[1]);
                        }
                    }
                }
            }
            for r in 0..nb * nb {
                for c in 0..r {
                    k[c * nb * nb + r] = k[r * nb * nb + c];
                }
            }
            out.push(ElementBlock {
                i0: first.0,
                j0: first.1,
                values: k,
                load: f,
            });
        }
        Ok(out)
    });
    let mut tri = TriMat::new((d * d, d * d));
    let mut load = vec![0.0; d * d];
    for row in rows {
        for blk in row? {
            let index = |r: usize| (blk.i0 + r / nb) * d + blk.j0 + r % nb;
            for r in 0..nb * nb {
                load[index(r)] += blk.load[r];
                for c in 0..nb * nb {
                    tri.add_triplet(index(r), index(c), blk.values[r * nb * nb + c]);
                }
            }
        }
    }
    Ok(PatchOperator {
        stiffness: tri.to_csr(),
        load,
    })
}

/// Extraction matrix of `patch`: `d² × dim`, column `f` holding the
/// coefficients of function `f` on that patch.
pub fn extraction(basis: &GlobalBasis, patch: usize) -> CsMat<f64> {
    let d = basis.space.dim();
    let mut tri = TriMat::new((d * d, basis.dim()));
    for (col, f) in basis.functions.iter().enumerate() {
        if let Some(g) = f.grid(patch) {
            for (i, j, v) in g.entries() {
                tri.add_triplet(i * d + j, col, v);
            }
        }
    }
    tri.to_csr()
}

fn max_abs(m: &CsMat<f64>) -> f64 {
    m.data().iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Assembles `S` and `f` for the right-hand side `rhs` with the default rule.
pub fn assemble_system(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    rhs: &Polynomial2D,
) -> Result<LinearSystem> {
    assemble_with_rule(domain, basis, rhs, &quadrature_rule(&basis.space))
}

/// Assembles with an explicit quadrature rule.
pub fn assemble_with_rule(
    domain: &MultiPatchDomain,
    basis: &GlobalBasis,
    rhs: &Polynomial2D,
    rule: &QuadratureRule,
) -> Result<LinearSystem> {
    if basis.dim() == 0 {
        return Err(Error::InvalidParameter("empty discrete space".into()));
    }
    let parts: Vec<Result<(CsMat<f64>, Vec<f64>)>> =
        par::map_range(domain.patch_count(), |l| {
            let op = patch_operator(l, &domain.patches[l], &basis.space, rule, rhs)?;
            let c = extraction(basis, l);
            let ct: CsMat<f64> = c.transpose_view().to_csr();
            let s = &(&ct * &op.stiffness) * &c;
            let mut f = vec![0.0; basis.dim()];
            for (v, (row, col)) in c.iter() {
                f[col] += v * op.load[row];
            }
            Ok((s, f))
        });
    let n = basis.dim();
    let mut s: CsMat<f64> = CsMat::zero((n, n));
    let mut f = vec![0.0; n];
    for part in parts {
        let (sl, fl) = part?;
        s = &s + &sl;
        for (a, b) in f.iter_mut().zip(&fl) {
            *a += b;
        }
    }
    let st: CsMat<f64> = s.transpose_view().to_csr();
    let diff = &s - &st;
    let asymmetry = max_abs(&diff) / max_abs(&s).max(f64::MIN_POSITIVE);
    let sum = &s + &st;
    let matrix = sum.map(|v| 0.5 * v);
    Ok(LinearSystem {
        matrix,
        rhs: f,
        asymmetry,
    })
}

/// Writes `S` in Matrix Market coordinate format and `f` as plain text.
pub fn export_system(sys: &LinearSystem, matrix: &Path, rhs: &Path) -> Result<()> {
    sprs::io::write_matrix_market(matrix, sys.matrix.view())?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(rhs)?);
    for v in &sys.rhs {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::make_space;

    fn unit() -> BilinearPatch {
        BilinearPatch::from_corners([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    }

    #[test]
    fn identity_map_is_grad_laplacian() {
        let jet = geometry_jet(&unit(), 0.2, 0.7).unwrap();
        let m = grad_laplacian_map(&jet);
        // ∂1Δ = g_111 + g_122, ∂2Δ = g_112 + g_222.
        assert_eq!(m[0], [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(m[1], [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn patch_operator_is_symmetric_and_integrates_load() {
        let space = make_space(5, 2, 1).unwrap();
        let rule = quadrature_rule(&space);
        let patch = BilinearPatch::from_corners([[0.0, 0.0], [2.0, 0.2], [2.3, 1.9], [0.1, 1.5]]);
        let one = Polynomial2D::monomial(0, 0, 1.0);
        let op = patch_operator(0, &patch, &space, &rule, &one).unwrap();
        let t: CsMat<f64> = op.stiffness.transpose_view().to_csr();
        assert!(max_abs(&(&op.stiffness - &t)) < 1e-14 * max_abs(&op.stiffness));
        // Partition of unity: Σ f_i = area.
        let area = rule.integrate_2d(|a, b| patch.det(a, b));
        assert!((op.load.iter().sum::<f64>() - area).abs() < 1e-13);
    }

    #[test]
    fn stiffness_annihilates_quadratics() {
        // ∇Δ of a quadratic vanishes; the spline of x1² lies in the space.
        let space = make_space(5, 2, 1).unwrap();
        let rule = quadrature_rule(&space);
        let op = patch_operator(0, &unit(), &space, &rule, &Polynomial2D::zero()).unwrap();
        let col = space.collocation().unwrap();
        let c1 = col.fit(|x| x * x).unwrap();
        let d = space.dim();
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                v[i * d + j] = c1[i];
            }
        }
        let mut kv = vec![0.0; d * d];
        for (val, (r, c)) in op.stiffness.iter() {
            kv[r] += val * v[c];
        }
        assert!(kv.iter().all(|x| x.abs() < 1e-8));
    }
}
