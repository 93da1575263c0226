//! Two-patch edge functions and the edge subspace of an interface.

use crate::bspline::{m_weights, Collocation, Polynomial1D, SplineSpace1D, SplineVector1D};
use crate::error::{Error, Result};
use crate::gluing::{InterfaceGluing, L, LP};
use crate::multipatch::MultiPatchDomain;

use super::function::{FunctionKind, IsogeometricFunction, SparseGrid};

/// Relative size below which converted trace coefficients are snapped to 0.
const SNAP: f64 = 1e-13;

/// `(n0, n1, n2)`: dimensions of `S^{p,r+2}`, `S^{p-dα,r+1}`, `S^{p-2dα,r}`.
pub fn edge_dims(space: &SplineSpace1D, d_alpha: usize) -> Result<[usize; 3]> {
    Ok(trace_spaces(space, d_alpha)?.map(|s| s.dim()))
}

fn trace_spaces(space: &SplineSpace1D, d_alpha: usize) -> Result<[SplineSpace1D; 3]> {
    let (p, r, k) = (space.degree(), space.regularity(), space.inner_knot_count());
    Ok([
        SplineSpace1D::new(p, r + 2, k)?,
        SplineSpace1D::new(p - d_alpha, r + 1, k)?,
        SplineSpace1D::new(p - 2 * d_alpha, r, k)?,
    ])
}

/// Indices `j` of the edge subspace for a given `i`: `5-i ..= n_i+i-6`.
pub fn interior_indices(i: usize, n_i: usize) -> std::ops::RangeInclusive<usize> {
    let lo = 5 - i;
    let hi = (n_i + i).saturating_sub(6);
    if n_i + i < 6 || hi < lo {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    lo..=hi
}

/// Index `j` of the `jj`-th function of level `i` counted from the end of
/// the interface at standardized `v = end`.
pub fn near_end_index(i: usize, jj: usize, n_i: usize, end: usize) -> usize {
    debug_assert!(jj <= 4 - i);
    if end == 0 {
        jj
    } else {
        n_i - 1 - jj
    }
}

/// Inclusive range of `n` with possibly nonzero `d_{m,n}` for `g_{i,j}`.
pub fn window(i: usize, j: usize, m: usize, n_i: usize, d: usize) -> (usize, usize) {
    let lo = (i + j).saturating_sub(m);
    let hi = (d as isize - n_i as isize + j as isize - i as isize + m as isize)
        .clamp(0, d as isize - 1) as usize;
    (lo, hi.min(d - 1))
}

/// Everything needed to build edge functions for one interface.
pub struct EdgeBuilder<'a> {
    pub space: &'a SplineSpace1D,
    pub glue: &'a InterfaceGluing,
    colloc: Collocation,
    traces: [SplineSpace1D; 3],
    pub n: [usize; 3],
}

impl<'a> EdgeBuilder<'a> {
    pub fn new(space: &'a SplineSpace1D, glue: &'a InterfaceGluing) -> Result<Self> {
        let traces = trace_spaces(space, glue.d_alpha)?;
        let n = traces.clone().map(|s| s.dim());
        Ok(Self {
            space,
            glue,
            colloc: space.collocation()?,
            traces,
            n,
        })
    }

    /// Coefficients of `q · N_j^{(deriv)}` of trace space `t` in the target.
    fn trace_coeffs(
        &self,
        q: &Polynomial1D,
        t: usize,
        j: usize,
        deriv: usize,
        snap: bool,
    ) -> Result<Vec<f64>> {
        let basis = SplineVector1D::unit(self.traces[t].clone(), j);
        let mut c = self.colloc.fit(|x| q.eval(x) * basis.eval(x, deriv))?;
        if !snap {
            return Ok(c);
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in &mut c {
            if v.abs() < SNAP * scale {
                *v = 0.0;
            }
        }
        Ok(c)
    }

    /// Grid of `g^(τ)_{i,j}` in the standardized indices of side `tau`,
    /// before any truncation to the support window.
    pub fn side_grid(&self, tau: usize, i: usize, j: usize) -> Result<SparseGrid> {
        self.side_grid_with(tau, i, j, true)
    }

    /// As [`Self::side_grid`]; `snap = false` keeps round-off residue of the
    /// trace conversion.
    pub fn side_grid_with(&self, tau: usize, i: usize, j: usize, snap: bool) -> Result<SparseGrid> {
        if i > 2 || j >= self.n[i] {
            return Err(Error::IndexOutOfRange(format!(
                "edge function ({i}, {j}) with n = {:?}",
                self.n
            )));
        }
        let p = self.space.degree() as f64;
        let h = self.space.mesh_size();
        let alpha = &self.glue.alpha[tau];
        let beta = &self.glue.beta_side[tau];
        let one = Polynomial1D::constant(1.0);
        // (M-index, factor, polynomial, derivative order)
        let terms: Vec<(usize, f64, Polynomial1D, usize)> = match i {
            0 => vec![
                (0, 1.0, one, 0),
                (1, 1.0, beta.clone(), 1),
                (2, 1.0, beta.mul(beta), 2),
            ],
            1 => vec![
                (1, p / h, alpha.clone(), 0),
                (2, 2.0 * p / h, alpha.mul(beta), 1),
            ],
            _ => vec![(2, p * (p - 1.0) / (h * h), alpha.mul(alpha), 0)],
        };
        let w = m_weights(self.space);
        let mut entries = Vec::new();
        for (mi, factor, q, deriv) in terms {
            let c = self.trace_coeffs(&q, i, j, deriv, snap)?;
            for (m, &wm) in w[mi].iter().enumerate() {
                if wm == 0.0 {
                    continue;
                }
                entries.extend(
                    c.iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(n, v)| (m, n, factor * wm * v)),
                );
            }
        }
        Ok(SparseGrid::from_entries(self.space.dim(), entries))
    }

    /// The global function `φ_{Γ;i,j}` for interface `s`.
    pub fn function(
        &self,
        domain: &MultiPatchDomain,
        s: usize,
        i: usize,
        j: usize,
    ) -> Result<IsogeometricFunction> {
        let iface = &domain.interfaces[s];
        let mut f = IsogeometricFunction::new(FunctionKind::Edge { interface: s, i, j });
        for tau in [L, LP] {
            let side = iface.sides[tau];
            let g = self.side_grid(tau, i, j)?.to_native(&side.symmetry);
            if !g.is_empty() {
                f.grids.insert(side.patch, g);
            }
        }
        Ok(f)
    }

    /// Largest unsnapped coefficient of any `g^(τ)_{i,j}` outside its
    /// support window.
    pub fn window_violation(&self) -> Result<f64> {
        let d = self.space.dim();
        let mut worst = 0.0f64;
        for tau in [L, LP] {
            for i in 0..3 {
                for j in 0..self.n[i] {
                    for (m, n, v) in self.side_grid_with(tau, i, j, false)?.entries() {
                        let inside = m <= 2 && {
                            let (lo, hi) = window(i, j, m, self.n[i], d);
                            (lo..=hi).contains(&n)
                        };
                        if !inside {
                            worst = worst.max(v.abs());
                        }
                    }
                }
            }
        }
        Ok(worst)
    }

    /// All functions `φ_{Γ;i,j}`, `0 <= i <= 2`, `0 <= j < n_i`, indexed `[i][j]`.
    pub fn all_functions(
        &self,
        domain: &MultiPatchDomain,
        s: usize,
    ) -> Result<[Vec<IsogeometricFunction>; 3]> {
        let mut out: [Vec<IsogeometricFunction>; 3] = Default::default();
        for (i, slot) in out.iter_mut().enumerate() {
            for j in 0..self.n[i] {
                slot.push(self.function(domain, s, i, j)?);
            }
        }
        Ok(out)
    }
}

/// Builds one edge function of interface `s`.
pub fn edge_function(
    domain: &MultiPatchDomain,
    s: usize,
    i: usize,
    j: usize,
    space: &SplineSpace1D,
) -> Result<IsogeometricFunction> {
    let glue = crate::gluing::gluing_data(domain, s)?;
    EdgeBuilder::new(space, &glue)?.function(domain, s, i, j)
}

/// The edge subspace of interface `s`, ordered by `i` then `j`.
pub fn edge_basis(
    domain: &MultiPatchDomain,
    s: usize,
    space: &SplineSpace1D,
) -> Result<Vec<IsogeometricFunction>> {
    let glue = crate::gluing::gluing_data(domain, s)?;
    let b = EdgeBuilder::new(space, &glue)?;
    let mut out = Vec::new();
    for i in 0..3 {
        for j in interior_indices(i, b.n[i]) {
            out.push(b.function(domain, s, i, j)?);
        }
    }
    Ok(out)
}
