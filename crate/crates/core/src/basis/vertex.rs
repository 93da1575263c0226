//! Vertex functions: the kernel of the corner-compatibility system around a
//! vertex of valency three or more.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::bspline::SplineSpace1D;
use crate::error::{Error, Result};
use crate::multipatch::{EdgeRef, MultiPatchDomain, SquareSymmetry, Vertex};

use super::edge::near_end_index;
use super::function::{FunctionKind, IsogeometricFunction, SparseGrid};

/// Singular values relative to the largest inside this band make the rank
/// decision ambiguous.
pub const RANK_BAND: (f64, f64) = (1e-10, 1e-6);

/// Relative pivot threshold of the elimination.
pub const PIVOT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unknown {
    /// `a^{Γ^(e)}_{i,j}` where `e` is the position in the fan edge list and
    /// `j` counts from the vertex.
    Edge { fan_edge: usize, i: usize, j: usize },
    /// `a^(ℓ)_{i,j}` for fan patch `ℓ`.
    Patch { fan_patch: usize, i: usize, j: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// Derivative `∂^i ∂^j` on fan patch `ℓ` of `f^{Γ(ℓ+1)} - f^{Γ(ℓ)}`.
    EdgeEdge { fan_patch: usize, i: usize, j: usize },
    /// Derivative `∂^i ∂^j` on fan patch `ℓ` of `f^{Γ(ℓ+1)} - f^{Ω(ℓ)}`.
    EdgePatch { fan_patch: usize, i: usize, j: usize },
    /// Unknown forced to zero at a boundary vertex.
    Fix { unknown: usize },
}

#[derive(Clone, Debug)]
pub struct VertexSystem {
    pub vertex: usize,
    pub matrix: DMatrix<f64>,
    pub unknowns: Vec<Unknown>,
    pub rows: Vec<RowKind>,
    /// Function attached to each unknown (the edge or patch B-spline it
    /// multiplies); `None` for boundary fan edges.
    pub(crate) functions: Vec<Option<IsogeometricFunction>>,
}

/// Source of the edge functions that may enter vertex systems.
pub trait EdgeFunctionSource {
    /// `φ_{Γ^(s); i, j}` if it exists and is allowed in vertex systems.
    fn edge_function(&self, s: usize, i: usize, j: usize) -> Option<&IsogeometricFunction>;
    fn n(&self, s: usize) -> [usize; 3];
}

/// Corner derivatives `∂^i_1 ∂^j_2 (0, 0)`, `i, j <= 2`, of a grid given in
/// the standardized indices of the fan patch.
fn corner_derivatives(t: &[[f64; 3]; 3], block: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += t[i][a] * t[j][b] * block[a][b];
                }
            }
            s
        })
    })
}

fn fan_block(f: &IsogeometricFunction, patch: usize, sym: &SquareSymmetry) -> [[f64; 3]; 3] {
    match f.grid(patch) {
        Some(g) => g.to_standard(sym).corner_block(),
        None => [[0.0; 3]; 3],
    }
}

/// Which end (`0` for `v = 0`, `1` for `v = 1`) of interface `s` is the vertex.
pub fn interface_end(domain: &MultiPatchDomain, s: usize, vertex: &Vertex) -> Result<usize> {
    let iface = &domain.interfaces[s];
    let tol = 1e-9 * domain.diameter;
    let close = |p: [f64; 2]| (p[0] - vertex.position[0]).hypot(p[1] - vertex.position[1]) <= tol;
    if close(iface.ends[0]) {
        Ok(0)
    } else if close(iface.ends[1]) {
        Ok(1)
    } else {
        Err(Error::Topology(format!(
            "interface {s} does not end at vertex ({}, {})",
            vertex.position[0], vertex.position[1]
        )))
    }
}

/// Sets up `H^(ρ)` for vertex `rho`.
pub fn vertex_system(
    domain: &MultiPatchDomain,
    rho: usize,
    space: &SplineSpace1D,
    edges: &dyn EdgeFunctionSource,
) -> Result<VertexSystem> {
    let vertex = domain
        .vertices
        .get(rho)
        .ok_or_else(|| Error::IndexOutOfRange(format!("vertex {rho}")))?;
    let nu = vertex.fan.len();
    let fan_edges = vertex.fan_edges();
    let d = space.dim();
    let t = space.endpoint_derivatives();

    let mut unknowns = Vec::new();
    let mut functions: Vec<Option<IsogeometricFunction>> = Vec::new();
    // First unknown index of each fan edge.
    let mut edge_start = Vec::with_capacity(fan_edges.len());
    for (e, er) in fan_edges.iter().enumerate() {
        edge_start.push(unknowns.len());
        let iface = match er {
            EdgeRef::Interface(s) => Some((*s, interface_end(domain, *s, vertex)?)),
            EdgeRef::Boundary { .. } => None,
        };
        for i in 0..3 {
            for jj in 0..=4 - i {
                let f = match iface {
                    Some((s, end)) => {
                        let j = near_end_index(i, jj, edges.n(s)[i], end);
                        match edges.edge_function(s, i, j) {
                            Some(f) => Some(f.clone()),
                            None => continue,
                        }
                    }
                    None => None,
                };
                unknowns.push(Unknown::Edge { fan_edge: e, i, j: jj });
                functions.push(f);
            }
        }
    }
    edge_start.push(unknowns.len());
    let patch_start = unknowns.len();
    for (l, entry) in vertex.fan.iter().enumerate() {
        for a in 0..3 {
            for b in 0..3 {
                unknowns.push(Unknown::Patch { fan_patch: l, i: a, j: b });
                let native = SparseGrid::from_entries(d, [(a, b, -1.0)]).to_native(&entry.symmetry);
                let mut f = IsogeometricFunction::new(FunctionKind::Patch {
                    patch: entry.patch,
                    i: a,
                    j: b,
                });
                f.grids.insert(entry.patch, native);
                functions.push(Some(f));
            }
        }
    }
    let n_unknowns = unknowns.len();
    let edge_cols = |e: usize| edge_start[e]..edge_start[e + 1];
    let upper_of = |l: usize| if vertex.boundary { l + 1 } else { (l + 1) % nu };

    let mut rows: Vec<RowKind> = Vec::new();
    let mut data: Vec<Vec<f64>> = Vec::new();
    for (l, entry) in vertex.fan.iter().enumerate() {
        let derivs = |c: usize| -> [[f64; 3]; 3] {
            match &functions[c] {
                Some(f) => corner_derivatives(&t, &fan_block(f, entry.patch, &entry.symmetry)),
                None => [[0.0; 3]; 3],
            }
        };
        let up: Vec<(usize, [[f64; 3]; 3])> = edge_cols(upper_of(l)).map(|c| (c, derivs(c))).collect();
        let low: Vec<(usize, [[f64; 3]; 3])> = edge_cols(l).map(|c| (c, derivs(c))).collect();
        let pat: Vec<(usize, [[f64; 3]; 3])> = (0..9)
            .map(|k| {
                let c = patch_start + 9 * l + k;
                (c, derivs(c))
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let mut row = vec![0.0; n_unknowns];
                for (c, dv) in &up {
                    row[*c] += dv[i][j];
                }
                for (c, dv) in &low {
                    row[*c] -= dv[i][j];
                }
                rows.push(RowKind::EdgeEdge { fan_patch: l, i, j });
                data.push(row);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut row = vec![0.0; n_unknowns];
                for (c, dv) in &up {
                    row[*c] += dv[i][j];
                }
                // Patch functions carry the minus sign of f^Ω already.
                for (c, dv) in &pat {
                    row[*c] += dv[i][j];
                }
                rows.push(RowKind::EdgePatch { fan_patch: l, i, j });
                data.push(row);
            }
        }
    }
    if vertex.boundary {
        let mut fixed: Vec<usize> = edge_cols(0).collect();
        fixed.extend(edge_cols(fan_edges.len() - 1));
        fixed.extend(patch_start..n_unknowns);
        for c in fixed {
            let mut row = vec![0.0; n_unknowns];
            row[c] = 1.0;
            rows.push(RowKind::Fix { unknown: c });
            data.push(row);
        }
    }
    let matrix = DMatrix::from_fn(data.len(), n_unknowns, |r, c| data[r][c]);
    Ok(VertexSystem {
        vertex: rho,
        matrix,
        unknowns,
        rows,
        functions,
    })
}

/// Divides each row by its largest magnitude.
fn equilibrate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let s = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if s > 0.0 {
            row /= s;
        }
    }
    out
}

/// Numerical rank with the ambiguity check.
pub fn numerical_rank(m: &DMatrix<f64>, vertex: usize) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, v| a.max(*v));
    if smax == 0.0 {
        return Ok(0);
    }
    let mut rank = 0;
    for s in sv.iter() {
        let ratio = s / smax;
        if ratio >= RANK_BAND.0 && ratio <= RANK_BAND.1 {
            return Err(Error::RankAmbiguity { vertex, ratio });
        }
        if ratio > RANK_BAND.1 {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Kernel basis by column-pivoted reduction to row echelon form: every
/// non-pivot column is a free unknown, set to one in its own vector.
pub fn kernel_basis(m: &DMatrix<f64>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (mut best, mut val) = (r, 0.0f64);
        for i in r..rows {
            if a[(i, c)].abs() > val {
                val = a[(i, c)].abs();
                best = i;
            }
        }
        if val <= PIVOT_TOL {
            continue;
        }
        a.swap_rows(r, best);
        let p = a[(r, c)];
        for j in 0..cols {
            a[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = a[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = a[(r, j)];
                        a[(i, j)] -= f * v;
                    }
                }
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|p| p.1).collect();
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    let basis = free
        .iter()
        .map(|&f| {
            let mut x = vec![0.0; cols];
            x[f] = 1.0;
            for &(pr, pc) in &pivots {
                x[pc] = -a[(pr, f)];
            }
            x
        })
        .collect();
    (basis, free)
}

/// Vertex functions of vertex `rho`, normalized to unit largest coefficient.
pub fn vertex_functions(system: &VertexSystem, d: usize) -> Result<Vec<IsogeometricFunction>> {
    let eq = equilibrate(&system.matrix);
    let rank = numerical_rank(&eq, system.vertex)?;
    let (basis, _) = kernel_basis(&eq);
    if basis.len() != eq.ncols() - rank {
        return Err(Error::RankAmbiguity {
            vertex: system.vertex,
            ratio: f64::NAN,
        });
    }
    let kind = |m| FunctionKind::Vertex {
        vertex: system.vertex,
        m,
    };
    let mut raw = Vec::with_capacity(basis.len());
    for (m, x) in basis.iter().enumerate() {
        let terms: Vec<(f64, &IsogeometricFunction)> = x
            .iter()
            .zip(&system.functions)
            .filter_map(|(c, f)| f.as_ref().map(|f| (*c, f)))
            .collect();
        raw.push(IsogeometricFunction::combine(kind(m), d, &terms));
    }
    let mut out = determining_set_basis(&raw, d, kind)
        .ok_or(Error::RankAmbiguity {
            vertex: system.vertex,
            ratio: 0.0,
        })?;
    for f in &mut out {
        f.clean(1e-14);
        let s = f.max_coefficient();
        if s == 0.0 {
            return Err(Error::RankAmbiguity {
                vertex: system.vertex,
                ratio: 0.0,
            });
        }
        f.scale(1.0 / s);
    }
    Ok(out)
}

/// Rebases `funcs` on a determining set of spline coefficients: coefficients
/// are chosen greedily by complete pivoting, and the `m`-th returned function
/// is 1 at the `m`-th chosen coefficient and 0 at the others.
pub fn determining_set_basis(
    funcs: &[IsogeometricFunction],
    d: usize,
    kind: impl Fn(usize) -> FunctionKind,
) -> Option<Vec<IsogeometricFunction>> {
    let n = funcs.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let keys: BTreeSet<(usize, usize, usize)> = funcs
        .iter()
        .flat_map(|f| {
            f.grids
                .iter()
                .flat_map(|(&p, g)| g.entries().map(move |(i, j, _)| (p, i, j)))
        })
        .collect();
    let keys: Vec<_> = keys.into_iter().collect();
    let value = |f: &IsogeometricFunction, (p, i, j): (usize, usize, usize)| {
        f.grid(p).map_or(0.0, |g| g.get(i, j))
    };
    let g = DMatrix::from_fn(keys.len(), n, |r, c| value(&funcs[c], keys[r]));
    // Complete pivoting on a working copy to pick the determining rows.
    let mut w = g.clone();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::with_capacity(n);
    let mut used = vec![false; keys.len()];
    for step in 0..n {
        let (mut br, mut bc, mut bv) = (0, 0, 0.0f64);
        for r in 0..keys.len() {
            if used[r] {
                continue;
            }
            for &c in &cols[step..] {
                if w[(r, c)].abs() > bv {
                    (br, bc, bv) = (r, c, w[(r, c)].abs());
                }
            }
        }
        if bv == 0.0 {
            return None;
        }
        used[br] = true;
        chosen.push(br);
        let pos = cols.iter().position(|&c| c == bc).expect("column present");
        cols.swap(step, pos);
        let pivot = w.column(bc).clone_owned() / w[(br, bc)];
        for &c in &cols[step + 1..] {
            let f = w[(br, c)];
            if f != 0.0 {
                let mut col = w.column_mut(c);
                col -= &pivot * f;
            }
        }
    }
    let sel = DMatrix::from_fn(n, n, |r, c| g[(chosen[r], c)]);
    let inv = sel.try_inverse()?;
    Some(
        (0..n)
            .map(|m| {
                let terms: Vec<(f64, &IsogeometricFunction)> =
                    (0..n).map(|k| (inv[(k, m)], &funcs[k])).collect();
                IsogeometricFunction::combine(kind(m), d, &terms)
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_small_matrix() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0]);
        let (b, free) = kernel_basis(&m);
        assert_eq!(free, vec![1, 3]);
        for x in &b {
            let r = &m * nalgebra::DVector::from_column_slice(x);
            assert!(r.norm() < 1e-14);
        }
        assert_eq!(numerical_rank(&m, 0).unwrap(), 2);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-8]);
        assert!(matches!(
            numerical_rank(&m, 3),
            Err(Error::RankAmbiguity { vertex: 3, .. })
        ));
    }
}
