//! Isogeometric functions stored as per-patch spline coefficient grids.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bspline::SplineSpace1D;
use crate::multipatch::SquareSymmetry;

/// A `d × d` coefficient grid stored on the bounding box of its nonzeros.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseGrid {
    pub d: usize,
    pub i0: usize,
    pub j0: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major over the box.
    pub values: Vec<f64>,
}

impl SparseGrid {
    pub fn empty(d: usize) -> Self {
        Self {
            d,
            i0: 0,
            j0: 0,
            rows: 0,
            cols: 0,
            values: Vec::new(),
        }
    }

    /// Builds a grid from `(i, j, value)` entries; repeated indices add up
    /// and exact zeros are dropped from the bounding box.
    pub fn from_entries(d: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, v) in entries {
            *map.entry((i, j)).or_insert(0.0) += v;
        }
        map.retain(|_, v| *v != 0.0);
        if map.is_empty() {
            return Self::empty(d);
        }
        let i0 = map.keys().map(|k| k.0).min().unwrap();
        let i1 = map.keys().map(|k| k.0).max().unwrap();
        let j0 = map.keys().map(|k| k.1).min().unwrap();
        let j1 = map.keys().map(|k| k.1).max().unwrap();
        let (rows, cols) = (i1 - i0 + 1, j1 - j0 + 1);
        let mut values = vec![0.0; rows * cols];
        for ((i, j), v) in map {
            values[(i - i0) * cols + (j - j0)] = v;
        }
        Self {
            d,
            i0,
            j0,
            rows,
            cols,
            values,
        }
    }

    pub fn from_dense(d: usize, dense: &[f64]) -> Self {
        Self::from_entries(
            d,
            (0..d * d).filter_map(|k| (dense[k] != 0.0).then_some((k / d, k % d, dense[k]))),
        )
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.i0 || j < self.j0 || i >= self.i0 + self.rows || j >= self.j0 + self.cols {
            return 0.0;
        }
        self.values[(i - self.i0) * self.cols + (j - self.j0)]
    }

    /// Nonzero entries `(i, j, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().enumerate().filter_map(move |(k, &v)| {
            (v != 0.0).then_some((self.i0 + k / self.cols, self.j0 + k % self.cols, v))
        })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.d * self.d];
        for (i, j, v) in self.entries() {
            out[i * self.d + j] = v;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Reindexes a grid given in standardized indices into native indices.
    pub fn to_native(&self, sym: &SquareSymmetry) -> Self {
        Self::from_entries(
            self.d,
            self.entries().map(|(i, j, v)| {
                let (a, b) = sym.apply_index(i, j, self.d);
                (a, b, v)
            }),
        )
    }

    /// Reindexes a native grid into the standardized indices of `sym`.
    pub fn to_standard(&self, sym: &SquareSymmetry) -> Self {
        self.to_native(&sym.inverse())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self::from_entries(
            self.d,
            self.entries()
                .chain(other.entries().map(|(i, j, v)| (i, j, s * v))),
        )
    }

    /// The `3 × 3` block at the `(0, 0)` corner.
    pub fn corner_block(&self) -> [[f64; 3]; 3] {
        std::array::from_fn(|a| std::array::from_fn(|b| self.get(a, b)))
    }

    /// Partial derivatives `[a][b]` up to total order `order`.
    pub fn eval(&self, space: &SplineSpace1D, xi1: f64, xi2: f64, order: usize) -> Vec<Vec<f64>> {
        let order = order.min(space.degree());
        let (f1, b1) = space.eval_local(xi1, order);
        let (f2, b2) = space.eval_local(xi2, order);
        let mut out = vec![vec![0.0; order + 1]; order + 1];
        for (ii, i) in (f1..f1 + b1[0].len()).enumerate() {
            for (jj, j) in (f2..f2 + b2[0].len()).enumerate() {
                let c = self.get(i, j);
                if c == 0.0 {
                    continue;
                }
                for a in 0..=order {
                    for b in 0..=order - a {
                        out[a][b] += c * b1[a][ii] * b2[b][jj];
                    }
                }
            }
        }
        out
    }
}

/// Where a basis function comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionKind {
    Patch { patch: usize, i: usize, j: usize },
    Edge { interface: usize, i: usize, j: usize },
    /// The corrected function replacing `(0, 4)` when `h = 1/4`.
    ModifiedEdge { interface: usize, i: usize, j: usize },
    Vertex { vertex: usize, m: usize },
}

/// One function of the discrete space: coefficient grids per patch, in the
/// native parameterization of each patch. Absent patches carry zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsogeometricFunction {
    pub kind: FunctionKind,
    pub grids: BTreeMap<usize, SparseGrid>,
}

impl IsogeometricFunction {
    pub fn new(kind: FunctionKind) -> Self {
        Self {
            kind,
            grids: BTreeMap::new(),
        }
    }

    pub fn grid(&self, patch: usize) -> Option<&SparseGrid> {
        self.grids.get(&patch)
    }

    pub fn max_coefficient(&self) -> f64 {
        self.grids.values().fold(0.0, |m, g| m.max(g.max_abs()))
    }

    /// Linear combination `Σ c_k f_k` (kind taken from the argument).
    pub fn combine(kind: FunctionKind, d: usize, terms: &[(f64, &IsogeometricFunction)]) -> Self {
        let mut acc: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for (c, f) in terms {
            if *c == 0.0 {
                continue;
            }
            for (&p, g) in &f.grids {
                acc.entry(p)
                    .or_default()
                    .extend(g.entries().map(|(i, j, v)| (i, j, c * v)));
            }
        }
        let grids = acc
            .into_iter()
            .map(|(p, e)| (p, SparseGrid::from_entries(d, e)))
            .filter(|(_, g)| !g.is_empty())
            .collect();
        Self { kind, grids }
    }

    /// Drops entries below `tol` times the largest coefficient.
    pub fn clean(&mut self, tol: f64) {
        let cut = tol * self.max_coefficient();
        for g in self.grids.values_mut() {
            let d = g.d;
            *g = SparseGrid::from_entries(
                d,
                g.entries().filter(|e| e.2.abs() > cut).collect::<Vec<_>>(),
            );
        }
        self.grids.retain(|_, g| !g.is_empty());
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.grids.values_mut() {
            g.scale(s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_grid_box_and_symmetry() {
        let g = SparseGrid::from_entries(6, [(0, 2, 1.0), (2, 4, -2.0), (0, 2, 0.5)]);
        assert_eq!((g.i0, g.j0, g.rows, g.cols), (0, 2, 3, 3));
        assert_eq!(g.get(0, 2), 1.5);
        assert_eq!(g.get(5, 5), 0.0);
        for s in SquareSymmetry::all() {
            let back = g.to_native(&s).to_standard(&s);
            assert_eq!(back, g);
        }
        let dense = g.to_dense();
        assert_eq!(SparseGrid::from_dense(6, &dense), g);
    }

    #[test]
    fn eval_matches_finite_differences() {
        let s = crate::bspline::make_space(5, 2, 2).unwrap();
        let d = s.dim();
        let g = SparseGrid::from_entries(
            d,
            (0..d * d).map(|k| (k / d, k % d, ((k * 7919) % 13) as f64 - 6.0)),
        );
        let ones = SparseGrid::from_entries(d, (0..d * d).map(|k| (k / d, k % d, 1.0)));
        assert!((ones.eval(&s, 0.37, 0.81, 0)[0][0] - 1.0).abs() < 1e-14);
        let (x, y, e) = (0.41, 0.23, 1e-5);
        let t = g.eval(&s, x, y, 2);
        let f = |a, b| g.eval(&s, a, b, 0)[0][0];
        let fd = (f(x + e, y + e) - f(x + e, y - e) - f(x - e, y + e) + f(x - e, y - e))
            / (4.0 * e * e);
        assert!((t[1][1] - fd).abs() < 1e-4 * t[1][1].abs().max(1.0));
    }
}
