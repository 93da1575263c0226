//! The global discrete space: patch, edge and vertex blocks.

use std::collections::BTreeSet;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bspline::{make_space, SplineSpace1D};
use crate::error::{Error, Result};
use crate::gluing::{gluing_data, InterfaceGluing, L, LP};
use crate::multipatch::MultiPatchDomain;
use crate::par;

use super::edge::{interior_indices, EdgeBuilder};
use super::function::{FunctionKind, IsogeometricFunction, SparseGrid};
use super::vertex::{vertex_functions, vertex_system, EdgeFunctionSource};

/// Accepted residual of the least-squares correction used when `h = 1/4`.
pub const CORRECTION_TOL: f64 = 1e-10;

/// Smallest admissible number of inner knots, `⌈(9-p)/(p-r-2)⌉`.
pub fn min_inner_knots(p: usize, r: usize) -> usize {
    let num = 9isize - p as isize;
    if num <= 0 {
        return 0;
    }
    if p < r + 3 {
        return usize::MAX;
    }
    let den = (p - r - 2) as isize;
    ((num + den - 1) / den) as usize
}

/// `p = 5, r = 2, k = 3`: below the threshold but supported by a modified
/// edge function on every interface.
pub fn is_quarter_case(p: usize, r: usize, k: usize) -> bool {
    p == 5 && r == 2 && k == 3
}

/// Patch functions `N_{i,j}`, `3 <= i, j <= d-4`, of patch `l`.
pub fn patch_basis(l: usize, space: &SplineSpace1D) -> Vec<IsogeometricFunction> {
    let d = space.dim();
    let mut out = Vec::new();
    if d < 7 {
        return out;
    }
    for i in 3..=d - 4 {
        for j in 3..=d - 4 {
            let mut f = IsogeometricFunction::new(FunctionKind::Patch { patch: l, i, j });
            f.grids.insert(l, SparseGrid::from_entries(d, [(i, j, 1.0)]));
            out.push(f);
        }
    }
    out
}

/// All edge functions of one interface, with the gluing data.
#[derive(Clone, Debug)]
pub struct InterfaceFunctions {
    pub glue: InterfaceGluing,
    pub n: [usize; 3],
    pub all: [Vec<IsogeometricFunction>; 3],
    /// `(i, j)` pairs withheld from vertex systems.
    pub excluded: BTreeSet<(usize, usize)>,
}

struct EdgeTable<'a>(&'a [InterfaceFunctions]);

impl EdgeFunctionSource for EdgeTable<'_> {
    fn edge_function(&self, s: usize, i: usize, j: usize) -> Option<&IsogeometricFunction> {
        let f = &self.0[s];
        if f.excluded.contains(&(i, j)) {
            None
        } else {
            f.all[i].get(j)
        }
    }

    fn n(&self, s: usize) -> [usize; 3] {
        self.0[s].n
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalBasis {
    pub p: usize,
    pub r: usize,
    pub k: usize,
    #[serde(skip)]
    pub space: SplineSpace1D,
    pub functions: Vec<IsogeometricFunction>,
    pub patch_range: Range<usize>,
    pub edge_range: Range<usize>,
    pub vertex_range: Range<usize>,
    /// Function counts per patch, interface and vertex.
    pub patch_dims: Vec<usize>,
    pub edge_dims: Vec<usize>,
    pub vertex_dims: Vec<usize>,
    #[serde(skip)]
    pub gluing: Vec<InterfaceGluing>,
}

impl GlobalBasis {
    pub fn dim(&self) -> usize {
        self.functions.len()
    }

    /// Numerical rank of the Gram matrix of the coefficient vectors.
    pub fn gram_rank(&self, patches: usize) -> usize {
        let d = self.space.dim();
        let n = self.dim();
        let mut c = DMatrix::<f64>::zeros(patches * d * d, n);
        for (col, f) in self.functions.iter().enumerate() {
            for (&p, g) in &f.grids {
                for (i, j, v) in g.entries() {
                    c[(p * d * d + i * d + j, col)] = v;
                }
            }
        }
        let gram = c.transpose() * &c;
        let eig = gram.symmetric_eigenvalues();
        let max = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        eig.iter().filter(|v| **v > 1e-12 * max).count()
    }

    /// Value of basis function `f` at parameter `(xi1, xi2)` of `patch`.
    pub fn eval(&self, f: usize, patch: usize, xi1: f64, xi2: f64, order: usize) -> Vec<Vec<f64>> {
        match self.functions[f].grid(patch) {
            Some(g) => g.eval(&self.space, xi1, xi2, order),
            None => vec![vec![0.0; order + 1]; order + 1],
        }
    }

    /// JSON export: per function its kind and dense `d × d` row-major grids.
    pub fn export_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            p: usize,
            r: usize,
            k: usize,
            d: usize,
            functions: Vec<OutFn<'a>>,
        }
        #[derive(Serialize)]
        struct OutFn<'a> {
            #[serde(flatten)]
            kind: &'a FunctionKind,
            grids: Vec<(usize, Vec<f64>)>,
        }
        let out = Out {
            p: self.p,
            r: self.r,
            k: self.k,
            d: self.space.dim(),
            functions: self
                .functions
                .iter()
                .map(|f| OutFn {
                    kind: &f.kind,
                    grids: f.grids.iter().map(|(&p, g)| (p, g.to_dense())).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&out)?)
    }
}

/// Corrects `φ_{Γ;0,4}` for `h = 1/4` so that its corner blocks vanish at
/// both ends of the interface, using the functions with `j <= min(4-i, 3)`
/// counted from either end.
fn corrected_function(
    s: usize,
    f: &InterfaceFunctions,
    domain: &MultiPatchDomain,
    d: usize,
) -> Result<IsogeometricFunction> {
    let iface = &domain.interfaces[s];
    let target = &f.all[0][4];
    let mut cols: Vec<&IsogeometricFunction> = Vec::new();
    for end in 0..2 {
        for i in 0..3 {
            for jj in 0..=(4 - i).min(3) {
                let j = if end == 0 { jj } else { f.n[i] - 1 - jj };
                cols.push(&f.all[i][j]);
            }
        }
    }
    // Equations: the 3×3 corner blocks at v = 0 and v = 1 on both sides.
    let block = |g: &IsogeometricFunction| -> Vec<f64> {
        let mut out = Vec::with_capacity(36);
        for tau in [L, LP] {
            let side = iface.sides[tau];
            let std = g
                .grid(side.patch)
                .map(|x| x.to_standard(&side.symmetry))
                .unwrap_or_else(|| SparseGrid::empty(d));
            for m in 0..3 {
                for n in 0..3 {
                    out.push(std.get(m, n));
                    out.push(std.get(m, d - 1 - n));
                }
            }
        }
        out
    };
    let b = DVector::from_vec(block(target));
    let a = DMatrix::from_columns(&cols.iter().map(|c| DVector::from_vec(block(c))).collect::<Vec<_>>());
    let x = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::RepresentationFailure(e.to_string()))?;
    let res = (&a * &x - &b).norm();
    if res > CORRECTION_TOL * b.norm().max(1.0) {
        return Err(Error::RepresentationFailure(format!(
            "corner correction of interface {s} leaves residual {res:e}"
        )));
    }
    let mut terms: Vec<(f64, &IsogeometricFunction)> = vec![(1.0, target)];
    terms.extend(x.iter().zip(&cols).map(|(c, f)| (-c, *f)));
    let mut out = IsogeometricFunction::combine(
        FunctionKind::ModifiedEdge {
            interface: s,
            i: 0,
            j: 4,
        },
        d,
        &terms,
    );
    out.clean(1e-14);
    Ok(out)
}

/// Builds the basis of the discrete space on `domain`.
pub fn assemble_space(domain: &MultiPatchDomain, p: usize, r: usize, k: usize) -> Result<GlobalBasis> {
    let space = make_space(p, r, k)?;
    let quarter = is_quarter_case(p, r, k);
    let kmin = min_inner_knots(p, r);
    if k < kmin && !quarter {
        return Err(Error::UnsupportedRefinement(format!(
            "k = {k} is below the admissible minimum {kmin} for p = {p}, r = {r}"
        )));
    }
    let d = space.dim();
    let patch_blocks: Vec<Vec<IsogeometricFunction>> =
        par::map_range(domain.patch_count(), |l| patch_basis(l, &space));

    let interfaces: Vec<Result<InterfaceFunctions>> = par::map_range(domain.interface_count(), |s| {
        let glue = gluing_data(domain, s)?;
        let b = EdgeBuilder::new(&space, &glue)?;
        let all = b.all_functions(domain, s)?;
        let mut excluded = BTreeSet::new();
        if quarter {
            excluded.insert((0, 4));
        }
        Ok(InterfaceFunctions {
            n: b.n,
            glue: glue.clone(),
            all,
            excluded,
        })
    });
    let interfaces: Vec<InterfaceFunctions> = interfaces.into_iter().collect::<Result<_>>()?;
    let mut edge_blocks = Vec::with_capacity(interfaces.len());
    for (s, f) in interfaces.iter().enumerate() {
        let mut block: Vec<IsogeometricFunction> = (0..3)
            .flat_map(|i| interior_indices(i, f.n[i]).map(move |j| (i, j)))
            .map(|(i, j)| f.all[i][j].clone())
            .collect();
        if quarter {
            block.push(corrected_function(s, f, domain, d)?);
        }
        edge_blocks.push(block);
    }

    let table = EdgeTable(&interfaces);
    let vertex_blocks: Vec<Result<Vec<IsogeometricFunction>>> =
        par::map_range(domain.vertex_count(), |rho| {
            let sys = vertex_system(domain, rho, &space, &table)?;
            vertex_functions(&sys, d)
        });
    let vertex_blocks: Vec<Vec<IsogeometricFunction>> =
        vertex_blocks.into_iter().collect::<Result<_>>()?;

    let patch_dims: Vec<usize> = patch_blocks.iter().map(Vec::len).collect();
    let edge_dims: Vec<usize> = edge_blocks.iter().map(Vec::len).collect();
    let vertex_dims: Vec<usize> = vertex_blocks.iter().map(Vec::len).collect();
    let np: usize = patch_dims.iter().sum();
    let ne: usize = edge_dims.iter().sum();
    let nv: usize = vertex_dims.iter().sum();
    let functions: Vec<IsogeometricFunction> = patch_blocks
        .into_iter()
        .flatten()
        .chain(edge_blocks.into_iter().flatten())
        .chain(vertex_blocks.into_iter().flatten())
        .collect();
    Ok(GlobalBasis {
        p,
        r,
        k,
        space,
        functions,
        patch_range: 0..np,
        edge_range: np..np + ne,
        vertex_range: np + ne..np + ne + nv,
        patch_dims,
        edge_dims,
        vertex_dims,
        gluing: interfaces.into_iter().map(|f| f.glue).collect(),
    })
}
