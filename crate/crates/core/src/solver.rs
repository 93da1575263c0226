//! SPD solves and condition-number estimates.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use sprs::CsMat;
use sprs_ldl::{Ldl, LdlNumeric};

use crate::error::{Error, Result};
use crate::par;

/// Relative residual demanded from conjugate gradients.
pub const CG_TOL: f64 = 1e-12;
/// Largest size handled by dense fallbacks.
pub const DENSE_LIMIT: usize = 2000;
/// Relative tolerance on extreme Ritz values.
pub const LANCZOS_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Pcg,
    DenseCholesky,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub method: SolveMethod,
    /// Relative residual from the CG recursion (0 for direct solves).
    pub recursive_residual: f64,
    /// `‖f - Sc‖ / ‖f‖` recomputed from the solution.
    pub residual: f64,
    pub kappa_raw: Option<f64>,
    pub kappa_jacobi: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionMode {
    Raw,
    Jacobi,
}

/// `y = A x`, rows in parallel.
pub fn spmv(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    par::map_range(a.rows(), |i| {
        let row = a.outer_view(i).expect("row in range");
        row.iter().map(|(j, v)| v * x[j]).sum()
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn diagonal(a: &CsMat<f64>) -> Vec<f64> {
    (0..a.rows()).map(|i| a.get(i, i).copied().unwrap_or(0.0)).collect()
}

/// `b - A x` with error-free products and compensated row sums, so the
/// result is accurate even under heavy cancellation.
pub fn residual(a: &CsMat<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    par::map_range(a.rows(), |i| {
        let row = a.outer_view(i).expect("row in range");
        let (mut s, mut c) = (b[i], 0.0);
        for (j, v) in row.iter() {
            let p = -v * x[j];
            let e = (-v).mul_add(x[j], -p);
            let t = s + p;
            let z = t - s;
            c += (s - (t - z)) + (p - z) + e;
            s = t;
        }
        s + c
    })
}

/// Relative residual `‖b - A x‖ / ‖b‖`.
pub fn relative_residual(a: &CsMat<f64>, x: &[f64], b: &[f64]) -> f64 {
    let r = residual(a, x, b);
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Jacobi-preconditioned conjugate gradients. Returns the solution, the
/// iteration count and the final recursive relative residual.
///
/// After the recursion converges, the true residual is recomputed accurately
/// and refined by further CG solves for the correction while that keeps
/// reducing it. The reported residual is the one of the main recursion.
pub fn pcg(a: &CsMat<f64>, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)> {
    const RESTARTS: usize = 20;
    let n = b.len();
    let diag = diagonal(a);
    if let Some(v) = diag.iter().find(|v| **v <= 0.0) {
        return Err(Error::NotSpd(*v));
    }
    let nb = norm(b);
    let mut x = vec![0.0; n];
    if nb == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let (it, rel) = pcg_from(a, &diag, &mut x, &mut b.to_vec(), nb, tol, max_iter)?;
    let mut used = it;
    let mut r = residual(a, &x, b);
    let mut best = (norm(&r) / nb, x.clone());
    for _ in 0..RESTARTS {
        if best.0 <= tol || used >= max_iter {
            break;
        }
        // Refinement step: reduce the current true residual by a fixed factor.
        let target = (1e-3 * best.0).max(tol);
        let mut d = vec![0.0; n];
        let (it, _) = pcg_from(a, &diag, &mut d, &mut r, nb, target, max_iter - used)?;
        used += it;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        r = residual(a, &x, b);
        let true_rel = norm(&r) / nb;
        let stalled = true_rel >= 0.5 * best.0;
        if true_rel < best.0 {
            best = (true_rel, x.clone());
        }
        if stalled {
            break;
        }
    }
    Ok((best.1, used, rel))
}

/// CG iterations on `x` with residual `r = b - A x`, until `‖r‖ <= tol ‖b‖`.
fn pcg_from(
    a: &CsMat<f64>,
    diag: &[f64],
    x: &mut [f64],
    r: &mut [f64],
    nb: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(usize, f64)> {
    let n = r.len();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(r, &z);
    let mut rel = norm(r) / nb;
    if rel <= tol {
        return Ok((0, rel));
    }
    for it in 1..=max_iter {
        let ap = spmv(a, &p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NotSpd(pap / dot(&p, &p)));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(r) / nb;
        if rel <= tol {
            return Ok((it, rel));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::IterativeFailure {
        iterations: max_iter,
        residual: rel,
    })
}

fn to_dense(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.rows(), a.cols());
    for (v, (i, j)) in a.iter() {
        m[(i, j)] += *v;
    }
    m
}

fn dense_cholesky(a: &CsMat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = to_dense(a)
        .cholesky()
        .ok_or_else(|| Error::NotSpd(f64::NAN))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
}

/// Solves `S c = f` by Jacobi-PCG with tolerance [`CG_TOL`] and at most
/// `50 n` iterations. Systems of size at most [`DENSE_LIMIT`] fall back to a
/// dense Cholesky factorization if CG stalls.
pub fn solve_spd(a: &CsMat<f64>, b: &[f64]) -> Result<SolveReport> {
    let n = b.len();
    if n == 0 || a.rows() != n || a.cols() != n {
        return Err(Error::InvalidParameter(format!(
            "system of shape {:?} with right-hand side of length {n}",
            a.shape()
        )));
    }
    let (coefficients, iterations, recursive_residual, method) = match pcg(a, b, CG_TOL, 50 * n) {
        Ok((x, it, rel)) => (x, it, rel, SolveMethod::Pcg),
        Err(Error::IterativeFailure { iterations, .. }) if n <= DENSE_LIMIT => {
            (dense_cholesky(a, b)?, iterations, 0.0, SolveMethod::DenseCholesky)
        }
        Err(e) => return Err(e),
    };
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotSpd(f64::NAN));
    }
    let residual = relative_residual(a, &coefficients, b);
    Ok(SolveReport {
        coefficients,
        iterations,
        method,
        recursive_residual,
        residual,
        kappa_raw: None,
        kappa_jacobi: None,
    })
}

/// `D^{-1/2} A D^{-1/2}`.
pub fn jacobi_scaled(a: &CsMat<f64>) -> Result<CsMat<f64>> {
    let diag = diagonal(a);
    if let Some(v) = diag.iter().find(|v| **v <= 0.0) {
        return Err(Error::NotSpd(*v));
    }
    let s: Vec<f64> = diag.iter().map(|d| 1.0 / d.sqrt()).collect();
    let indptr: Vec<usize> = a.indptr().to_proper().to_vec();
    let indices = a.indices().to_vec();
    let mut data = a.data().to_vec();
    for i in 0..a.rows() {
        for k in indptr[i]..indptr[i + 1] {
            data[k] *= s[i] * s[indices[k]];
        }
    }
    let out = CsMat::new(a.shape(), indptr, indices, data);
    Ok(out)
}

/// Deterministic start vector for Lanczos.
fn start_vector(n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 12.9898).sin()).collect();
    let s = norm(&v);
    v.into_iter().map(|x| x / s).collect()
}

/// Largest eigenvalue of the symmetric operator `op` by Lanczos with full
/// reorthogonalization.
pub fn lanczos_max(n: usize, op: impl Fn(&[f64]) -> Vec<f64>, tol: f64) -> Result<f64> {
    let max_steps = n.min(400);
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n)];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    for m in 0..max_steps {
        let mut w = op(&basis[m]);
        let a = dot(&w, &basis[m]);
        alpha.push(a);
        // Two passes of Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = norm(&w);
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        let bound = (b * eig.eigenvectors[(k - 1, idx)]).abs();
        if b <= 1e-14 * theta.abs() || bound <= tol * theta.abs() {
            return Ok(theta);
        }
        if m > 0 && (theta - last).abs() <= 1e-3 * tol * theta.abs() && bound <= 1e2 * tol * theta.abs() {
            return Ok(theta);
        }
        last = theta;
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    Err(Error::EstimationFailure(format!(
        "Lanczos did not converge in {max_steps} steps"
    )))
}

/// Extreme eigenvalues `(λ_min, λ_max)` of an SPD matrix.
pub fn extreme_eigenvalues(a: &CsMat<f64>) -> Result<(f64, f64)> {
    let n = a.rows();
    if n <= DENSE_LIMIT {
        let eig = to_dense(a).symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min <= 0.0 {
            return Err(Error::NotSpd(min));
        }
        return Ok((min, max));
    }
    let max = lanczos_max(n, |x| spmv(a, x), LANCZOS_TOL)?;
    let ldl: LdlNumeric<f64, usize> = Ldl::new()
        .numeric(a.view())
        .map_err(|e| Error::EstimationFailure(format!("factorization failed: {e}")))?;
    if let Some(v) = ldl.d().iter().find(|v| **v <= 0.0) {
        return Err(Error::NotSpd(*v));
    }
    let inv_max = lanczos_max(n, |x| ldl.solve(x.to_vec()), LANCZOS_TOL)?;
    Ok((1.0 / inv_max, max))
}

/// Spectral condition number of `a` or of its Jacobi scaling.
pub fn condition_number(a: &CsMat<f64>, mode: ConditionMode) -> Result<f64> {
    let (min, max) = match mode {
        ConditionMode::Raw => extreme_eigenvalues(a)?,
        ConditionMode::Jacobi => extreme_eigenvalues(&jacobi_scaled(a)?)?,
    };
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sprs::TriMat;

    fn diag(v: &[f64]) -> CsMat<f64> {
        let mut t = TriMat::new((v.len(), v.len()));
        for (i, x) in v.iter().enumerate() {
            t.add_triplet(i, i, *x);
        }
        t.to_csr()
    }

    #[test]
    fn residual_is_exact_under_cancellation() {
        // fl(1/3) = 1/3 - 2^-54 / 3, so 3 fl(1/3) - 1 = -2^-54 while the
        // rounded product is exactly 1.
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 0, 1.0 / 3.0);
        t.add_triplet(0, 1, -1.0);
        t.add_triplet(1, 1, 1.0);
        let a: CsMat<f64> = t.to_csr();
        let r = residual(&a, &[3.0, 1.0], &[0.0, 1.0]);
        assert_eq!(r, vec![2f64.powi(-54), 0.0]);
    }

    /// 1D Laplacian with Dirichlet ends: eigenvalues `2 - 2cos(kπ/(n+1))`.
    fn laplace(n: usize) -> CsMat<f64> {
        let mut t = TriMat::new((n, n));
        for i in 0..n {
            t.add_triplet(i, i, 2.0);
            if i + 1 < n {
                t.add_triplet(i, i + 1, -1.0);
                t.add_triplet(i + 1, i, -1.0);
            }
        }
        t.to_csr()
    }

    #[test]
    fn identity_in_one_iteration() {
        let f = vec![1.0, -2.0, 3.5];
        let r = solve_spd(&diag(&[1.0, 1.0, 1.0]), &f).unwrap();
        assert_eq!(r.coefficients, f);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn small_diagonal() {
        let r = solve_spd(&diag(&[1.0, 4.0]), &[1.0, 8.0]).unwrap();
        assert_eq!(r.coefficients, vec![1.0, 2.0]);
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut t = TriMat::new((2, 2));
        t.add_triplet(0, 0, 1.0);
        t.add_triplet(0, 1, 2.0);
        t.add_triplet(1, 0, 2.0);
        t.add_triplet(1, 1, 1.0);
        assert!(matches!(solve_spd(&t.to_csr(), &[1.0, -1.0]), Err(Error::NotSpd(_))));
    }

    #[test]
    fn diagonal_condition_numbers() {
        let a = diag(&[1.0, 1e4]);
        assert!((condition_number(&a, ConditionMode::Raw).unwrap() - 1e4).abs() < 1.0);
        assert!((condition_number(&a, ConditionMode::Jacobi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_closed_form() {
        let n = 2500;
        let a = laplace(n);
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        let (min, max) = extreme_eigenvalues(&a).unwrap();
        let emin = 2.0 - 2.0 * h.cos();
        let emax = 2.0 - 2.0 * (n as f64 * h).cos();
        assert!((max - emax).abs() < LANCZOS_TOL * emax);
        assert!((min - emin).abs() < LANCZOS_TOL * emin);
    }

    #[test]
    fn permutation_invariance() {
        let n = 40;
        let a = laplace(n);
        let f: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_spd(&a, &f).unwrap().coefficients;
        let perm: Vec<usize> = (0..n).map(|i| (7 * i + 3) % n).collect();
        let mut t = TriMat::new((n, n));
        for (v, (i, j)) in a.iter() {
            t.add_triplet(perm[i], perm[j], *v);
        }
        let mut fp = vec![0.0; n];
        for i in 0..n {
            fp[perm[i]] = f[i];
        }
        let y = solve_spd(&t.to_csr(), &fp).unwrap().coefficients;
        let scale = norm(&x);
        for i in 0..n {
            assert!((y[perm[i]] - x[i]).abs() < 1e-9 * scale);
        }
    }
}
