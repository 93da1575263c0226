//! Univariate spline spaces on `[0, 1]` with uniform inner knots.
//!
//! A space `S^{p,r}_h` has degree `p`, `C^r` smoothness at each of its `k`
//! equally spaced inner knots and mesh size `h = 1/(k+1)`. Besides
//! Cox–de Boor evaluation this module provides the conversions the smooth
//! multi-patch construction needs: expressing a function that is known to
//! lie in a space by its B-spline coefficients (collocation at the Greville
//! abscissae), polynomial–spline products, and the `M_0, M_1, M_2` trace
//! functions whose endpoint derivatives form the identity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute threshold below which polynomial coefficients count as zero.
pub const POLY_ZERO: f64 = 1e-14;

/// Threshold of the zero-pattern checks on converted coefficients.
pub const ZERO_PATTERN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SplineSpace1D {
    p: usize,
    r: usize,
    k: usize,
    h: f64,
    knots: Vec<f64>,
    dim: usize,
}

/// Builds a space usable by the main construction: `p >= 5` and, when there
/// are inner knots, `2 <= r <= p - 3`.
pub fn make_space(p: usize, r: usize, k: usize) -> Result<SplineSpace1D> {
    if p < 5 {
        return Err(Error::InvalidParameter(format!("degree p = {p} must be at least 5")));
    }
    if k >= 1 && !(2..=p - 3).contains(&r) {
        return Err(Error::InvalidParameter(format!(
            "regularity r = {r} must satisfy 2 <= r <= p - 3 = {}",
            p - 3
        )));
    }
    SplineSpace1D::new(p, r, k)
}

impl SplineSpace1D {
    /// General constructor; only requires the inner-knot multiplicity `p - r`
    /// to be at least one. Auxiliary spaces of lower degree (for instance
    /// `S^{p-2, r}`) are built with this.
    pub fn new(p: usize, r: usize, k: usize) -> Result<Self> {
        if k >= 1 && r >= p {
            return Err(Error::InvalidParameter(format!(
                "regularity r = {r} must be below the degree p = {p}"
            )));
        }
        let mult = if k == 0 { 0 } else { p - r };
        let h = 1.0 / (k + 1) as f64;
        let mut knots = Vec::with_capacity(2 * (p + 1) + k * mult);
        knots.extend(std::iter::repeat_n(0.0, p + 1));
        for j in 1..=k {
            let tau = j as f64 / (k + 1) as f64;
            knots.extend(std::iter::repeat_n(tau, mult));
        }
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        let dim = p + k * mult + 1;
        Ok(Self { p, r, k, h, knots, dim })
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn regularity(&self) -> usize {
        self.r
    }

    pub fn inner_knot_count(&self) -> usize {
        self.k
    }

    pub fn mesh_size(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Knot spans `[jh, (j+1)h]`, i.e. the elements of the space.
    pub fn elements(&self) -> Vec<(f64, f64)> {
        let n = self.k + 1;
        (0..n)
            .map(|j| (j as f64 / n as f64, (j + 1) as f64 / n as f64))
            .collect()
    }

    /// Whether every function of `other` also lies in `self`.
    pub fn contains(&self, other: &SplineSpace1D) -> bool {
        if other.p > self.p {
            return false;
        }
        if other.k == 0 {
            return true;
        }
        if (self.k + 1) % (other.k + 1) != 0 {
            return false;
        }
        // A knot of multiplicity m in `other` means C^{p_o - m}; degree
        // elevation keeps that smoothness, so we need r_self <= r_other.
        self.r <= other.r
    }

    /// Index `mu` with `t_mu <= xi < t_{mu+1}`; `xi = 1` maps to the last span.
    pub fn find_span(&self, xi: f64) -> usize {
        let last = self.dim - 1;
        if xi >= self.knots[last + 1] {
            return last;
        }
        let (mut lo, mut hi) = (self.p, last + 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if xi < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Nonzero B-splines and their derivatives at `xi`.
    ///
    /// Returns the index of the first nonzero function and a table
    /// `ders[d][i]` of the `d`-th derivative of `N_{first+i}`.
    pub fn eval_local(&self, xi: f64, max_deriv: usize) -> (usize, Vec<Vec<f64>>) {
        let span = self.find_span(xi);
        (span - self.p, ders_basis_funs(span, xi, self.p, max_deriv, &self.knots))
    }

    /// Dense table of `N_i^{(d)}(xi)` for all `i` and `0 <= d <= max_deriv`.
    pub fn eval_all(&self, xi: f64, max_deriv: usize) -> Result<Vec<Vec<f64>>> {
        check_unit(xi)?;
        if max_deriv > self.p {
            return Err(Error::InvalidParameter(format!(
                "derivative order {max_deriv} exceeds the degree {}",
                self.p
            )));
        }
        let (first, local) = self.eval_local(xi, max_deriv);
        let mut out = vec![vec![0.0; self.dim]; max_deriv + 1];
        for (row, loc) in out.iter_mut().zip(&local) {
            row[first..first + loc.len()].copy_from_slice(loc);
        }
        Ok(out)
    }

    /// Greville abscissae, nudged apart by `h * 1e-6` if two coincide.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.p.max(1) as f64;
        let mut g: Vec<f64> = (0..self.dim)
            .map(|i| {
                if self.p == 0 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..=i + self.p].iter().sum::<f64>() / p
                }
            })
            .collect();
        let nudge = self.h * 1e-6;
        for i in 1..g.len() {
            if g[i] <= g[i - 1] {
                g[i] = (g[i - 1] + nudge).min(1.0);
            }
        }
        g
    }

    /// Values `N_i^{(d)}(0)` for `i, d <= 2`, i.e. the map from the first
    /// three coefficients to the first three endpoint derivatives.
    pub fn endpoint_derivatives(&self) -> [[f64; 3]; 3] {
        let (first, ders) = self.eval_local(0.0, 2.min(self.p));
        debug_assert_eq!(first, 0);
        let mut t = [[0.0; 3]; 3];
        for (d, row) in ders.iter().enumerate() {
            for (i, v) in row.iter().take(3).enumerate() {
                t[d][i] = *v;
            }
        }
        t
    }

    pub fn collocation(&self) -> Result<Collocation> {
        Collocation::new(self.clone())
    }
}

fn check_unit(xi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&xi) {
        Ok(())
    } else {
        Err(Error::OutOfDomain(xi))
    }
}

/// Cox–de Boor recursion for all nonzero basis functions and derivatives on
/// one span (The NURBS Book, A2.3).
pub(crate) fn ders_basis_funs(
    span: usize,
    xi: f64,
    p: usize,
    n: usize,
    knots: &[f64],
) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = xi - knots[span + 1 - j];
        right[j] = knots[span + j] - xi;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; n + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if (r as isize) - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=n.min(p) {
        for v in ders[k].iter_mut() {
            *v *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// A spline given by its coefficients in a space.
#[derive(Clone, Debug, PartialEq)]
pub struct SplineVector1D {
    pub space: SplineSpace1D,
    pub coeffs: Vec<f64>,
}

impl SplineVector1D {
    pub fn new(space: SplineSpace1D, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for a space of dimension {}",
                coeffs.len(),
                space.dim()
            )));
        }
        Ok(Self { space, coeffs })
    }

    /// The B-spline `N_j` of `space` as a coefficient vector.
    pub fn unit(space: SplineSpace1D, j: usize) -> Self {
        let mut coeffs = vec![0.0; space.dim()];
        coeffs[j] = 1.0;
        Self { space, coeffs }
    }

    /// `deriv`-th derivative at `xi`.
    pub fn eval(&self, xi: f64, deriv: usize) -> f64 {
        if deriv > self.space.p {
            return 0.0;
        }
        let (first, ders) = self.space.eval_local(xi, deriv);
        ders[deriv]
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.coeffs[first + i])
            .sum()
    }
}

/// A polynomial in the monomial basis on `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial1D {
    pub coeffs: Vec<f64>,
}

impl Polynomial1D {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn linear(c0: f64, c1: f64) -> Self {
        Self { coeffs: vec![c0, c1] }
    }

    /// Degree after dropping trailing coefficients below [`POLY_ZERO`];
    /// the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.abs() >= POLY_ZERO)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::constant(0.0);
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| i as f64 * c)
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Self {
            coeffs: (0..n)
                .map(|i| get(&self.coeffs, i) + get(&other.coeffs, i))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::constant(0.0);
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self { coeffs: out }
    }

    /// `∫_0^1 p(x) dx`, exact.
    pub fn integrate_unit(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / (i + 1) as f64)
            .sum()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// Collocation at the Greville abscissae of a space, factorized once.
#[derive(Clone, Debug)]
pub struct Collocation {
    space: SplineSpace1D,
    points: Vec<f64>,
    check_points: Vec<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    check_matrix: DMatrix<f64>,
}

impl Collocation {
    pub fn new(space: SplineSpace1D) -> Result<Self> {
        let points = space.greville();
        let n = space.dim();
        let mut a = DMatrix::zeros(n, n);
        for (row, &x) in points.iter().enumerate() {
            let (first, ders) = space.eval_local(x, 0);
            for (i, v) in ders[0].iter().enumerate() {
                a[(row, first + i)] = *v;
            }
        }
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::RepresentationFailure(
                "singular collocation matrix".into(),
            ));
        }
        // Midpoints between consecutive collocation points catch functions
        // that are not members of the space.
        let check_points: Vec<f64> = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut check_matrix = DMatrix::zeros(check_points.len(), n);
        for (row, &x) in check_points.iter().enumerate() {
            let (first, ders) = space.eval_local(x, 0);
            for (i, v) in ders[0].iter().enumerate() {
                check_matrix[(row, first + i)] = *v;
            }
        }
        Ok(Self {
            space,
            points,
            check_points,
            lu,
            check_matrix,
        })
    }

    pub fn space(&self) -> &SplineSpace1D {
        &self.space
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Coefficients of `f`, which must be a member of the space.
    pub fn fit(&self, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let values: Vec<f64> = self.points.iter().map(|&x| f(x)).collect();
        let check: Vec<f64> = self.check_points.iter().map(|&x| f(x)).collect();
        self.fit_values(&values, &check)
    }

    /// Coefficients from values at [`Self::points`]; `check` holds values at
    /// the midpoints between them and is used to reject non-members.
    pub fn fit_values(&self, values: &[f64], check: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_column_slice(values);
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::RepresentationFailure("singular collocation matrix".into()))?;
        let scale = values
            .iter()
            .chain(check)
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let back = self.check_matrix.clone() * &sol;
        let miss = back
            .iter()
            .zip(check)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if miss > 1e-8 * scale {
            return Err(Error::RepresentationFailure(format!(
                "function is not a member of S^{{{},{}}} (mismatch {miss:e})",
                self.space.p, self.space.r
            )));
        }
        Ok(sol.iter().copied().collect())
    }
}

/// Coefficients of `f` in `target`; `f` has to be a member of `target`.
pub fn represent(target: &SplineSpace1D, f: impl Fn(f64) -> f64) -> Result<SplineVector1D> {
    let coeffs = Collocation::new(target.clone())?.fit(f)?;
    Ok(SplineVector1D {
        space: target.clone(),
        coeffs,
    })
}

/// Coefficients of the product `q * f` in `target`.
pub fn multiply_embed(
    f: &SplineVector1D,
    q: &Polynomial1D,
    target: &SplineSpace1D,
) -> Result<SplineVector1D> {
    let delta = q.degree();
    if f.space.p + delta > target.p {
        return Err(Error::InvalidParameter(format!(
            "product degree {} + {} exceeds target degree {}",
            f.space.p, delta, target.p
        )));
    }
    if f.space.k > 0 && (f.space.r < target.r || (target.k + 1) % (f.space.k + 1) != 0) {
        return Err(Error::InvalidParameter(
            "factor space is not nested in the target space".into(),
        ));
    }
    represent(target, |x| q.eval(x) * f.eval(x, 0))
}

/// `M_0 = N_0 + N_1 + N_2`, `M_1 = h/p (N_1 + 2 N_2)`, `M_2 = h^2/(p(p-1)) N_2`.
pub fn m_functions(space: &SplineSpace1D) -> [SplineVector1D; 3] {
    let w = m_weights(space);
    w.map(|row| {
        let mut coeffs = vec![0.0; space.dim()];
        coeffs[..3].copy_from_slice(&row);
        SplineVector1D {
            space: space.clone(),
            coeffs,
        }
    })
}

/// The first three coefficients of `M_0, M_1, M_2` (all others vanish).
pub fn m_weights(space: &SplineSpace1D) -> [[f64; 3]; 3] {
    let p = space.p as f64;
    let h = space.h;
    [
        [1.0, 1.0, 1.0],
        [0.0, h / p, 2.0 * h / p],
        [0.0, 0.0, h * h / (p * (p - 1.0))],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(make_space(5, 2, 1).unwrap().dim(), 9);
        let s = make_space(5, 2, 5).unwrap();
        assert_eq!(s.dim(), 21);
        for j in 1..=5 {
            let tau = j as f64 / 6.0;
            assert_eq!(s.knots().iter().filter(|&&t| t == tau).count(), 3);
        }
        assert!(matches!(make_space(5, 4, 2), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_space(4, 1, 2), Err(Error::InvalidParameter(_))));
        assert_eq!(make_space(6, 9, 0).unwrap().dim(), 7);
    }

    #[test]
    fn endpoint_values() {
        let s = make_space(5, 2, 5).unwrap();
        let t = s.eval_all(0.0, 1).unwrap();
        assert_eq!(t[0][0], 1.0);
        assert!(t[0][1..].iter().all(|v| *v == 0.0));
        // N_1'(0) = p / (t_{p+1} - t_1) = p / h
        assert!((t[1][1] - 30.0).abs() < 1e-12);
        assert_eq!(t[1][2], 0.0);
        assert!(matches!(s.eval_all(1.5, 0), Err(Error::OutOfDomain(_))));
        let end = s.eval_all(1.0, 0).unwrap();
        assert_eq!(end[0][20], 1.0);
    }

    #[test]
    fn represent_identity_cases() {
        let s = make_space(5, 2, 3).unwrap();
        let ones = represent(&s, |_| 1.0).unwrap();
        assert!(ones.coeffs.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let unit = SplineVector1D::unit(s.clone(), 4);
        let back = represent(&s, |x| unit.eval(x, 0)).unwrap();
        for (i, c) in back.coeffs.iter().enumerate() {
            let e = if i == 4 { 1.0 } else { 0.0 };
            assert!((c - e).abs() < 1e-11);
        }
    }

    #[test]
    fn represent_rejects_non_members() {
        let s = make_space(5, 2, 3).unwrap();
        assert!(matches!(
            represent(&s, |x| (10.0 * x).sin()),
            Err(Error::RepresentationFailure(_))
        ));
    }

    #[test]
    fn multiply_embed_degree_overflow() {
        let s4 = SplineSpace1D::new(4, 2, 3).unwrap();
        let s5 = make_space(5, 2, 3).unwrap();
        let f = represent(&s4, |_| 1.0).unwrap();
        let q = Polynomial1D::new(vec![0.0, 0.0, 1.0]);
        assert!(matches!(
            multiply_embed(&f, &q, &s5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn m_function_endpoint_values() {
        for k in [0, 3, 5] {
            let s = SplineSpace1D::new(5, 2, k).unwrap();
            let m = m_functions(&s);
            assert_eq!(m[0].eval(0.0, 0), 1.0);
            assert_eq!(m[1].eval(0.0, 0), 0.0);
            assert_eq!(m[2].eval(0.0, 0), 0.0);
        }
    }

    #[test]
    fn polynomial_degree_strips_tiny_tail() {
        assert_eq!(Polynomial1D::new(vec![1.0, 2.0, 1e-16]).degree(), 1);
        assert_eq!(Polynomial1D::new(vec![0.0]).degree(), 0);
        let p = Polynomial1D::linear(1.0, 2.0).mul(&Polynomial1D::linear(-1.0, 1.0));
        assert_eq!(p.coeffs, vec![-1.0, -1.0, 2.0]);
        assert!((p.integrate_unit() - (-1.0 - 0.5 + 2.0 / 3.0)).abs() < 1e-15);
    }
}
