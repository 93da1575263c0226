//! Bivariate polynomials for manufactured solutions and right-hand sides.
//!
//! The built-in solutions are cubes of products of affine factors. They are
//! expanded in exact rational arithmetic, the sixth-order operator is applied
//! exactly as well, and only the final coefficients are rounded to `f64`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients smaller than this are never stored.
const COEFF_FLOOR: f64 = 1e-300;

/// `Σ c_{ij} x1^i x2^j` with sparse exponent storage.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial2D {
    terms: BTreeMap<(u32, u32), f64>,
}

impl Polynomial2D {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = ((u32, u32), f64)>) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn monomial(i: u32, j: u32, c: f64) -> Self {
        Self::from_terms([((i, j), c)])
    }

    fn add_term(&mut self, e: (u32, u32), c: f64) {
        let v = self.terms.entry(e).or_insert(0.0);
        *v += c;
        if v.abs() < COEFF_FLOOR {
            self.terms.remove(&e);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        // Horner in x2 for each power of x1.
        let deg1 = self.terms.keys().map(|e| e.0).max().unwrap_or(0) as usize;
        let mut rows = vec![Vec::<(u32, f64)>::new(); deg1 + 1];
        for (&(i, j), &c) in &self.terms {
            rows[i as usize].push((j, c));
        }
        let mut acc = 0.0;
        for row in rows.iter().rev() {
            let mut inner = 0.0;
            let mut last = row.last().map(|t| t.0).unwrap_or(0);
            for &(j, c) in row.iter().rev() {
                inner *= x2.powi((last - j) as i32);
                inner += c;
                last = j;
            }
            inner *= x2.powi(last as i32);
            acc = acc * x1 + inner;
        }
        acc
    }

    /// Exact partial derivative; `axis` is 1 or 2.
    pub fn differentiate(&self, axis: u8) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            match axis {
                1 if i > 0 => out.add_term((i - 1, j), c * i as f64),
                2 if j > 0 => out.add_term((i, j - 1), c * j as f64),
                _ => {}
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&e, &c) in &other.terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(&e, &c)| (e, c * s)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(i, j), &a) in &self.terms {
            for (&(k, l), &b) in &other.terms {
                out.add_term((i + k, j + l), a * b);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        self.differentiate(1)
            .differentiate(1)
            .add(&self.differentiate(2).differentiate(2))
    }

    /// `u(x1 - a1, x2 - a2)`.
    pub fn translate(&self, a1: f64, a2: f64) -> Self {
        let x1 = Self::from_terms([((1, 0), 1.0), ((0, 0), -a1)]);
        let x2 = Self::from_terms([((0, 1), 1.0), ((0, 0), -a2)]);
        let mut out = Self::zero();
        for (&(i, j), &c) in &self.terms {
            let mut t = Self::monomial(0, 0, c);
            for _ in 0..i {
                t = t.mul(&x1);
            }
            for _ in 0..j {
                t = t.mul(&x2);
            }
            out = out.add(&t);
        }
        out
    }

    /// All partial derivatives of order `n`, indexed by the number of
    /// `x2`-derivatives: entry `b` is `∂^{n-b}_1 ∂^b_2 u`.
    pub fn derivatives_of_order(&self, n: u32) -> Vec<Polynomial2D> {
        (0..=n)
            .map(|b| {
                let mut d = self.clone();
                for _ in 0..n - b {
                    d = d.differentiate(1);
                }
                for _ in 0..b {
                    d = d.differentiate(2);
                }
                d
            })
            .collect()
    }
}

/// `f = -Δ³u`.
pub fn triharmonic_rhs(u: &Polynomial2D) -> Polynomial2D {
    u.laplacian().laplacian().laplacian().scale(-1.0)
}

/// Identifier of a built-in manufactured solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolutionId {
    /// Triangle with sides on `x2 = 0`, `x2 = 12 x1/13`, `x2 = (120 - 12 x1)/7`.
    A,
    /// Pentagon.
    B,
    /// Hexagon.
    C,
    /// Quadrilateral of the five-patch example.
    D,
    /// Rectangle `[0, 2] × [0, 1]` covered by two unit squares, times `1 + x1 + x2`.
    Rect,
}

impl std::str::FromStr for SolutionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Self::A),
            "b" => Ok(Self::B),
            "c" => Ok(Self::C),
            "d" => Ok(Self::D),
            "rect" => Ok(Self::Rect),
            other => Err(Error::UnknownSolution(other.to_string())),
        }
    }
}

impl std::fmt::Display for SolutionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::A => "a",
            Self::B => "b",
            Self::C => "c",
            Self::D => "d",
            Self::Rect => "rect",
        };
        f.write_str(s)
    }
}

/// Rational affine form `c0 + c1 x1 + c2 x2`.
#[derive(Clone, Debug)]
pub struct AffineFactor {
    pub c0: BigRational,
    pub c1: BigRational,
    pub c2: BigRational,
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl AffineFactor {
    /// `(n0/d0) + (n1/d1) x1 + (n2/d2) x2`.
    pub fn new(c0: (i64, i64), c1: (i64, i64), c2: (i64, i64)) -> Self {
        Self {
            c0: q(c0.0, c0.1),
            c1: q(c1.0, c1.1),
            c2: q(c2.0, c2.1),
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.c0.to_f64().unwrap_or(0.0)
            + self.c1.to_f64().unwrap_or(0.0) * x1
            + self.c2.to_f64().unwrap_or(0.0) * x2
    }
}

/// Exact rational polynomial used while expanding closed forms.
#[derive(Clone, Debug, Default)]
struct RationalPolynomial {
    terms: BTreeMap<(u32, u32), BigRational>,
}

impl RationalPolynomial {
    fn constant(c: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((0, 0), c);
        }
        Self { terms }
    }

    fn affine(f: &AffineFactor) -> Self {
        let mut terms = BTreeMap::new();
        for (e, c) in [((0, 0), &f.c0), ((1, 0), &f.c1), ((0, 1), &f.c2)] {
            if !c.is_zero() {
                terms.insert(e, c.clone());
            }
        }
        Self { terms }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
        for (&(i, j), a) in &self.terms {
            for (&(k, l), b) in &other.terms {
                let e = terms.entry((i + k, j + l)).or_insert_with(BigRational::zero);
                *e += a * b;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Self { terms }
    }

    fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (&e, c) in &other.terms {
            *terms.entry(e).or_insert_with(BigRational::zero) += c;
        }
        terms.retain(|_, c| !c.is_zero());
        Self { terms }
    }

    fn differentiate(&self, axis: u8) -> Self {
        let mut terms = BTreeMap::new();
        for (&(i, j), c) in &self.terms {
            match axis {
                1 if i > 0 => {
                    terms.insert((i - 1, j), c * BigRational::from_integer(BigInt::from(i)));
                }
                2 if j > 0 => {
                    terms.insert((i, j - 1), c * BigRational::from_integer(BigInt::from(j)));
                }
                _ => {}
            }
        }
        Self { terms }
    }

    fn laplacian(&self) -> Self {
        self.differentiate(1)
            .differentiate(1)
            .add(&self.differentiate(2).differentiate(2))
    }

    fn to_f64(&self) -> Polynomial2D {
        Polynomial2D::from_terms(
            self.terms
                .iter()
                .map(|(&e, c)| (e, c.to_f64().unwrap_or(f64::NAN))),
        )
    }
}

/// `(scale · Π factors)^power · Π cofactors`, expanded exactly.
#[derive(Clone, Debug)]
pub struct FactoredPolynomial {
    pub scale: BigRational,
    pub factors: Vec<AffineFactor>,
    pub power: u32,
    /// Unpowered factors, nonvanishing on the domain.
    pub cofactors: Vec<AffineFactor>,
}

impl FactoredPolynomial {
    fn expand_exact(&self) -> RationalPolynomial {
        let mut base = RationalPolynomial::constant(self.scale.clone());
        for f in &self.factors {
            base = base.mul(&RationalPolynomial::affine(f));
        }
        let mut out = RationalPolynomial::constant(BigRational::one());
        for _ in 0..self.power {
            out = out.mul(&base);
        }
        for f in &self.cofactors {
            out = out.mul(&RationalPolynomial::affine(f));
        }
        out
    }

    pub fn expand(&self) -> Polynomial2D {
        self.expand_exact().to_f64()
    }

    /// `-Δ³` of the expansion, computed before rounding.
    pub fn triharmonic_rhs(&self) -> Polynomial2D {
        let u = self.expand_exact();
        let mut l = u.laplacian().laplacian().laplacian();
        for c in l.terms.values_mut() {
            *c = -c.clone();
        }
        l.to_f64()
    }

    /// Direct evaluation of the unexpanded form.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let s = self.scale.to_f64().unwrap_or(0.0);
        let base = self.factors.iter().fold(s, |acc, f| acc * f.eval(x1, x2));
        let co = self.cofactors.iter().fold(1.0, |acc, f| acc * f.eval(x1, x2));
        base.powi(self.power as i32) * co
    }
}

/// Closed form of a built-in solution.
pub fn builtin_factored(id: SolutionId) -> FactoredPolynomial {
    use AffineFactor as F;
    let x2 = F::new((0, 1), (0, 1), (1, 1));
    let (scale, factors) = match id {
        SolutionId::A => (
            q(1, 20),
            vec![
                x2,
                F::new((0, 1), (12, 13), (-1, 1)),
                F::new((120, 7), (-12, 7), (-1, 1)),
            ],
        ),
        SolutionId::B => (
            q(1, 20000),
            vec![
                F::new((121, 15), (8, 15), (-1, 1)),
                F::new((0, 1), (7, 2), (1, 1)),
                x2,
                F::new((52, 3), (-13, 6), (1, 1)),
                F::new((31, 2), (-9, 11), (-1, 1)),
            ],
        ),
        SolutionId::C => (
            q(1, 200000),
            vec![
                F::new((55, 2), (-5, 2), (-1, 1)),
                F::new((1799, 160), (-7, 64), (-1, 1)),
                F::new((652, 61), (78, 61), (-1, 1)),
                F::new((0, 1), (-18, 11), (-1, 1)),
                x2,
                F::new((-10, 1), (5, 3), (-1, 1)),
            ],
        ),
        SolutionId::D => (
            q(1, 20000),
            vec![
                x2,
                F::new((405, 8), (-27, 8), (-1, 1)),
                F::new((425, 38), (4, 19), (-1, 1)),
                F::new((0, 1), (23, 3), (-1, 1)),
            ],
        ),
        SolutionId::Rect => (
            q(1, 1),
            vec![
                F::new((0, 1), (1, 1), (0, 1)),
                F::new((2, 1), (-1, 1), (0, 1)),
                x2,
                F::new((1, 1), (0, 1), (-1, 1)),
            ],
        ),
    };
    // The cubed boundary factors alone have degree 6 per variable and lie in
    // the p = 6 space on axis-aligned squares; `1 + x1 + x2` lifts it to 7.
    let cofactors = match id {
        SolutionId::Rect => vec![F::new((1, 1), (1, 1), (1, 1))],
        _ => Vec::new(),
    };
    FactoredPolynomial {
        scale,
        factors,
        power: 3,
        cofactors,
    }
}

pub fn builtin_solution(id: SolutionId) -> Polynomial2D {
    builtin_factored(id).expand()
}

/// Parses `id` and returns the solution.
pub fn builtin_solution_by_name(id: &str) -> Result<Polynomial2D> {
    Ok(builtin_solution(id.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiate_basics() {
        let p = Polynomial2D::monomial(2, 0, 1.0);
        assert_eq!(p.differentiate(1), Polynomial2D::monomial(1, 0, 2.0));
        assert!(Polynomial2D::monomial(0, 0, 3.0).differentiate(1).is_zero());
        assert!(p.differentiate(2).is_zero());
    }

    #[test]
    fn triharmonic_of_simple_polynomials() {
        let f = triharmonic_rhs(&Polynomial2D::monomial(6, 0, 1.0));
        assert_eq!(f, Polynomial2D::monomial(0, 0, -720.0));
        let low = Polynomial2D::from_terms([((5, 0), 1.0), ((2, 3), -4.0), ((0, 1), 2.0)]);
        assert!(triharmonic_rhs(&low).is_zero());
    }

    #[test]
    fn builtin_a_vanishes_on_boundary_lines() {
        let u = builtin_solution(SolutionId::A);
        for t in [0.3, 2.0, 7.5] {
            assert_eq!(u.eval(t, 0.0), 0.0);
            assert!(u.eval(t, 12.0 * t / 13.0).abs() < 1e-10);
        }
        let direct = builtin_factored(SolutionId::A).eval(5.0, 1.0);
        assert!((u.eval(5.0, 1.0) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        assert_eq!(u.total_degree(), 9);
        assert_eq!(builtin_solution(SolutionId::C).total_degree(), 18);
    }

    #[test]
    fn exact_rhs_matches_float_rhs() {
        let fp = builtin_factored(SolutionId::A);
        let exact = fp.triharmonic_rhs();
        let float = triharmonic_rhs(&fp.expand());
        for (x, y) in [(1.0, 0.5), (5.0, 2.0), (8.0, 1.0)] {
            let a = exact.eval(x, y);
            assert!((a - float.eval(x, y)).abs() < 1e-8 * a.abs().max(1.0));
        }
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(
            builtin_solution_by_name("z"),
            Err(Error::UnknownSolution(_))
        ));
    }
}
