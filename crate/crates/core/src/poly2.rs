//! Polynomials in two complex variables and polynomial self-maps of `C^2`.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::series::{C64, ONE, ZERO};

/// Point of `C^2`.
pub type Point2 = [C64; 2];

/// Sparse polynomial `Σ c_{ij} z^i w^j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BiPoly {
    terms: BTreeMap<(u32, u32), C64>,
}

impl BiPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::monomial(c, 0, 0)
    }

    pub fn monomial(c: C64, i: u32, j: u32) -> Self {
        let mut p = Self::zero();
        p.add_term(c, i, j);
        p
    }

    pub fn z() -> Self {
        Self::monomial(ONE, 1, 0)
    }

    pub fn w() -> Self {
        Self::monomial(ONE, 0, 1)
    }

    /// From `(coeff, i, j)` triples; repeated exponents are summed.
    pub fn from_terms(terms: impl IntoIterator<Item = (C64, u32, u32)>) -> Self {
        let mut p = Self::zero();
        for (c, i, j) in terms {
            p.add_term(c, i, j);
        }
        p
    }

    pub fn add_term(&mut self, c: C64, i: u32, j: u32) {
        if c == ZERO {
            return;
        }
        let slot = self.terms.entry((i, j)).or_insert(ZERO);
        *slot += c;
        if *slot == ZERO {
            self.terms.remove(&(i, j));
        }
    }

    pub fn coeff(&self, i: u32, j: u32) -> C64 {
        self.terms.get(&(i, j)).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), C64)> + '_ {
        self.terms.iter().map(|(k, v)| (*k, *v))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|(i, j)| i + j).max().unwrap_or(0)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_terms(self.terms().map(|((i, j), v)| (v * c, i, j)))
    }

    pub fn eval(&self, z: C64, w: C64) -> C64 {
        self.terms()
            .map(|((i, j), c)| c * z.powu(i) * w.powu(j))
            .sum()
    }

    pub fn d_z(&self) -> Self {
        Self::from_terms(
            self.terms()
                .filter(|((i, _), _)| *i > 0)
                .map(|((i, j), c)| (c * i as f64, i - 1, j)),
        )
    }

    pub fn d_w(&self) -> Self {
        Self::from_terms(
            self.terms()
                .filter(|((_, j), _)| *j > 0)
                .map(|((i, j), c)| (c * j as f64, i, j - 1)),
        )
    }

    /// Drops terms of total degree above `degree`.
    pub fn truncated(&self, degree: u32) -> Self {
        Self::from_terms(self.terms().filter(|((i, j), _)| i + j <= degree).map(|((i, j), c)| (c, i, j)))
    }

    /// Terms of total degree exactly `degree`.
    pub fn homogeneous_part(&self, degree: u32) -> Self {
        Self::from_terms(self.terms().filter(|((i, j), _)| i + j == degree).map(|((i, j), c)| (c, i, j)))
    }

    /// Lowest total degree present, or `None` for zero.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.keys().map(|(i, j)| i + j).min()
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::constant(ONE), |acc, _| &acc * self)
    }

    /// `self(p(z,w), q(z,w))`.
    pub fn compose(&self, p: &BiPoly, q: &BiPoly) -> BiPoly {
        self.compose_truncated(p, q, None)
    }

    /// Composition keeping total degrees up to `degree` when given.
    pub fn compose_truncated(&self, p: &BiPoly, q: &BiPoly, degree: Option<u32>) -> BiPoly {
        let cut = |x: BiPoly| match degree {
            Some(d) => x.truncated(d),
            None => x,
        };
        let max_i = self.terms.keys().map(|k| k.0).max().unwrap_or(0);
        let max_j = self.terms.keys().map(|k| k.1).max().unwrap_or(0);
        let mut p_pows = vec![BiPoly::constant(ONE)];
        for _ in 0..max_i {
            let next = cut(p_pows.last().unwrap() * p);
            p_pows.push(next);
        }
        let mut q_pows = vec![BiPoly::constant(ONE)];
        for _ in 0..max_j {
            let next = cut(q_pows.last().unwrap() * q);
            q_pows.push(next);
        }
        let mut out = BiPoly::zero();
        for ((i, j), c) in self.terms() {
            let term = cut(&p_pows[i as usize] * &q_pows[j as usize]).scale(c);
            out = &out + &term;
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for ((i, j), c) in rhs.terms() {
            out.add_term(c, i, j);
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: &BiPoly) -> BiPoly {
        self + &(-rhs)
    }
}

impl Neg for &BiPoly {
    type Output = BiPoly;
    fn neg(self) -> BiPoly {
        self.scale(-ONE)
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for ((i, j), a) in self.terms() {
            for ((k, l), b) in rhs.terms() {
                out.add_term(a * b, i + k, j + l);
            }
        }
        out
    }
}

/// Polynomial map `(z, w) ↦ (first(z,w), second(z,w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPair {
    pub first: BiPoly,
    pub second: BiPoly,
}

impl PolyPair {
    pub fn new(first: BiPoly, second: BiPoly) -> Self {
        Self { first, second }
    }

    pub fn identity() -> Self {
        Self::new(BiPoly::z(), BiPoly::w())
    }

    /// `x ↦ M x + b` with `M` row-major.
    pub fn affine(m: [[C64; 2]; 2], b: Point2) -> Self {
        let row = |r: [C64; 2], c: C64| {
            BiPoly::from_terms([(r[0], 1, 0), (r[1], 0, 1), (c, 0, 0)])
        };
        Self::new(row(m[0], b[0]), row(m[1], b[1]))
    }

    pub fn translation(b: Point2) -> Self {
        Self::affine([[ONE, ZERO], [ZERO, ONE]], b)
    }

    pub fn eval(&self, p: Point2) -> Point2 {
        [self.first.eval(p[0], p[1]), self.second.eval(p[0], p[1])]
    }

    /// Row-major Jacobian at `p`.
    pub fn jacobian(&self, p: Point2) -> [[C64; 2]; 2] {
        [
            [self.first.d_z().eval(p[0], p[1]), self.first.d_w().eval(p[0], p[1])],
            [self.second.d_z().eval(p[0], p[1]), self.second.d_w().eval(p[0], p[1])],
        ]
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyPair) -> PolyPair {
        PolyPair::new(
            self.first.compose(&inner.first, &inner.second),
            self.second.compose(&inner.first, &inner.second),
        )
    }

    pub fn compose_truncated(&self, inner: &PolyPair, degree: u32) -> PolyPair {
        PolyPair::new(
            self.first.compose_truncated(&inner.first, &inner.second, Some(degree)),
            self.second.compose_truncated(&inner.first, &inner.second, Some(degree)),
        )
    }

    pub fn truncated(&self, degree: u32) -> PolyPair {
        PolyPair::new(self.first.truncated(degree), self.second.truncated(degree))
    }

    pub fn total_degree(&self) -> u32 {
        self.first.total_degree().max(self.second.total_degree())
    }
}

pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).norm().max((a[1] - b[1]).norm())
}

pub(crate) fn norm(a: Point2) -> f64 {
    a[0].norm().max(a[1].norm())
}

/// Solves `m x = b` for a 2×2 complex system.
pub(crate) fn solve2(m: [[C64; 2]; 2], b: Point2) -> Option<Point2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let scale = m.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max);
    if det.norm() <= 1e-14 * scale.max(1e-300).powi(2) || det.norm() == 0.0 {
        return None;
    }
    Some([
        (b[0] * m[1][1] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn compose_shear_with_its_inverse() {
        let shear = PolyPair::new(BiPoly::z(), &BiPoly::w() + &BiPoly::monomial(ONE, 2, 0));
        let unshear = PolyPair::new(BiPoly::z(), &BiPoly::w() - &BiPoly::monomial(ONE, 2, 0));
        assert_eq!(shear.compose(&unshear), PolyPair::identity());
    }

    #[test]
    fn eval_and_derivatives() {
        let p = BiPoly::from_terms([(re(2.0), 2, 1), (re(-1.0), 0, 3), (re(5.0), 0, 0)]);
        let (z, w) = (C64::new(0.5, 1.0), C64::new(-1.0, 0.25));
        let direct = re(2.0) * z * z * w - w * w * w + re(5.0);
        assert!((p.eval(z, w) - direct).norm() < 1e-14);
        assert!((p.d_z().eval(z, w) - re(4.0) * z * w).norm() < 1e-14);
        assert!((p.d_w().eval(z, w) - (re(2.0) * z * z - re(3.0) * w * w)).norm() < 1e-14);
    }

    #[test]
    fn truncated_composition_keeps_low_degrees() {
        let p = &BiPoly::z() + &BiPoly::monomial(ONE, 1, 1);
        let full = p.pow(3);
        let cut = BiPoly::monomial(ONE, 3, 0).compose_truncated(&p, &BiPoly::w(), Some(4));
        assert_eq!(cut, full.truncated(4));
    }

    #[test]
    fn solve_small_systems() {
        let m = [[re(2.0), re(1.0)], [re(1.0), re(3.0)]];
        let x = solve2(m, [re(3.0), re(5.0)]).unwrap();
        assert!((x[0] - re(0.8)).norm() < 1e-15 && (x[1] - re(1.4)).norm() < 1e-15);
        assert!(solve2([[ZERO, ZERO], [ZERO, ZERO]], [ONE, ONE]).is_none());
    }
}
