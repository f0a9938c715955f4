//! Truncated power series ("jets") in one complex variable.
//!
//! A [`Jet`] of order `K` stores the coefficients `c_0..=c_K` and stands for
//! the class of a power series modulo `u^{K+1}`. Binary operations on jets of
//! different orders return a jet of the smaller order. A [`CoefficientRule`]
//! is the untruncated object: a deterministic generator `l -> η_l` together
//! with a lower bound on its radius of convergence.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Default jet order used by higher modules.
pub const DEFAULT_ORDER: usize = 32;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub(crate) fn is_finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

/// Anything that can hand out power-series coefficients by index.
pub trait CoefficientSource {
    fn coefficient(&self, degree: usize) -> C64;
}

/// Truncated power series `c_0 + c_1 u + ... + c_K u^K`.
#[derive(Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<C64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[order {}](", self.order())?;
        let mut first = true;
        for (l, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)u^{}", c.re, c.im, l)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, ")")
    }
}

impl Jet {
    /// Builds a jet from `c_0..=c_K`.
    ///
    /// Panics if `coeffs` is empty or holds a non-finite value; use
    /// [`Jet::try_new`] for untrusted input.
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self::try_new(coeffs).expect("invalid jet coefficients")
    }

    pub fn try_new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("a jet needs at least one coefficient".into()));
        }
        if let Some(l) = coeffs.iter().position(|c| !is_finite(*c)) {
            return Err(Error::NonFinite(format!("jet coefficient {l} is not finite")));
        }
        Ok(Self { coeffs })
    }

    /// Real coefficients, convenient for tests and configs.
    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![ZERO; order + 1],
        }
    }

    pub fn constant(value: C64, order: usize) -> Self {
        let mut j = Self::zero(order);
        j.coeffs[0] = value;
        j
    }

    /// `coeff * u^degree`, or the zero jet when `degree > order`.
    pub fn monomial(coeff: C64, degree: usize, order: usize) -> Self {
        let mut j = Self::zero(order);
        if degree <= order {
            j.coeffs[degree] = coeff;
        }
        j
    }

    /// The jet of the identity germ `u`.
    pub fn variable(order: usize) -> Self {
        Self::monomial(ONE, 1, order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    /// Coefficient of `u^l`; zero above the order.
    pub fn coeff(&self, l: usize) -> C64 {
        self.coeffs.get(l).copied().unwrap_or(ZERO)
    }

    /// Highest degree with a nonzero coefficient.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| *c != ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    /// Re-reads the jet at another order, treating it as the exact
    /// polynomial it stores: higher orders are zero-padded, lower ones cut.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, ZERO);
        Self { coeffs }
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Substitutes `u -> λu`: coefficient `l` becomes `λ^l c_l`.
    pub fn arg_scale(&self, lambda: C64) -> Self {
        let mut power = ONE;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| {
                let out = c * power;
                power *= lambda;
                out
            })
            .collect();
        Self { coeffs }
    }

    /// Horner evaluation of the stored polynomial.
    pub fn evaluate(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    /// Value and first derivative at `z` in one Horner pass.
    pub fn evaluate_with_derivative(&self, z: C64) -> (C64, C64) {
        let mut value = ZERO;
        let mut deriv = ZERO;
        for c in self.coeffs.iter().rev() {
            deriv = deriv * z + value;
            value = value * z + c;
        }
        (value, deriv)
    }

    /// Formal derivative; the order drops by one (floored at zero).
    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(0);
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, c)| c * l as f64)
            .collect();
        Self { coeffs }
    }

    /// Germ composition `self(inner(u))`; `inner` must vanish at 0.
    pub fn compose(&self, inner: &Jet) -> Result<Jet> {
        if inner.coeffs[0] != ZERO {
            return Err(Error::Domain(format!(
                "inner jet has constant term {}; germ composition needs inner(0) = 0",
                inner.coeffs[0]
            )));
        }
        Ok(self.compose_unchecked(inner))
    }

    /// Composition that allows `inner(0) = c ≠ 0` by re-expanding `self`
    /// about `c`. Only meaningful when `self` is an exact polynomial.
    pub fn compose_recentered(&self, inner: &Jet) -> Jet {
        let shift = inner.coeffs[0];
        let shifted = self.taylor_shift(shift);
        let mut centered = inner.clone();
        centered.coeffs[0] = ZERO;
        shifted.compose_unchecked(&centered)
    }

    fn compose_unchecked(&self, inner: &Jet) -> Jet {
        let order = self.order().min(inner.order());
        let inner = inner.with_order(order);
        let mut acc = Jet::zero(order);
        for c in self.coeffs[..=order].iter().rev() {
            acc = &acc * &inner;
            acc.coeffs[0] += c;
        }
        acc
    }

    /// Coefficients of `p(c + t)` in `t`, same order.
    fn taylor_shift(&self, c: C64) -> Jet {
        let mut coeffs = self.coeffs.clone();
        let n = coeffs.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                let next = coeffs[j + 1];
                coeffs[j] += c * next;
            }
        }
        Jet { coeffs }
    }

    /// Largest coefficient-wise modulus of `self - other` over the common order.
    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        let order = self.order().min(other.order());
        (0..=order)
            .map(|l| (self.coeffs[l] - other.coeffs[l]).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

impl CoefficientSource for Jet {
    fn coefficient(&self, degree: usize) -> C64 {
        self.coeff(degree)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.order().min(rhs.order());
        Jet {
            coeffs: (0..=order).map(|l| self.coeffs[l] + rhs.coeffs[l]).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.order().min(rhs.order());
        Jet {
            coeffs: (0..=order).map(|l| self.coeffs[l] - rhs.coeffs[l]).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let order = self.order().min(rhs.order());
        let mut coeffs = vec![ZERO; order + 1];
        for (i, a) in self.coeffs[..=order].iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in rhs.coeffs[..=order - i].iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Jet { coeffs }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

type Generator = dyn Fn(usize) -> C64 + Send + Sync;

/// A closed-form coefficient generator `l -> η_l` for a holomorphic germ,
/// with a declared lower bound on the radius of convergence.
#[derive(Clone)]
pub struct CoefficientRule {
    generator: Arc<Generator>,
    radius: f64,
    degree: Option<usize>,
    label: String,
}

impl fmt::Debug for CoefficientRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientRule")
            .field("label", &self.label)
            .field("radius", &self.radius)
            .field("degree", &self.degree)
            .finish()
    }
}

impl CoefficientRule {
    /// A rule from an arbitrary generator. `radius` may be `f64::INFINITY`.
    pub fn from_fn<F>(label: impl Into<String>, radius: f64, generator: F) -> Result<Self>
    where
        F: Fn(usize) -> C64 + Send + Sync + 'static,
    {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!(
                "radius of convergence must be positive, got {radius}"
            )));
        }
        Ok(Self {
            generator: Arc::new(generator),
            radius,
            degree: None,
            label: label.into(),
        })
    }

    /// The entire function given by a finite coefficient list.
    pub fn polynomial(coeffs: Vec<C64>) -> Self {
        assert!(
            coeffs.iter().all(|c| is_finite(*c)),
            "polynomial coefficients must be finite"
        );
        let degree = coeffs.iter().rposition(|c| *c != ZERO);
        let label = format!("polynomial of degree {}", degree.map_or(0, |d| d));
        let coeffs = Arc::new(coeffs);
        Self {
            generator: Arc::new(move |l| coeffs.get(l).copied().unwrap_or(ZERO)),
            radius: f64::INFINITY,
            degree: Some(degree.unwrap_or(0)),
            label,
        }
    }

    pub fn polynomial_real(coeffs: &[f64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self::polynomial(vec![ZERO])
    }

    /// `exp(u) - 1`, an entire perturbation vanishing at 0.
    pub fn exp_minus_one() -> Self {
        Self {
            generator: Arc::new(|l| {
                if l == 0 {
                    ZERO
                } else {
                    C64::new((1..=l).fold(1.0, |acc, k| acc / k as f64), 0.0)
                }
            }),
            radius: f64::INFINITY,
            degree: None,
            label: "exp(u) - 1".into(),
        }
    }

    pub fn coefficient(&self, l: usize) -> C64 {
        match self.degree {
            Some(d) if l > d => ZERO,
            _ => (self.generator)(l),
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `Some(d)` when the rule is a polynomial of degree at most `d`.
    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Order-`order` jet at 0.
    pub fn jet(&self, order: usize) -> Jet {
        Jet::new((0..=order).map(|l| self.coefficient(l)).collect())
    }

    /// Sums the series at `z`. Polynomials are evaluated exactly; other rules
    /// are summed until the terms stay below `1e-17` relative for a while.
    pub fn evaluate(&self, z: C64) -> Result<C64> {
        if z.norm() >= self.radius {
            return Err(Error::Domain(format!(
                "|z| = {} outside the declared radius {}",
                z.norm(),
                self.radius
            )));
        }
        if let Some(d) = self.degree {
            return Ok(self.jet(d).evaluate(z));
        }
        const MAX_TERMS: usize = 4096;
        let mut sum = ZERO;
        let mut power = ONE;
        let mut quiet = 0;
        for l in 0..MAX_TERMS {
            let term = self.coefficient(l) * power;
            sum += term;
            if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
                quiet += 1;
                if quiet >= 8 && l > 8 {
                    return Ok(sum);
                }
            } else {
                quiet = 0;
            }
            power *= z;
        }
        if is_finite(sum) {
            Ok(sum)
        } else {
            Err(Error::NonFinite(format!("series {} at {z}", self.label)))
        }
    }
}

impl CoefficientSource for CoefficientRule {
    fn coefficient(&self, degree: usize) -> C64 {
        CoefficientRule::coefficient(self, degree)
    }
}

/// Degrees `0..N` of `h` (strictly below `n`), as a jet of order `n - 1`.
pub fn truncate<S: CoefficientSource + ?Sized>(h: &S, n: usize) -> Jet {
    assert!(n >= 1, "truncation degree must be at least 1");
    Jet::new((0..n).map(|l| h.coefficient(l)).collect())
}

/// `Σ_{l=n}^{k} η_l u^l` as a jet of order `k`.
pub fn remainder<S: CoefficientSource + ?Sized>(h: &S, n: usize, k: usize) -> Jet {
    assert!(n >= 1, "truncation degree must be at least 1");
    assert!(k >= n, "remainder order {k} must be at least the truncation degree {n}");
    Jet::new(
        (0..=k)
            .map(|l| if l < n { ZERO } else { h.coefficient(l) })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn truncate_examples() {
        let h = CoefficientRule::polynomial_real(&[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(truncate(&h, 2), Jet::from_real(&[0.0, 1.0]));
        let sq = CoefficientRule::polynomial_real(&[0.0, 0.0, 1.0]);
        assert!(truncate(&sq, 2).is_zero());
        assert_eq!(truncate(&sq, 3), Jet::from_real(&[0.0, 0.0, 1.0]));
        let jet = Jet::from_real(&[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(truncate(&jet, 2), Jet::from_real(&[0.0, 1.0]));
    }

    #[test]
    fn remainder_examples() {
        let h = CoefficientRule::polynomial_real(&[0.0, 1.0, 0.0, 2.0]);
        assert_eq!(remainder(&h, 2, 3), Jet::from_real(&[0.0, 0.0, 0.0, 2.0]));
        let sq = CoefficientRule::polynomial_real(&[0.0, 0.0, 1.0]);
        assert_eq!(remainder(&sq, 2, 4), Jet::from_real(&[0.0, 0.0, 1.0, 0.0, 0.0]));
        assert!(remainder(&CoefficientRule::zero(), 3, 7).is_zero());
    }

    #[test]
    #[should_panic]
    fn remainder_rejects_short_order() {
        remainder(&CoefficientRule::zero(), 3, 2);
    }

    #[test]
    fn arg_scale_examples() {
        assert_eq!(
            Jet::from_real(&[0.0, 0.0, 1.0]).arg_scale(c(2.0, 0.0)),
            Jet::from_real(&[0.0, 0.0, 4.0])
        );
        let j = Jet::from_real(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(j.arg_scale(ONE), j);
        let k = Jet::from_real(&[1.0, 1.0]).arg_scale(c(0.0, 1.0));
        assert_eq!(k, Jet::new(vec![ONE, c(0.0, 1.0)]));
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(Jet::from_real(&[0.0, 0.0, 1.0]).evaluate(c(1.0, 1.0)), c(0.0, 2.0));
        assert_eq!(Jet::zero(5).evaluate(c(3.0, -1.0)), ZERO);
        assert_eq!(Jet::from_real(&[1.0, 1.0, 1.0]).evaluate(c(2.0, 0.0)), c(7.0, 0.0));
    }

    #[test]
    fn compose_square_with_shifted_identity() {
        // (u + u^2)^2 = u^2 + 2u^3 + u^4, cut at order 3
        let a = Jet::from_real(&[0.0, 0.0, 1.0, 0.0]);
        let b = Jet::from_real(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(a.compose(&b).unwrap(), Jet::from_real(&[0.0, 0.0, 1.0, 2.0]));
    }

    #[test]
    fn compose_requires_vanishing_inner() {
        let a = Jet::from_real(&[0.0, 1.0]);
        let b = Jet::from_real(&[1.0, 1.0]);
        assert!(matches!(a.compose(&b), Err(Error::Domain(_))));
        // (1 + u)^2 as a recentered square
        let sq = Jet::from_real(&[0.0, 0.0, 1.0]);
        let b2 = Jet::from_real(&[1.0, 1.0, 0.0]);
        assert_eq!(sq.compose_recentered(&b2), Jet::from_real(&[1.0, 2.0, 1.0]));
    }

    #[test]
    fn mul_and_add_identities() {
        let u = Jet::variable(3);
        assert_eq!(&u * &u, Jet::from_real(&[0.0, 0.0, 1.0, 0.0]));
        let j = Jet::from_real(&[1.0, -2.0, 0.5]);
        assert_eq!(&j + &Jet::zero(2), j);
    }

    #[test]
    fn mixed_orders_take_the_minimum() {
        let a = Jet::from_real(&[1.0, 1.0, 1.0, 1.0]);
        let b = Jet::from_real(&[1.0, 1.0]);
        assert_eq!((&a + &b).order(), 1);
        assert_eq!((&a * &b).order(), 1);
        assert_eq!(a.compose(&Jet::variable(1)).unwrap().order(), 1);
    }

    #[test]
    fn exp_rule_sums_to_exp() {
        let rule = CoefficientRule::exp_minus_one();
        let z = c(0.3, -1.2);
        let got = rule.evaluate(z).unwrap();
        assert!((got - (z.exp() - ONE)).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_finite_and_bad_radius() {
        assert!(Jet::try_new(vec![c(f64::NAN, 0.0)]).is_err());
        assert!(Jet::try_new(vec![]).is_err());
        assert!(CoefficientRule::from_fn("bad", 0.0, |_| ZERO).is_err());
        let geo = CoefficientRule::from_fn("geometric", 1.0, |_| ONE).unwrap();
        assert!(geo.evaluate(c(1.5, 0.0)).is_err());
        assert!((geo.evaluate(c(0.5, 0.0)).unwrap() - c(2.0, 0.0)).norm() < 1e-12);
    }

    fn complex() -> impl Strategy<Value = C64> {
        (-2.0f64..2.0, -2.0f64..2.0).prop_map(|(re, im)| C64::new(re, im))
    }

    fn jet(order: usize) -> impl Strategy<Value = Jet> {
        prop::collection::vec(complex(), order + 1).prop_map(Jet::new)
    }

    fn close(a: &Jet, b: &Jet, rel: f64) -> bool {
        let scale = a.max_abs_coeff().max(b.max_abs_coeff()).max(1.0);
        a.max_abs_diff(b) <= rel * scale
    }

    proptest! {
        #[test]
        fn ring_axioms(a in jet(8), b in jet(8), c in jet(8)) {
            prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c)), 1e-12));
            prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
            prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), 1e-12));
            prop_assert!(close(&(&a + &b), &(&b + &a), 1e-12));
            prop_assert!(close(&(&a * &b), &(&b * &a), 1e-12));
        }

        #[test]
        fn truncate_and_remainder_partition(
            coeffs in prop::collection::vec(complex(), 1..20),
            n in 1usize..12,
            extra in 0usize..10,
        ) {
            let rule = CoefficientRule::polynomial(coeffs);
            let k = n + extra;
            let sum = &truncate(&rule, n).with_order(k) + &remainder(&rule, n, k);
            prop_assert_eq!(sum, rule.jet(k));
        }

        #[test]
        fn arg_scale_is_multiplicative(a in jet(10), l in complex(), m in complex()) {
            let twice = a.arg_scale(l).arg_scale(m);
            prop_assert!(close(&twice, &a.arg_scale(l * m), 1e-12));
        }

        #[test]
        fn evaluate_commutes_with_compose(
            a in prop::collection::vec(complex(), 1..4),
            b in prop::collection::vec(complex(), 1..4),
            z in complex(),
        ) {
            // order 9 holds deg(a)*deg(b) <= 9 in full
            let a = Jet::new(a).with_order(9);
            let mut b = Jet::new(b).with_order(9);
            let mut coeffs = b.clone().into_coeffs();
            coeffs[0] = ZERO;
            b = Jet::new(coeffs);
            let z = z * 0.5;
            let lhs = a.compose(&b).unwrap().evaluate(z);
            let rhs = a.evaluate(b.evaluate(z));
            prop_assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
        }
    }
}
