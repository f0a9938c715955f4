//! Elementary correspondences with an algebraic perturbation.
//!
//! The perturbation is `h = ĥ + A` with `ĥ` entire and
//! `A(z) = Σ a_j (z - ζ_j)^{λ_j} + c` a finite sum of rational powers with
//! branch points away from the origin. Near 0 the principal branch at `z = 0`
//! continues to a single-valued germ on `|z| < min |ζ_j|`, written as
//! `(-ζ)^λ (1 - z/ζ)^λ` with both factors principal. Correspondences are
//! handled only through this distinguished branch and its validity radius.

use num_rational::Ratio;

use crate::elementary::{ElementaryMap, PolyMap2, RenormPlan, ScanParams, ScanRow};
use crate::error::{Error, Result};
use crate::series::{is_finite, truncate, CoefficientRule, Jet, C64, ONE, ZERO};

/// Tolerance of the fixed-point check `h(0) = 0`.
pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Positive rational exponent in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exponent(Ratio<i64>);

impl Exponent {
    pub fn new(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Domain("exponent with zero denominator".into()));
        }
        let r = Ratio::new(numer, denom);
        if *r.numer() <= 0 {
            return Err(Error::Domain(format!("exponent {r} must be positive")));
        }
        Ok(Self(r))
    }

    pub fn integer(k: i64) -> Result<Self> {
        Self::new(k, 1)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_integer(&self) -> bool {
        self.denom() == 1
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }
}

impl std::str::FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse exponent {s:?}"));
        match s.split_once('/') {
            Some((p, q)) => Self::new(
                p.trim().parse().map_err(|_| bad())?,
                q.trim().parse().map_err(|_| bad())?,
            ),
            None => Self::integer(s.trim().parse().map_err(|_| bad())?),
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `coeff · (z - branch_point)^exponent`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicTerm {
    pub coeff: C64,
    pub branch_point: C64,
    pub exponent: Exponent,
}

impl AlgebraicTerm {
    pub fn new(coeff: C64, branch_point: C64, exponent: Exponent) -> Self {
        Self {
            coeff,
            branch_point,
            exponent,
        }
    }

    /// `(-ζ)^λ`, principal value; exact powers for integer exponents.
    fn base_value(&self) -> C64 {
        // `+ 0.0` clears a negative zero so that Log(-1) = iπ
        let w = C64::new(-self.branch_point.re + 0.0, -self.branch_point.im + 0.0);
        if self.exponent.is_integer() {
            w.powu(self.exponent.numer() as u32)
        } else {
            (w.ln() * self.exponent.to_f64()).exp()
        }
    }

    /// Value of the distinguished branch at `z`, `|z| < |ζ|`.
    pub fn branch_value(&self, z: C64) -> C64 {
        let t = ONE - z / self.branch_point;
        let factor = if self.exponent.is_integer() {
            t.powu(self.exponent.numer() as u32)
        } else {
            (t.ln() * self.exponent.to_f64()).exp()
        };
        self.coeff * self.base_value() * factor
    }

    /// Principal value `exp(λ Log(z - ζ))`, without continuation.
    pub fn principal_value(&self, z: C64) -> C64 {
        let w = z - self.branch_point;
        if self.exponent.is_integer() {
            self.coeff * w.powu(self.exponent.numer() as u32)
        } else {
            self.coeff * (w.ln() * self.exponent.to_f64()).exp()
        }
    }

    /// Binomial series of the branch at 0 up to `order`.
    fn jet(&self, order: usize) -> Jet {
        let lambda = self.exponent.to_f64();
        let step = -self.branch_point.inv();
        let lead = self.coeff * self.base_value();
        let mut coeffs = Vec::with_capacity(order + 1);
        // binom(λ, j) (-1/ζ)^j, with exact zeros past an integer exponent
        let mut binom = ONE;
        for j in 0..=order {
            coeffs.push(lead * binom);
            let factor = lambda - j as f64;
            binom = if self.exponent.is_integer() && factor == 0.0 {
                ZERO
            } else {
                binom * step * (factor / (j + 1) as f64)
            };
        }
        Jet::new(coeffs)
    }
}

/// A finite sum of rational-power terms plus a constant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlgebraicPart {
    pub terms: Vec<AlgebraicTerm>,
    pub constant: C64,
}

impl AlgebraicPart {
    pub fn new(terms: Vec<AlgebraicTerm>) -> Result<Self> {
        let part = Self {
            terms,
            constant: ZERO,
        };
        part.check()?;
        Ok(part)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Adds the constant that makes the distinguished branch vanish at 0.
    pub fn normalized(mut self) -> Self {
        self.constant = ZERO;
        self.constant = -self.branch_value(ZERO);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant == ZERO
    }

    fn check(&self) -> Result<()> {
        for t in &self.terms {
            if t.branch_point == ZERO {
                return Err(Error::Domain("branch point at the origin".into()));
            }
            if !is_finite(t.coeff) || !is_finite(t.branch_point) {
                return Err(Error::NonFinite("algebraic term".into()));
            }
        }
        Ok(())
    }

    /// `min |ζ_j|`, or `+∞` without terms.
    pub fn validity_radius(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.branch_point.norm())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn branch_value(&self, z: C64) -> C64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, t| acc + t.branch_value(z))
    }

    /// Checked evaluation on the validity disk.
    pub fn try_branch_value(&self, z: C64) -> Result<C64> {
        if z.norm() >= self.validity_radius() {
            return Err(Error::Domain(format!(
                "|z| = {} outside the branch disk of radius {}",
                z.norm(),
                self.validity_radius()
            )));
        }
        Ok(self.branch_value(z))
    }
}

/// Order-`order` jet at 0 of the distinguished branch of `A`.
pub fn branch_germ(part: &AlgebraicPart, order: usize) -> Result<Jet> {
    part.check()?;
    Ok(part
        .terms
        .iter()
        .fold(Jet::constant(part.constant, order), |acc, t| &acc + &t.jet(order)))
}

/// The correspondence generated by the germ `L + (0, ĥ + A)` with
/// `L = diag(c_1, c_2)` expanding.
#[derive(Debug, Clone)]
pub struct ElementaryCorrespondence {
    c1: C64,
    c2: C64,
    entire: CoefficientRule,
    algebraic: AlgebraicPart,
}

impl ElementaryCorrespondence {
    /// Validates the branch points, `|c_1|, |c_2| > 1` and `h(0) = 0`.
    pub fn new(c1: C64, c2: C64, entire: CoefficientRule, algebraic: AlgebraicPart) -> Result<Self> {
        algebraic.check()?;
        if !(c1.norm() > 1.0) {
            return Err(Error::hypothesis("|c1| > 1", format!("|c1| = {}", c1.norm())));
        }
        if !(c2.norm() > 1.0) {
            return Err(Error::hypothesis("|c2| > 1", format!("|c2| = {}", c2.norm())));
        }
        let at_zero = entire.coefficient(0) + algebraic.branch_value(ZERO);
        if at_zero.norm() > FIXED_POINT_TOL {
            return Err(Error::Construction(format!(
                "h(0) = {at_zero} but the correspondence needs a fixed point at 0"
            )));
        }
        Ok(Self {
            c1,
            c2,
            entire,
            algebraic,
        })
    }

    pub fn c1(&self) -> C64 {
        self.c1
    }

    pub fn c2(&self) -> C64 {
        self.c2
    }

    pub fn entire(&self) -> &CoefficientRule {
        &self.entire
    }

    pub fn algebraic(&self) -> &AlgebraicPart {
        &self.algebraic
    }

    /// `ρ = min |ζ_j|` capped by the radius of the entire part.
    pub fn rho(&self) -> f64 {
        self.algebraic.validity_radius().min(self.entire.radius())
    }

    /// The elementary map on the entire part alone.
    pub fn entire_reduction(&self) -> ElementaryMap {
        ElementaryMap::new(self.c1, self.c2, self.entire.clone()).expect("finite multipliers")
    }

    /// Jet at 0 of `h = ĥ + A`.
    pub fn germ_jet(&self, order: usize) -> Jet {
        let alg = branch_germ(&self.algebraic, order).expect("checked at construction");
        &self.entire.jet(order) + &alg
    }

    /// `h(z)` along the distinguished branch.
    pub fn h_value(&self, z: C64) -> Result<C64> {
        Ok(self.entire.evaluate(z)? + self.algebraic.try_branch_value(z)?)
    }

    /// Pointwise value of the generating germ `(c_1 u, c_2 v + h(u))`.
    pub fn eval(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        Ok((self.c1 * u, self.c2 * v + self.h_value(u)?))
    }

    /// The branch `φ_n` of the `n`-th iterate through the origin.
    pub fn branch_iterate(&self, n: usize, order: usize) -> Result<BranchIterate> {
        if n == 0 {
            return Err(Error::Domain("branch iterates start at n = 1".into()));
        }
        let h = self.germ_jet(order);
        let mut q = Jet::zero(order);
        let mut c2_k = ONE;
        for k in 0..n {
            q = &q + &h.arg_scale(self.c1.powu((n - 1 - k) as u32)).scale(c2_k);
            c2_k *= self.c2;
        }
        Ok(BranchIterate {
            n,
            germ: PolyMap2 {
                u_mult: self.c1.powu(n as u32),
                q,
                v_mult: c2_k,
            },
            validity_radius: self.rho() / self.c1.norm().powi(n as i32 - 1),
        })
    }

    /// Pointwise `φ_n(u, v)` by iterating the germ, valid on the branch disk.
    pub fn eval_iterate(&self, n: usize, u: C64, v: C64) -> Result<(C64, C64)> {
        (0..n).try_fold((u, v), |(a, b), _| self.eval(a, b))
    }

    /// The renormalizer `χ_n = L^{-n} - (0, α_n)`.
    pub fn corr_renorm_family(&self, truncation: usize, n: usize) -> Result<Renormalizer> {
        RenormPlan::validate(&self.entire_reduction(), truncation)?;
        if n == 0 {
            return Err(Error::Domain("renormalizers start at n = 1".into()));
        }
        Ok(Renormalizer {
            n,
            c1: self.c1,
            c2: self.c2,
            polynomial: truncate(&self.entire, truncation),
            algebraic: self.algebraic.clone(),
        })
    }

    /// `ψ = Σ_{l≥N} ĥ_l u^l / (c_1^l - c_2)` over the entire part.
    pub fn corr_limit(&self, truncation: usize, order: usize) -> Result<Jet> {
        self.entire_reduction().limit_psi(truncation, order)
    }

    /// `φ_n ∘ χ_n = (u, ψ_n(u) + v)` as an order-`order` jet map; the
    /// algebraic part cancels, leaving the entire part's remainder sum.
    pub fn corr_renorm_compose(&self, truncation: usize, n: usize, order: usize) -> Result<PolyMap2> {
        self.entire_reduction().renorm_compose(truncation, n, order)
    }

    /// Sup over `|u| ≤ radius` of `|ψ_n - ψ|`, with `ψ_n` obtained by
    /// evaluating `φ_n ∘ χ_n` pointwise along the branch (no cancellation
    /// assumed).
    pub fn corr_scan(&self, truncation: usize, params: &ScanParams) -> Result<Vec<ScanRow>> {
        let psi = self.corr_limit(truncation, params.order)?;
        let points = crate::elementary::disk_lattice(params.radius, params.grid);
        params
            .n_list
            .iter()
            .map(|&n| {
                let chi = self.corr_renorm_family(truncation, n)?;
                let mut sup: f64 = 0.0;
                for &u in &points {
                    let (a, b) = chi.eval(u, ZERO)?;
                    let (first, second) = self.eval_iterate(n, a, b)?;
                    if (first - u).norm() > 1e-12 * u.norm().max(1.0) {
                        return Err(Error::Diagnostic(format!(
                            "first component of the renormalized branch is {first}, expected {u}"
                        )));
                    }
                    sup = sup.max((second - psi.evaluate(u)).norm());
                }
                Ok(ScanRow { n, sup_error: sup })
            })
            .collect()
    }
}

/// The germ of `φ_n` with its disk of validity.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchIterate {
    pub n: usize,
    pub germ: PolyMap2,
    /// `ρ / |c_1|^{n-1}`.
    pub validity_radius: f64,
}

/// `χ_n(u, v) = (c_1^{-n} u, c_2^{-n} v - α_n(u))` with
/// `α_n(u) = Σ_{k=1}^{n} c_2^{-k} [P_N + A](c_1^{-n-1+k} u)`.
#[derive(Debug, Clone)]
pub struct Renormalizer {
    pub n: usize,
    c1: C64,
    c2: C64,
    polynomial: Jet,
    algebraic: AlgebraicPart,
}

impl Renormalizer {
    /// The correction `α_n(u)`, exact along the branch.
    pub fn alpha_n(&self, u: C64) -> Result<C64> {
        let c1_inv = self.c1.inv();
        let c2_inv = self.c2.inv();
        let mut sum = ZERO;
        let mut c2_neg_k = ONE;
        for k in 1..=self.n {
            c2_neg_k *= c2_inv;
            let x = c1_inv.powu((self.n + 1 - k) as u32) * u;
            sum += c2_neg_k * (self.polynomial.evaluate(x) + self.algebraic.try_branch_value(x)?);
        }
        Ok(sum)
    }

    pub fn eval(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        let n = self.n as u32;
        Ok((
            self.c1.inv().powu(n) * u,
            self.c2.inv().powu(n) * v - self.alpha_n(u)?,
        ))
    }

    /// Jet realization with the algebraic part expanded to `order`.
    pub fn as_poly_map(&self, order: usize) -> PolyMap2 {
        let h = &self.polynomial.with_order(order)
            + &branch_germ(&self.algebraic, order).expect("checked at construction");
        let c1_inv = self.c1.inv();
        let c2_inv = self.c2.inv();
        let mut q = Jet::zero(order);
        let mut c2_neg_k = ONE;
        for k in 1..=self.n {
            c2_neg_k *= c2_inv;
            q = &q - &h.arg_scale(c1_inv.powu((self.n + 1 - k) as u32)).scale(c2_neg_k);
        }
        PolyMap2 {
            u_mult: c1_inv.powu(self.n as u32),
            q,
            v_mult: c2_neg_k,
        }
    }
}
