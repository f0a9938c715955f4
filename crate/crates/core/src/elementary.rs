//! Elementary maps `F(u, v) = (αu, βv + h(u))` of the complex 2-plane.
//!
//! Every map produced here has the triangular shape
//! `(u, v) ↦ (A·u, q(u) + B·v)` and is stored as a [`PolyMap2`]. Iterates and
//! inverse iterates come from closed forms; the renormalized compositions
//! `F^n ∘ F_N^{-n}` are computed from the telescoped remainder sum, never by
//! composing large jets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{is_finite, remainder, truncate, CoefficientRule, Jet, C64, ONE, ZERO};

/// Triangular map `(u, v) ↦ (u_mult·u, q(u) + v_mult·v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap2 {
    pub u_mult: C64,
    pub q: Jet,
    pub v_mult: C64,
}

impl PolyMap2 {
    pub fn identity(order: usize) -> Self {
        Self {
            u_mult: ONE,
            q: Jet::zero(order),
            v_mult: ONE,
        }
    }

    pub fn order(&self) -> usize {
        self.q.order()
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &PolyMap2) -> PolyMap2 {
        // (A1 u, q1(u) + B1 v) ∘ (A2 u, q2(u) + B2 v)
        //   = (A1 A2 u, q1(A2 u) + B1 q2(u) + B1 B2 v)
        let q = &self.q.arg_scale(inner.u_mult) + &inner.q.scale(self.v_mult);
        PolyMap2 {
            u_mult: self.u_mult * inner.u_mult,
            q,
            v_mult: self.v_mult * inner.v_mult,
        }
    }

    /// Exact triangular inverse `(u/A, (v - q(u/A))/B)`.
    pub fn inverse(&self) -> Result<PolyMap2> {
        if self.u_mult == ZERO || self.v_mult == ZERO {
            return Err(Error::Domain("triangular map with a zero multiplier".into()));
        }
        let a_inv = self.u_mult.inv();
        let b_inv = self.v_mult.inv();
        Ok(PolyMap2 {
            u_mult: a_inv,
            q: self.q.arg_scale(a_inv).scale(-b_inv),
            v_mult: b_inv,
        })
    }

    pub fn eval(&self, u: C64, v: C64) -> (C64, C64) {
        (self.u_mult * u, self.q.evaluate(u) + self.v_mult * v)
    }

    /// Coefficient-wise distance: multipliers and jet coefficients.
    pub fn max_abs_diff(&self, other: &PolyMap2) -> f64 {
        (self.u_mult - other.u_mult)
            .norm()
            .max((self.v_mult - other.v_mult).norm())
            .max(self.q.max_abs_diff(&other.q))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.u_mult
            .norm()
            .max(self.v_mult.norm())
            .max(self.q.max_abs_coeff())
    }
}

/// `F(u, v) = (αu, βv + h(u))`.
#[derive(Debug, Clone)]
pub struct ElementaryMap {
    alpha: C64,
    beta: C64,
    h: CoefficientRule,
}

impl ElementaryMap {
    pub fn new(alpha: C64, beta: C64, h: CoefficientRule) -> Result<Self> {
        if !is_finite(alpha) || !is_finite(beta) {
            return Err(Error::NonFinite("elementary map multipliers".into()));
        }
        Ok(Self { alpha, beta, h })
    }

    /// Convenience constructor with real multipliers and polynomial `h`.
    pub fn real_polynomial(alpha: f64, beta: f64, h: &[f64]) -> Self {
        Self {
            alpha: C64::new(alpha, 0.0),
            beta: C64::new(beta, 0.0),
            h: CoefficientRule::polynomial_real(h),
        }
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }

    pub fn beta(&self) -> C64 {
        self.beta
    }

    pub fn h(&self) -> &CoefficientRule {
        &self.h
    }

    pub fn is_invertible(&self) -> bool {
        self.alpha != ZERO && self.beta != ZERO
    }

    fn require_invertible(&self) -> Result<()> {
        if self.is_invertible() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "elementary map with alpha = {}, beta = {} is not invertible",
                self.alpha, self.beta
            )))
        }
    }

    /// Pointwise value, summing `h` from its rule.
    pub fn eval(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        Ok((self.alpha * u, self.beta * v + self.h.evaluate(u)?))
    }

    pub fn eval_inverse(&self, u: C64, v: C64) -> Result<(C64, C64)> {
        self.require_invertible()?;
        let x = u / self.alpha;
        Ok((x, (v - self.h.evaluate(x)?) / self.beta))
    }

    /// The map itself as an order-`order` triangular jet map.
    pub fn as_poly_map(&self, order: usize) -> PolyMap2 {
        PolyMap2 {
            u_mult: self.alpha,
            q: self.h.jet(order),
            v_mult: self.beta,
        }
    }

    /// `F^{∘n}(u,v) = (α^n u, Σ_{k<n} β^k h(α^{n-1-k} u) + β^n v)`.
    pub fn iterate_closed(&self, n: usize, order: usize) -> PolyMap2 {
        let h = self.h.jet(order);
        let mut q = Jet::zero(order);
        let mut beta_k = ONE;
        for k in 0..n {
            let lambda = self.alpha.powu((n - 1 - k) as u32);
            q = &q + &h.arg_scale(lambda).scale(beta_k);
            beta_k *= self.beta;
        }
        PolyMap2 {
            u_mult: self.alpha.powu(n as u32),
            q,
            v_mult: beta_k,
        }
    }

    /// `F^{-n}(u,v) = (α^{-n} u, -Σ_{k=1}^{n} β^{-k} h(α^{-n-1+k} u) + β^{-n} v)`.
    pub fn inverse_iterate_closed(&self, n: usize, order: usize) -> Result<PolyMap2> {
        self.require_invertible()?;
        Ok(self.inverse_formula(&self.h.jet(order), n))
    }

    /// `F_N^{-n}`: the inverse-iterate formula with `h` replaced by its
    /// truncation to degrees below `truncation`.
    pub fn truncated_inverse(&self, truncation: usize, n: usize, order: usize) -> Result<PolyMap2> {
        self.require_invertible()?;
        let p = truncate(&self.h, truncation).with_order(order);
        Ok(self.inverse_formula(&p, n))
    }

    fn inverse_formula(&self, h: &Jet, n: usize) -> PolyMap2 {
        let alpha_inv = self.alpha.inv();
        let beta_inv = self.beta.inv();
        let mut q = Jet::zero(h.order());
        let mut beta_neg_k = ONE;
        for k in 1..=n {
            beta_neg_k *= beta_inv;
            let lambda = alpha_inv.powu((n + 1 - k) as u32);
            q = &q - &h.arg_scale(lambda).scale(beta_neg_k);
        }
        PolyMap2 {
            u_mult: alpha_inv.powu(n as u32),
            q,
            v_mult: beta_neg_k,
        }
    }

    /// `F^{∘n} ∘ F_N^{-n} = (u, ψ_n(u) + v)` with
    /// `ψ_n(u) = Σ_{k<n} β^k R_N(α^{-1-k} u)`.
    pub fn renorm_compose(&self, truncation: usize, n: usize, order: usize) -> Result<PolyMap2> {
        let plan = RenormPlan::validate(self, truncation)?;
        Ok(PolyMap2 {
            u_mult: ONE,
            q: self.psi_partial(&plan, n, order),
            v_mult: ONE,
        })
    }

    fn psi_partial(&self, plan: &RenormPlan, n: usize, order: usize) -> Jet {
        let order = order.max(plan.truncation);
        let rem = remainder(&self.h, plan.truncation, order);
        // term_l(k) = β^k α^{-(k+1) l} = α^{-l} (β α^{-l})^k, advanced one k at a time
        let alpha_inv = self.alpha.inv();
        let mut coeffs = vec![ZERO; order + 1];
        for (l, slot) in coeffs.iter_mut().enumerate().skip(plan.truncation) {
            let eta = rem.coeff(l);
            if eta == ZERO {
                continue;
            }
            let base = alpha_inv.powu(l as u32);
            let ratio = self.beta * base;
            let mut term = base;
            let mut sum = ZERO;
            for _ in 0..n {
                sum += term;
                term *= ratio;
            }
            *slot = eta * sum;
        }
        Jet::new(coeffs)
    }

    /// Coefficients of the entire limit `ψ(u) = Σ_{l≥N} η_l u^l / (α^l - β)`.
    pub fn limit_psi(&self, truncation: usize, order: usize) -> Result<Jet> {
        RenormPlan::validate(self, truncation)?;
        let order = order.max(truncation);
        let mut coeffs = vec![ZERO; order + 1];
        for (l, slot) in coeffs.iter_mut().enumerate().skip(truncation) {
            let eta = self.h.coefficient(l);
            if eta == ZERO {
                continue;
            }
            let divisor = self.alpha.powu(l as u32) - self.beta;
            if divisor == ZERO {
                return Err(Error::Resonance(format!("alpha^{l} = beta")));
            }
            *slot = eta / divisor;
        }
        Ok(Jet::new(coeffs))
    }

    /// Smallest `N ≥ 1` with `|β| < |α|^N`.
    pub fn min_truncation_degree(&self) -> Result<usize> {
        let (a, b) = (self.alpha.norm(), self.beta.norm());
        check_expanding(a, b)?;
        let mut power = a;
        let mut n = 1;
        while b >= power {
            power *= a;
            n += 1;
        }
        Ok(n)
    }

    /// Sup over a grid sample of the polydisk of radius `params.radius` of
    /// the max-norm distance between `F^n ∘ F_N^{-n}` and its limit, for
    /// each `n` in `params.n_list`.
    pub fn convergence_scan(&self, truncation: usize, params: &ScanParams) -> Result<Vec<ScanRow>> {
        let plan = RenormPlan::validate(self, truncation)?;
        params.check()?;
        let limit = PolyMap2 {
            u_mult: ONE,
            q: self.limit_psi(truncation, params.order)?,
            v_mult: ONE,
        };
        let points = params.sample_points();
        Ok(params
            .n_list
            .iter()
            .map(|&n| {
                let renorm = PolyMap2 {
                    u_mult: ONE,
                    q: self.psi_partial(&plan, n, params.order),
                    v_mult: ONE,
                };
                ScanRow {
                    n,
                    sup_error: sup_distance(&renorm, &limit, &points),
                }
            })
            .collect())
    }
}

fn check_expanding(alpha_abs: f64, beta_abs: f64) -> Result<()> {
    if !(alpha_abs > 1.0) {
        return Err(Error::hypothesis(
            "|alpha| > 1",
            format!("|alpha| = {alpha_abs}"),
        ));
    }
    if !(beta_abs > 1.0) {
        return Err(Error::hypothesis("|beta| > 1", format!("|beta| = {beta_abs}")));
    }
    Ok(())
}

/// Sup of the max-norm distance of two triangular maps over sample points.
pub(crate) fn sup_distance(a: &PolyMap2, b: &PolyMap2, points: &[(C64, C64)]) -> f64 {
    points
        .par_iter()
        .map(|&(u, v)| {
            let (a1, a2) = a.eval(u, v);
            let (b1, b2) = b.eval(u, v);
            (a1 - b1).norm().max((a2 - b2).norm())
        })
        .reduce(|| 0.0, f64::max)
}

/// Margins of the inequalities that make `F^n ∘ F_N^{-n}` converge.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub alpha_abs: f64,
    pub beta_abs: f64,
    /// `|α|^N`.
    pub alpha_pow: f64,
    /// `|α| - 1`.
    pub alpha_margin: f64,
    /// `|β| - 1`.
    pub beta_margin: f64,
    /// `|α|^N - |β|`.
    pub truncation_margin: f64,
}

/// A validated truncation degree for a given elementary map.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormPlan {
    pub truncation: usize,
    pub report: HypothesisReport,
    /// `|β| / |α|^N`, strictly below 1.
    pub rate: f64,
}

impl RenormPlan {
    /// Checks `|α| > 1`, `|β| > 1` and `|β| < |α|^N` (strict).
    pub fn validate(map: &ElementaryMap, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::Domain("truncation degree must be at least 1".into()));
        }
        let (a, b) = (map.alpha.norm(), map.beta.norm());
        check_expanding(a, b)?;
        let alpha_pow = a.powi(truncation as i32);
        if !(b < alpha_pow) {
            return Err(Error::hypothesis(
                "|beta| < |alpha|^N",
                format!("|beta| = {b}, |alpha|^{truncation} = {alpha_pow}"),
            ));
        }
        Ok(Self {
            truncation,
            report: HypothesisReport {
                alpha_abs: a,
                beta_abs: b,
                alpha_pow,
                alpha_margin: a - 1.0,
                beta_margin: b - 1.0,
                truncation_margin: alpha_pow - b,
            },
            rate: b / alpha_pow,
        })
    }
}

/// Sampling parameters for [`ElementaryMap::convergence_scan`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScanParams {
    pub radius: f64,
    /// Lattice points per real axis.
    pub grid: usize,
    pub n_list: Vec<usize>,
    pub order: usize,
}

impl ScanParams {
    pub fn new(radius: f64, grid: usize, n_list: Vec<usize>) -> Self {
        Self {
            radius,
            grid,
            n_list,
            order: crate::series::DEFAULT_ORDER,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Domain(format!("scan radius {} must be positive", self.radius)));
        }
        if self.grid < 2 {
            return Err(Error::Domain("scan grid needs at least 2 points per axis".into()));
        }
        Ok(())
    }

    /// Lattice points of `[-r, r]^2` in the `u`-plane that lie in the closed
    /// disk, each paired with `v = u`. The difference of the compared maps
    /// does not depend on `v`, so the diagonal slice realizes the polydisk sup.
    pub fn sample_points(&self) -> Vec<(C64, C64)> {
        disk_lattice(self.radius, self.grid)
            .into_iter()
            .map(|u| (u, u))
            .collect()
    }
}

/// Points of a `grid × grid` lattice on `[-r, r]^2` inside `|z| ≤ r`.
pub fn disk_lattice(radius: f64, grid: usize) -> Vec<C64> {
    let step = 2.0 * radius / (grid - 1) as f64;
    let mut out = Vec::with_capacity(grid * grid);
    for i in 0..grid {
        for j in 0..grid {
            let z = C64::new(-radius + i as f64 * step, -radius + j as f64 * step);
            if z.norm() <= radius * (1.0 + 1e-12) {
                out.push(z);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub sup_error: f64,
}

/// Coefficient of `z^2` in `[F_*(0)]^{-k} F^{∘k}` for `F(z,w) = (αz, βw + z²)`:
/// `β^{-1}(1 + c + ... + c^{k-1})` with `c = α²/β`.
pub fn linear_renorm_coefficient(alpha: C64, beta: C64, k: usize) -> Result<C64> {
    if beta == ZERO {
        return Err(Error::Domain("beta = 0 in the linear renormalization coefficient".into()));
    }
    let c = alpha * alpha / beta;
    let mut sum = ZERO;
    let mut power = ONE;
    for _ in 0..k {
        sum += power;
        power *= c;
    }
    Ok(sum / beta)
}
