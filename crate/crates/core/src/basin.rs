//! Polynomial automorphisms of `C^2` with a repulsive fixed point, their
//! conjugation to the linear part on the repelling basin, and the
//! renormalizing family pushed through that conjugation.
//!
//! The conjugation is built in a local chart `x̃ = E^{-1}(x - p)` in which the
//! differential at `p` is `Λ = diag(λ1, λ2)`:
//!
//! `Ψ_n(x) = Λ^n Φ_m(H̃^{-n}(x̃))`
//!
//! where `Φ_m` is the degree-`m` formal solution of `Φ∘H̃ = Λ∘Φ`. With
//! `m = 1` this is the plain limit `Λ^n ∘ H̃^{-n}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elementary::{disk_lattice, ElementaryMap, PolyMap2, RenormPlan, ScanRow};
use crate::error::{Error, Result};
use crate::poly2::{dist, norm, solve2, BiPoly, Point2, PolyPair};
use crate::series::{is_finite, CoefficientRule, C64, DEFAULT_ORDER, ONE, ZERO};

pub const DEFAULT_JET_DEGREE: usize = 6;
pub const DEFAULT_PROBE_RADIUS: f64 = 0.1;
pub const DEFAULT_PROBE_GRID: usize = 7;
/// `|H(p) - p|` accepted as a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;
/// Defect accepted for `forward∘inverse = id` and for caller conjugacies.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative gap `|λ_k - λ1^i λ2^j| / max(|λ_k|, 1)` below which multipliers are resonant.
pub const RESONANCE_TOL: f64 = 1e-9;
/// Depth lag of the residual monotonicity check.
pub const MONOTONE_LAG: usize = 5;
/// Residuals below this multiple of the image scale are treated as rounding.
pub const ROUNDING_FLOOR: f64 = 1e-12;

const NEWTON_CAP: usize = 100;
const PHI_NEWTON_CAP: usize = 50;
const SAMPLE_COUNT: usize = 64;
const SAMPLE_SEED: u64 = 0xba51;

type Mat2 = [[C64; 2]; 2];

/// A polynomial automorphism together with its polynomial inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyAutomorphism {
    pub forward: PolyPair,
    pub inverse: PolyPair,
}

impl PolyAutomorphism {
    /// Checks both `forward∘inverse` and `inverse∘forward` against the
    /// identity on seeded random points of the unit polydisk.
    pub fn new(forward: PolyPair, inverse: PolyPair) -> Result<Self> {
        let map = Self { forward, inverse };
        let defect = map.inverse_defect();
        if !(defect <= IDENTITY_TOL) {
            return Err(Error::Construction(format!(
                "supplied inverse misses the identity by {defect:e} on sample points"
            )));
        }
        Ok(map)
    }

    pub fn diagonal(lambda1: C64, lambda2: C64) -> Result<Self> {
        if lambda1 == ZERO || lambda2 == ZERO {
            return Err(Error::Domain("diagonal map with a zero multiplier".into()));
        }
        Self::new(
            PolyPair::affine([[lambda1, ZERO], [ZERO, lambda2]], [ZERO, ZERO]),
            PolyPair::affine([[lambda1.inv(), ZERO], [ZERO, lambda2.inv()]], [ZERO, ZERO]),
        )
    }

    /// `(z, w) ↦ (αz, βw + h(z))` for polynomial `h`.
    pub fn from_elementary(map: &ElementaryMap) -> Result<Self> {
        let degree = map.h().degree().ok_or_else(|| {
            Error::Domain(format!("h = {} is not a polynomial", map.h().label()))
        })?;
        if !map.is_invertible() {
            return Err(Error::Domain("elementary map with a zero multiplier".into()));
        }
        let (alpha, beta) = (map.alpha(), map.beta());
        let (a_inv, b_inv) = (alpha.inv(), beta.inv());
        let mut second = BiPoly::monomial(beta, 0, 1);
        let mut second_inv = BiPoly::monomial(b_inv, 0, 1);
        for l in 0..=degree {
            let c = map.h().coefficient(l);
            second.add_term(c, l as u32, 0);
            second_inv.add_term(-c * a_inv.powu(l as u32) * b_inv, l as u32, 0);
        }
        Self::new(
            PolyPair::new(BiPoly::monomial(alpha, 1, 0), second),
            PolyPair::new(BiPoly::monomial(a_inv, 1, 0), second_inv),
        )
    }

    /// `(z, w) ↦ (z, w + s z²)`.
    pub fn shear(s: C64) -> Self {
        let sq = BiPoly::monomial(s, 2, 0);
        Self {
            forward: PolyPair::new(BiPoly::z(), &BiPoly::w() + &sq),
            inverse: PolyPair::new(BiPoly::z(), &BiPoly::w() - &sq),
        }
    }

    pub fn translation(b: Point2) -> Self {
        Self {
            forward: PolyPair::translation(b),
            inverse: PolyPair::translation([-b[0], -b[1]]),
        }
    }

    /// `S^{-1} ∘ diag(λ1, λ2) ∘ S` with `S` the shear by `s`.
    pub fn shear_conjugate(lambda1: C64, lambda2: C64, s: C64) -> Result<Self> {
        Self::diagonal(lambda1, lambda2)?.conjugated(&Self::shear(s))
    }

    /// `s^{-1} ∘ self ∘ s`.
    pub fn conjugated(&self, s: &PolyAutomorphism) -> Result<Self> {
        Self::new(
            s.inverse.compose(&self.forward.compose(&s.forward)),
            s.inverse.compose(&self.inverse.compose(&s.forward)),
        )
    }

    /// `τ ∘ self ∘ τ^{-1}` with `τ` the shift by `b`; moves fixed points by `b`.
    pub fn translated(&self, b: Point2) -> Result<Self> {
        self.conjugated(&Self::translation([-b[0], -b[1]]))
    }

    pub fn eval(&self, x: Point2) -> Point2 {
        self.forward.eval(x)
    }

    pub fn eval_inverse(&self, x: Point2) -> Point2 {
        self.inverse.eval(x)
    }

    pub fn differential(&self, x: Point2) -> Mat2 {
        self.forward.jacobian(x)
    }

    /// Largest of `|f(g(x)) - x|` and `|g(f(x)) - x|` over the seeded sample.
    pub fn inverse_defect(&self) -> f64 {
        sample_points(1.0)
            .iter()
            .map(|&x| {
                let a = dist(self.forward.eval(self.inverse.eval(x)), x);
                let b = dist(self.inverse.eval(self.forward.eval(x)), x);
                a.max(b)
            })
            .fold(0.0, |acc, d| if d.is_nan() { f64::NAN } else { acc.max(d) })
    }
}

fn sample_points(radius: f64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    let mut disk = || {
        let r = radius * rng.gen::<f64>().sqrt();
        C64::from_polar(r, rng.gen::<f64>() * std::f64::consts::TAU)
    };
    (0..SAMPLE_COUNT).map(|_| [disk(), disk()]).collect()
}

/// Newton iteration for `H(x) = x` from `guess`.
pub fn find_fixed_point(map: &PolyAutomorphism, guess: Point2) -> Result<Point2> {
    let mut x = guess;
    let mut trace = Vec::new();
    for iteration in 0..NEWTON_CAP {
        let hx = map.eval(x);
        let g = [hx[0] - x[0], hx[1] - x[1]];
        let r = norm(g);
        trace.push(r);
        let mut jac = map.differential(x);
        jac[0][0] -= ONE;
        jac[1][1] -= ONE;
        let step = solve2(jac, g).ok_or_else(|| {
            Error::Domain(format!(
                "singular Newton system for H - id at iteration {iteration}"
            ))
        })?;
        if r <= FIXED_POINT_TOL {
            return Ok(x);
        }
        x = [x[0] - step[0], x[1] - step[1]];
        if !is_finite(x[0]) || !is_finite(x[1]) {
            return Err(Error::NonFinite(format!("Newton iterate at step {iteration}")));
        }
    }
    Err(Error::SearchFailure {
        iterations: NEWTON_CAP,
        message: format!("|H(x) - x| stayed above {FIXED_POINT_TOL:e}"),
        trace,
    })
}

/// Eigenvalues of a 2×2 matrix, the first being the one nearer `m[0][0]`.
pub fn eigenvalues(m: Mat2) -> [C64; 2] {
    let half_tr = (m[0][0] + m[1][1]) * 0.5;
    let half_gap = (m[0][0] - m[1][1]) * 0.5;
    let root = (half_gap * half_gap + m[0][1] * m[1][0]).sqrt();
    let (a, b) = (half_tr + root, half_tr - root);
    if (a - m[0][0]).norm() <= (b - m[0][0]).norm() {
        [a, b]
    } else {
        [b, a]
    }
}

/// An automorphism with a located fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Automorphism2D {
    pub map: PolyAutomorphism,
    pub fixed_point: Point2,
    pub multipliers: [C64; 2],
}

impl Automorphism2D {
    pub fn locate(map: PolyAutomorphism, guess: Point2) -> Result<Self> {
        let fixed_point = find_fixed_point(&map, guess)?;
        let multipliers = eigenvalues(map.differential(fixed_point));
        Ok(Self {
            map,
            fixed_point,
            multipliers,
        })
    }

    pub fn is_repulsive(&self) -> bool {
        self.multipliers.iter().all(|l| l.norm() > 1.0)
    }
}

/// Closest approach to a resonance `λ_k = λ1^i λ2^j`, `i + j ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceCheck {
    /// Largest total degree inspected.
    pub max_degree: usize,
    pub min_margin: f64,
    /// `(k, i, j)` attaining the minimum; `k` is 1 or 2.
    pub worst: (usize, u32, u32),
}

/// Inspects every degree where a resonance can occur for repelling
/// multipliers, and at least up to `degree`.
pub fn check_non_resonant(lambda: [C64; 2], degree: usize) -> Result<ResonanceCheck> {
    let (lo, hi) = {
        let (a, b) = (lambda[0].norm(), lambda[1].norm());
        (a.min(b), a.max(b))
    };
    if !(lo > 1.0) {
        return Err(Error::hypothesis(
            "|lambda_i| > 1",
            format!("multipliers {} and {}", lambda[0], lambda[1]),
        ));
    }
    let bound = (hi.ln() / lo.ln()).floor() as usize;
    let max_degree = degree.max(bound).max(2);
    let mut check = ResonanceCheck {
        max_degree,
        min_margin: f64::INFINITY,
        worst: (0, 0, 0),
    };
    for d in 2..=max_degree as u32 {
        for i in 0..=d {
            let mu = lambda[0].powu(i) * lambda[1].powu(d - i);
            for (k, lk) in lambda.iter().enumerate() {
                let margin = (lk - mu).norm() / lk.norm().max(1.0);
                if margin < check.min_margin {
                    check.min_margin = margin;
                    check.worst = (k + 1, i, d - i);
                }
            }
        }
    }
    if check.min_margin < RESONANCE_TOL {
        let (k, i, j) = check.worst;
        return Err(Error::Resonance(format!(
            "lambda{k} = lambda1^{i} lambda2^{j} (relative gap {:e})",
            check.min_margin
        )));
    }
    Ok(check)
}

/// Sampling grid of a polydisk: lattice points of each coordinate disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeGrid {
    pub radius: f64,
    /// Lattice points per real axis in each coordinate.
    pub grid: usize,
}

impl Default for ProbeGrid {
    fn default() -> Self {
        Self {
            radius: DEFAULT_PROBE_RADIUS,
            grid: DEFAULT_PROBE_GRID,
        }
    }
}

impl ProbeGrid {
    pub fn new(radius: f64, grid: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("probe radius {radius} must be positive")));
        }
        if grid < 2 {
            return Err(Error::Domain("probe grid needs at least 2 points per axis".into()));
        }
        Ok(Self { radius, grid })
    }

    pub fn points_about(&self, center: Point2) -> Vec<Point2> {
        let disk = disk_lattice(self.radius, self.grid);
        let mut out = Vec::with_capacity(disk.len() * disk.len());
        for a in &disk {
            for b in &disk {
                out.push([center[0] + a, center[1] + b]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationOptions {
    /// Degree `m` of the linearizing jet; 1 gives the plain `Λ^n ∘ H^{-n}`.
    pub jet_degree: usize,
    pub probe: ProbeGrid,
}

impl Default for ConjugationOptions {
    fn default() -> Self {
        Self {
            jet_degree: DEFAULT_JET_DEGREE,
            probe: ProbeGrid::default(),
        }
    }
}

/// Local linearizing chart about a repulsive fixed point.
#[derive(Debug, Clone)]
struct LocalChart {
    p: Point2,
    e: Mat2,
    e_inv: Mat2,
    /// `H̃ = E^{-1}(H(p + E·) - p)`.
    forward: PolyPair,
    backward: PolyPair,
    lambda: [C64; 2],
    phi: PolyPair,
    phi_jac: [[BiPoly; 2]; 2],
}

impl LocalChart {
    fn build(h: &Automorphism2D, jet_degree: usize) -> Result<Self> {
        let p = h.fixed_point;
        let lambda = h.multipliers;
        let e = eigenbasis(h.map.differential(p), lambda)?;
        let e_inv = invert(e).ok_or_else(|| Error::Resonance("degenerate eigenbasis".into()))?;
        let into = PolyPair::affine(e, p);
        let minus_p = mat_vec(e_inv, p);
        let out = PolyPair::affine(e_inv, [-minus_p[0], -minus_p[1]]);
        let local = |m: &PolyPair| {
            let mut pair = out.compose(&m.compose(&into));
            // p is fixed up to FIXED_POINT_TOL; pin it exactly in the chart
            for poly in [&mut pair.first, &mut pair.second] {
                let c = poly.coeff(0, 0);
                poly.add_term(-c, 0, 0);
            }
            pair
        };
        let forward = local(&h.map.forward);
        let backward = local(&h.map.inverse);
        let phi = linearizing_jet(&forward, lambda, jet_degree);
        let phi_jac = [
            [phi.first.d_z(), phi.first.d_w()],
            [phi.second.d_z(), phi.second.d_w()],
        ];
        Ok(Self {
            p,
            e,
            e_inv,
            forward,
            backward,
            lambda,
            phi,
            phi_jac,
        })
    }

    fn to_local(&self, x: Point2) -> Point2 {
        mat_vec(self.e_inv, [x[0] - self.p[0], x[1] - self.p[1]])
    }

    fn to_global(&self, y: Point2) -> Point2 {
        let v = mat_vec(self.e, y);
        [self.p[0] + v[0], self.p[1] + v[1]]
    }

    fn lambda_pow(&self, n: usize) -> [C64; 2] {
        [self.lambda[0].powu(n as u32), self.lambda[1].powu(n as u32)]
    }

    fn psi_local(&self, mut y: Point2, depth: usize) -> Point2 {
        for _ in 0..depth {
            y = self.backward.eval(y);
        }
        let z = self.phi.eval(y);
        let l = self.lambda_pow(depth);
        [l[0] * z[0], l[1] * z[1]]
    }

    /// `H̃^{∘forward_steps}(Φ^{-1}(Λ^{-depth} t))` in local coordinates.
    fn pull_back(&self, t: Point2, depth: usize, forward_steps: usize) -> Result<Point2> {
        let l = self.lambda_pow(depth);
        let mut x = self.phi_inverse([t[0] / l[0], t[1] / l[1]])?;
        for _ in 0..forward_steps {
            x = self.forward.eval(x);
        }
        Ok(x)
    }

    /// Newton solve of `Φ(x) = t`. Coordinates of `t` can differ by many
    /// orders of magnitude this deep in the basin, so convergence is judged
    /// per component on the Newton step.
    fn phi_inverse(&self, t: Point2) -> Result<Point2> {
        if self.phi.total_degree() <= 1 {
            return Ok(t);
        }
        let mut x = t;
        let mut trace = Vec::new();
        for _ in 0..PHI_NEWTON_CAP {
            let fx = self.phi.eval(x);
            let r = [fx[0] - t[0], fx[1] - t[1]];
            trace.push(norm(r));
            let jac = [
                [self.phi_jac[0][0].eval(x[0], x[1]), self.phi_jac[0][1].eval(x[0], x[1])],
                [self.phi_jac[1][0].eval(x[0], x[1]), self.phi_jac[1][1].eval(x[0], x[1])],
            ];
            let step = solve2(jac, r)
                .ok_or_else(|| Error::Diagnostic("linearizing jet is singular at the probe".into()))?;
            x = [x[0] - step[0], x[1] - step[1]];
            let settled = (0..2).all(|k| step[k].norm() <= 4.0 * f64::EPSILON * x[k].norm());
            if settled {
                return Ok(x);
            }
        }
        Err(Error::SearchFailure {
            iterations: PHI_NEWTON_CAP,
            message: "inverse of the linearizing jet did not converge".into(),
            trace,
        })
    }
}

/// Solves `Φ∘H̃ = Λ∘Φ` through total degree `degree`, `Φ = id + O(2)`.
/// The linear part of `H̃` is taken to be exactly `Λ`.
fn linearizing_jet(local: &PolyPair, lambda: [C64; 2], degree: usize) -> PolyPair {
    let mut phi = PolyPair::identity();
    for d in 2..=degree as u32 {
        let comp = phi.compose_truncated(local, d);
        let rhs = [comp.first.homogeneous_part(d), comp.second.homogeneous_part(d)];
        let mut new_terms: [Vec<(C64, u32, u32)>; 2] = [Vec::new(), Vec::new()];
        for (k, r) in rhs.iter().enumerate() {
            for ((i, j), c) in r.terms() {
                let divisor = lambda[k] - lambda[0].powu(i) * lambda[1].powu(j);
                new_terms[k].push((c / divisor, i, j));
            }
        }
        let [a, b] = new_terms;
        for (c, i, j) in a {
            phi.first.add_term(c, i, j);
        }
        for (c, i, j) in b {
            phi.second.add_term(c, i, j);
        }
    }
    phi
}

fn mat_vec(m: Mat2, x: Point2) -> Point2 {
    [
        m[0][0] * x[0] + m[0][1] * x[1],
        m[1][0] * x[0] + m[1][1] * x[1],
    ]
}

fn invert(m: Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.norm() < 1e-12 {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

/// Columns are eigenvectors for `lambda[0]`, `lambda[1]`, each scaled so its
/// largest entry is 1.
fn eigenbasis(m: Mat2, lambda: [C64; 2]) -> Result<Mat2> {
    let scale = m.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
    let tiny = 1e-12 * scale;
    if (lambda[0] - lambda[1]).norm() <= tiny {
        if m[0][1].norm() <= tiny && m[1][0].norm() <= tiny {
            return Ok([[ONE, ZERO], [ZERO, ONE]]);
        }
        return Err(Error::Resonance(format!(
            "repeated multiplier {} with a nontrivial Jordan block",
            lambda[0]
        )));
    }
    let mut columns = [[ZERO; 2]; 2];
    for (col, &l) in lambda.iter().enumerate() {
        let a = [m[0][1], l - m[0][0]];
        let b = [l - m[1][1], m[1][0]];
        let v = if norm(a) >= norm(b) { a } else { b };
        let pivot = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
        columns[col] = [v[0] / pivot, v[1] / pivot];
    }
    Ok([
        [columns[0][0], columns[1][0]],
        [columns[0][1], columns[1][1]],
    ])
}

#[derive(Debug, Clone)]
enum Conjugator {
    /// `H` is itself the elementary normal form.
    Identity,
    Basin(Box<LocalChart>),
}

/// `Ψ_n` on the repelling basin with its measured conjugation defect.
#[derive(Debug, Clone)]
pub struct ConjugationApprox {
    pub depth: usize,
    pub normal_form: ElementaryMap,
    pub fixed_point: Point2,
    pub multipliers: [C64; 2],
    /// Sup of `|Ψ_n(H(x)) - T(Ψ_n(x))|` over the probe grid about `p`.
    pub residual: f64,
    /// The same at depth `n - MONOTONE_LAG` (or 0), when `n > 0`.
    pub lagged_residual: Option<f64>,
    /// Sup of `|T(Ψ_n(x))|`, the scale of the rounding floor.
    pub image_scale: f64,
    pub resonance: Option<ResonanceCheck>,
    pub jet_degree: usize,
    pub probe: ProbeGrid,
    kind: Conjugator,
}

impl ConjugationApprox {
    /// `Ψ = id` for an elementary `H` that is its own normal form.
    pub fn trivial(map: ElementaryMap, depth: usize, probe: ProbeGrid) -> Self {
        let multipliers = [map.alpha(), map.beta()];
        Self {
            depth,
            normal_form: map,
            fixed_point: [ZERO, ZERO],
            multipliers,
            residual: 0.0,
            lagged_residual: None,
            image_scale: 0.0,
            resonance: None,
            jet_degree: 1,
            probe,
            kind: Conjugator::Identity,
        }
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.kind, Conjugator::Identity)
    }

    /// `Ψ_n(x)`.
    pub fn psi(&self, x: Point2) -> Point2 {
        match &self.kind {
            Conjugator::Identity => x,
            Conjugator::Basin(chart) => chart.psi_local(chart.to_local(x), self.depth),
        }
    }

    /// `Ψ_n^{-1}(y) = H^{∘n}(p + E·Φ^{-1}(T^{-n} y))`.
    pub fn psi_inv(&self, y: Point2) -> Result<Point2> {
        match &self.kind {
            Conjugator::Identity => Ok(y),
            Conjugator::Basin(chart) => Ok(chart.to_global(chart.pull_back(y, self.depth, self.depth)?)),
        }
    }

    /// Rounding level below which residual comparisons are not meaningful.
    pub fn rounding_floor(&self) -> f64 {
        ROUNDING_FLOOR * self.image_scale.max(1.0)
    }

    /// Sup of `|Ψ_n(Ψ_n^{-1}(y)) - y|` over `points`.
    pub fn inverse_consistency(&self, points: &[Point2]) -> Result<f64> {
        let defects: Result<Vec<f64>> = points
            .par_iter()
            .map(|&y| Ok(dist(self.psi(self.psi_inv(y)?), y)))
            .collect();
        Ok(defects?.into_iter().fold(0.0, f64::max))
    }

    /// Pointwise `|Ψ_n(H(x)) - T(Ψ_n(x))|`.
    pub fn conjugation_defect(&self, x: Point2) -> f64 {
        match &self.kind {
            Conjugator::Identity => 0.0,
            Conjugator::Basin(chart) => {
                let (lhs, rhs) = chart_defect(chart, chart.to_local(x), self.depth);
                dist(lhs, rhs)
            }
        }
    }
}

fn chart_defect(chart: &LocalChart, y: Point2, depth: usize) -> (Point2, Point2) {
    let lhs = chart.psi_local(chart.forward.eval(y), depth);
    let psi = chart.psi_local(y, depth);
    (lhs, [chart.lambda[0] * psi[0], chart.lambda[1] * psi[1]])
}

/// `(sup defect, sup |T Ψ|)` over local probe points.
fn chart_residual(chart: &LocalChart, local_points: &[Point2], depth: usize) -> (f64, f64) {
    local_points
        .par_iter()
        .map(|&y| {
            let (lhs, rhs) = chart_defect(chart, y, depth);
            (dist(lhs, rhs), norm(rhs))
        })
        .reduce(|| (0.0, 0.0), |a, b| (nan_max(a.0, b.0), a.1.max(b.1)))
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Builds `Ψ_n` about the repulsive fixed point of `h` and measures its
/// residual on `options.probe`.
pub fn conjugation_approx(
    h: &Automorphism2D,
    depth: usize,
    options: &ConjugationOptions,
) -> Result<ConjugationApprox> {
    if !h.is_repulsive() {
        return Err(Error::hypothesis(
            "|lambda_i| > 1",
            format!(
                "fixed point multipliers {} and {} are not both repelling",
                h.multipliers[0], h.multipliers[1]
            ),
        ));
    }
    if options.jet_degree == 0 {
        return Err(Error::Domain("linearizing jet degree must be at least 1".into()));
    }
    ProbeGrid::new(options.probe.radius, options.probe.grid)?;
    let resonance = check_non_resonant(h.multipliers, options.jet_degree)?;
    let chart = LocalChart::build(h, options.jet_degree)?;
    let local_points: Vec<Point2> = options
        .probe
        .points_about(h.fixed_point)
        .into_iter()
        .map(|x| chart.to_local(x))
        .collect();
    let (residual, image_scale) = chart_residual(&chart, &local_points, depth);
    if !residual.is_finite() {
        return Err(Error::NonFinite(format!("conjugation residual at depth {depth}")));
    }
    let lagged_residual = (depth > 0).then(|| {
        chart_residual(&chart, &local_points, depth.saturating_sub(MONOTONE_LAG)).0
    });
    let normal_form = ElementaryMap::new(h.multipliers[0], h.multipliers[1], CoefficientRule::zero())?;
    let approx = ConjugationApprox {
        depth,
        normal_form,
        fixed_point: h.fixed_point,
        multipliers: h.multipliers,
        residual,
        lagged_residual,
        image_scale,
        resonance: Some(resonance),
        jet_degree: options.jet_degree,
        probe: options.probe.clone(),
        kind: Conjugator::Basin(Box::new(chart)),
    };
    if let Some(lagged) = lagged_residual {
        if residual > lagged.max(approx.rounding_floor()) {
            return Err(Error::Diagnostic(format!(
                "residual grew from {lagged:e} at depth {} to {residual:e} at depth {depth}; \
                 the probe region may leave the repelling basin",
                depth.saturating_sub(MONOTONE_LAG)
            )));
        }
    }
    Ok(approx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushedSample {
    pub w: Point2,
    /// `H^{∘n} ∘ Ψ^{-1} ∘ f_n (w)`.
    pub value: Point2,
    /// `Ψ^{-1} ∘ G (w)`.
    pub target: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushedReport {
    pub n: usize,
    pub depth: usize,
    pub truncation: usize,
    pub residual: f64,
    pub pushed_error: f64,
    pub samples: Vec<PushedSample>,
}

/// Pushes `f_n = T_N^{-n}` through `Ψ^{-1}` and compares
/// `H^{∘n} ∘ Ψ^{-1} ∘ f_n` with `Ψ^{-1} ∘ G` on the probe polydisk about 0,
/// `G = (u, ψ(u) + v)` being the elementary limit for `T`.
pub fn pushed_renorm_family(
    conj: &ConjugationApprox,
    truncation: usize,
    n: usize,
    probe: &ProbeGrid,
) -> Result<PushedReport> {
    let t = &conj.normal_form;
    RenormPlan::validate(t, truncation)?;
    ProbeGrid::new(probe.radius, probe.grid)?;
    let limit = PolyMap2 {
        u_mult: ONE,
        q: t.limit_psi(truncation, DEFAULT_ORDER)?,
        v_mult: ONE,
    };
    let points = probe.points_about([ZERO, ZERO]);
    let samples: Result<Vec<PushedSample>> = match &conj.kind {
        Conjugator::Identity => {
            // Ψ = id: H^n ∘ f_n is the telescoped renormalized composition
            let renorm = t.renorm_compose(truncation, n, DEFAULT_ORDER)?;
            Ok(points
                .iter()
                .map(|&w| PushedSample {
                    w,
                    value: pair(renorm.eval(w[0], w[1])),
                    target: pair(limit.eval(w[0], w[1])),
                })
                .collect())
        }
        Conjugator::Basin(chart) => {
            let f_n = t.truncated_inverse(truncation, n, DEFAULT_ORDER)?;
            points
                .par_iter()
                .map(|&w| {
                    let start = pair(f_n.eval(w[0], w[1]));
                    let value = chart.to_global(chart.pull_back(start, conj.depth, conj.depth + n)?);
                    let target = conj.psi_inv(pair(limit.eval(w[0], w[1])))?;
                    Ok(PushedSample { w, value, target })
                })
                .collect()
        }
    };
    let samples = samples?;
    let pushed_error = samples
        .iter()
        .map(|s| dist(s.value, s.target))
        .fold(0.0, nan_max);
    if !pushed_error.is_finite() {
        return Err(Error::NonFinite(format!("pushed family at n = {n}")));
    }
    Ok(PushedReport {
        n,
        depth: conj.depth,
        truncation,
        residual: conj.residual,
        pushed_error,
        samples,
    })
}

fn pair((a, b): (C64, C64)) -> Point2 {
    [a, b]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDegreeReport {
    /// Sup of `|f(x) - φ^{-1}(F(φ(x)))|` on the seeded sample.
    pub conjugacy_defect: f64,
    pub truncation: usize,
    /// Sup of `|f^{∘n}(φ^{-1}(F_N^{-n}(w))) - φ^{-1}(G(w))|` on the probe about 0.
    pub rows: Vec<ScanRow>,
}

/// Checks a caller-supplied conjugacy `f = φ^{-1} ∘ F ∘ φ` and tabulates the
/// renormalizing family `φ^{-1} ∘ F_N^{-n}` for the iterates of `f`.
pub fn bounded_degree_note(
    f: &PolyAutomorphism,
    phi: &PolyAutomorphism,
    big_f: &ElementaryMap,
    truncation: usize,
    n_list: &[usize],
    probe: &ProbeGrid,
) -> Result<BoundedDegreeReport> {
    let samples = sample_points(1.0);
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for &x in &samples {
        let fx = f.eval(x);
        let y = phi.eval(x);
        let (a, b) = big_f.eval(y[0], y[1])?;
        let target = phi.eval_inverse([a, b]);
        defect = nan_max(defect, dist(fx, target));
        scale = scale.max(norm(fx));
    }
    if !(defect <= IDENTITY_TOL * scale) {
        return Err(Error::Verification(format!(
            "f differs from phi^-1 F phi by {defect:e} on sample points"
        )));
    }
    RenormPlan::validate(big_f, truncation)?;
    ProbeGrid::new(probe.radius, probe.grid)?;
    let limit = PolyMap2 {
        u_mult: ONE,
        q: big_f.limit_psi(truncation, DEFAULT_ORDER)?,
        v_mult: ONE,
    };
    let points = probe.points_about([ZERO, ZERO]);
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let f_n = big_f.truncated_inverse(truncation, n, DEFAULT_ORDER)?;
        let sup_error = points
            .par_iter()
            .map(|&w| {
                let mut x = phi.eval_inverse(pair(f_n.eval(w[0], w[1])));
                for _ in 0..n {
                    x = f.eval(x);
                }
                dist(x, phi.eval_inverse(pair(limit.eval(w[0], w[1]))))
            })
            .reduce(|| 0.0, nan_max);
        rows.push(ScanRow { n, sup_error });
    }
    Ok(BoundedDegreeReport {
        conjugacy_defect: defect,
        truncation,
        rows,
    })
}
