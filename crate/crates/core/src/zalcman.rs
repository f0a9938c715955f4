//! Rescaling of non-normal families.
//!
//! The Fubini–Study derivative of a map into `C^d ⊂ P^d` (affine chart) is
//! the largest per-direction norm of its differential in the Fubini–Study
//! metric. [`metric_lemma_search`] realizes the metric-space lemma on a finite
//! sample: starting from `u` it walks to a point `v` whose neighbourhood of
//! radius `1/(σ M(v))` carries no value above `2 M(v)`. [`zalcman_extract`]
//! applies it with `M = |(f_n)_*|` and `σ = 1/n` to produce rescaling centers
//! `v_n` and scales `r_n = 1/M(v_n)`; the rescaled maps `f_n(v_n + r_n w)` then
//! have derivative at most 2 on `|w| ≤ n` and exactly 1 at `w = 0`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::elementary::{ElementaryMap, PolyMap2};
use crate::error::{Error, Result};
use crate::series::{is_finite, C64, ZERO};

/// Fubini–Study derivative of a map with value `value ∈ C^d` and
/// Jacobian `jacobian` (row-major `d × d`) in the affine chart of `P^d`.
pub fn fs_norm(value: &[C64], jacobian: &[C64]) -> f64 {
    let d = value.len();
    debug_assert_eq!(jacobian.len(), d * d);
    let weight = 1.0 + value.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (0..d)
        .map(|i| {
            let column = (0..d).map(|k| jacobian[k * d + i]);
            let mut sq = 0.0;
            let mut inner = ZERO;
            for (k, dz) in column.enumerate() {
                sq += dz.norm_sqr();
                inner += value[k] * dz.conj();
            }
            let num = (weight * sq - inner.norm_sqr()).max(0.0);
            num.sqrt() / weight
        })
        .fold(0.0, f64::max)
}

/// One-variable spherical derivative `|h'| / (1 + |h|^2)`.
pub fn spherical_derivative(value: C64, derivative: C64) -> f64 {
    derivative.norm() / (1.0 + value.norm_sqr())
}

/// Product of closed disks, one per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Polydisk {
    pub center: Vec<C64>,
    pub radius: Vec<f64>,
}

impl Polydisk {
    pub fn new(center: Vec<C64>, radius: Vec<f64>) -> Result<Self> {
        if center.is_empty() || center.len() != radius.len() || center.len() > 2 {
            return Err(Error::Domain("polydisk needs 1 or 2 coordinates".into()));
        }
        if radius.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Domain("polydisk radii must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn disk(center: C64, radius: f64) -> Result<Self> {
        Self::new(vec![center], vec![radius])
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        z.iter()
            .zip(&self.center)
            .zip(&self.radius)
            .all(|((z, c), r)| (z - c).norm() <= r * (1.0 + 1e-12))
    }

    pub fn min_radius(&self) -> f64 {
        self.radius.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    CentralDifference { step: f64 },
}

type Evaluator = dyn Fn(usize, &[C64]) -> Vec<C64> + Send + Sync;
type JacobianFn = dyn Fn(usize, &[C64]) -> Vec<C64> + Send + Sync;

/// An indexed family `n ↦ f_n` of holomorphic maps `C^d → C^d`, `d ∈ {1, 2}`,
/// on a polydisk.
#[derive(Clone)]
pub struct SampledFamily {
    domain: Polydisk,
    evaluator: Arc<Evaluator>,
    jacobian: Option<Arc<JacobianFn>>,
    mode: DerivativeMode,
}

impl fmt::Debug for SampledFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFamily")
            .field("domain", &self.domain)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl SampledFamily {
    /// A family differentiated by central differences with step `1e-6·radius`.
    pub fn new<F>(domain: Polydisk, evaluator: F) -> Self
    where
        F: Fn(usize, &[C64]) -> Vec<C64> + Send + Sync + 'static,
    {
        let step = 1e-6 * domain.min_radius();
        Self {
            domain,
            evaluator: Arc::new(evaluator),
            jacobian: None,
            mode: DerivativeMode::CentralDifference { step },
        }
    }

    /// Supplies an exact Jacobian (row-major) and switches to analytic mode.
    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(usize, &[C64]) -> Vec<C64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self.mode = DerivativeMode::Analytic;
        self
    }

    pub fn with_difference_step(mut self, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::Domain("difference step must be positive".into()));
        }
        self.mode = DerivativeMode::CentralDifference { step };
        Ok(self)
    }

    pub fn domain(&self) -> &Polydisk {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn eval(&self, n: usize, z: &[C64]) -> Result<Vec<C64>> {
        if z.len() != self.dim() {
            return Err(Error::Domain(format!(
                "point of dimension {} for a family of dimension {}",
                z.len(),
                self.dim()
            )));
        }
        let value = (self.evaluator)(n, z);
        if value.len() != self.dim() || !value.iter().all(|c| is_finite(*c)) {
            return Err(Error::NonFinite(format!("f_{n} at {z:?} -> {value:?}")));
        }
        Ok(value)
    }

    pub fn jacobian(&self, n: usize, z: &[C64]) -> Result<Vec<C64>> {
        let d = self.dim();
        let jac = match (self.mode, &self.jacobian) {
            (DerivativeMode::Analytic, Some(jac)) => jac(n, z),
            _ => {
                let step = match self.mode {
                    DerivativeMode::CentralDifference { step } => step,
                    DerivativeMode::Analytic => 1e-6 * self.domain.min_radius(),
                };
                let mut jac = vec![ZERO; d * d];
                for i in 0..d {
                    let mut plus = z.to_vec();
                    let mut minus = z.to_vec();
                    plus[i] += step;
                    minus[i] -= step;
                    let fp = self.eval(n, &plus)?;
                    let fm = self.eval(n, &minus)?;
                    for k in 0..d {
                        jac[k * d + i] = (fp[k] - fm[k]) / (2.0 * step);
                    }
                }
                jac
            }
        };
        if jac.len() != d * d || !jac.iter().all(|c| is_finite(*c)) {
            return Err(Error::NonFinite(format!("Jacobian of f_{n} at {z:?}")));
        }
        Ok(jac)
    }

    /// `|(f_n)_*(z)|` in the Fubini–Study metric.
    pub fn fs_derivative(&self, n: usize, z: &[C64]) -> Result<f64> {
        let value = self.eval(n, z)?;
        let jac = self.jacobian(n, z)?;
        Ok(fs_norm(&value, &jac))
    }
}

/// Ready-made families used in examples and acceptance runs.
pub mod families {
    use super::*;

    /// `f_n(z) = n z` on the unit disk.
    pub fn linear_scaling() -> SampledFamily {
        let domain = Polydisk::disk(ZERO, 1.0).expect("unit disk");
        SampledFamily::new(domain, |n, z| vec![z[0] * n as f64])
            .with_jacobian(|n, _| vec![C64::new(n as f64, 0.0)])
    }

    /// `f_n(z) = z^n` on the disk of the given center and radius.
    pub fn power(center: C64, radius: f64) -> Result<SampledFamily> {
        let domain = Polydisk::disk(center, radius)?;
        Ok(SampledFamily::new(domain, |n, z| vec![z[0].powu(n as u32)])
            .with_jacobian(|n, z| {
                let d = if n == 0 {
                    ZERO
                } else {
                    z[0].powu(n as u32 - 1) * n as f64
                };
                vec![d]
            }))
    }

    /// The same constant for every index; a normal family.
    pub fn constant(value: C64) -> SampledFamily {
        let domain = Polydisk::disk(ZERO, 1.0).expect("unit disk");
        SampledFamily::new(domain, move |_, _| vec![value]).with_jacobian(|_, _| vec![ZERO])
    }

    /// Iterates `F^{∘n}` of an elementary map, realized as order-`order` jets,
    /// on the bidisk of radius `radius` about the origin.
    pub fn elementary_iterates(map: &ElementaryMap, order: usize, radius: f64) -> Result<SampledFamily> {
        let domain = Polydisk::new(vec![ZERO, ZERO], vec![radius, radius])?;
        let cache: Arc<dyn Fn(usize) -> PolyMap2 + Send + Sync> = {
            let map = map.clone();
            Arc::new(move |n| map.iterate_closed(n, order))
        };
        let eval_cache = cache.clone();
        Ok(SampledFamily::new(domain, move |n, z| {
            let it = eval_cache(n);
            let (a, b) = it.eval(z[0], z[1]);
            vec![a, b]
        })
        .with_jacobian(move |n, z| {
            let it = cache(n);
            let (_, dq) = it.q.evaluate_with_derivative(z[0]);
            vec![it.u_mult, ZERO, dq, it.v_mult]
        }))
    }
}

/// Euclidean distance in `C^d`.
pub fn euclidean(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// A finite sample of a metric space with a non-negative value per point.
pub struct MetricField<P, D> {
    points: Vec<P>,
    values: Vec<f64>,
    distance: D,
}

impl<P, D> MetricField<P, D>
where
    D: Fn(&P, &P) -> f64,
{
    /// Validates the values and spot-checks the metric axioms on random
    /// triples drawn with a fixed seed.
    pub fn new(points: Vec<P>, values: Vec<f64>, distance: D) -> Result<Self> {
        Self::with_seed(points, values, distance, 0x5eed)
    }

    pub fn with_seed(points: Vec<P>, values: Vec<f64>, distance: D, seed: u64) -> Result<Self> {
        if points.len() != values.len() || points.is_empty() {
            return Err(Error::Domain("metric field needs one value per point".into()));
        }
        if let Some(i) = values.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Domain(format!(
                "value {} at sample {i} is not a finite non-negative real",
                values[i]
            )));
        }
        let field = Self {
            points,
            values,
            distance,
        };
        field.check_axioms(seed)?;
        Ok(field)
    }

    fn check_axioms(&self, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = self.points.len();
        for _ in 0..256.min(len * len * len) {
            let (i, j, k) = (rng.gen_range(0..len), rng.gen_range(0..len), rng.gen_range(0..len));
            let (x, y, z) = (&self.points[i], &self.points[j], &self.points[k]);
            let dxy = (self.distance)(x, y);
            let dyx = (self.distance)(y, x);
            let dxz = (self.distance)(x, z);
            let dzy = (self.distance)(z, y);
            let tol = 1e-12 * (dxy + dxz + dzy).max(1.0);
            let ok = dxy.is_finite()
                && dxy >= 0.0
                && (self.distance)(x, x) <= tol
                && (dxy - dyx).abs() <= tol
                && dxy <= dxz + dzy + tol;
            if !ok {
                return Err(Error::Domain(format!(
                    "distance fails the metric axioms on samples ({i}, {j}, {k})"
                )));
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.distance)(&self.points[i], &self.points[j])
    }

    /// Exhaustive check of the three lemma conclusions for the pair `(u, v)`.
    pub fn certify(&self, u: usize, v: usize, sigma: f64) -> LemmaCertificate {
        let m_u = self.values[u];
        let m_v = self.values[v];
        let displacement = self.distance(u, v);
        let displacement_bound = 2.0 / (sigma * m_u);
        let ball_radius = 1.0 / (sigma * m_v);
        let ball_max = (0..self.points.len())
            .filter(|&x| self.distance(x, v) <= ball_radius)
            .map(|x| self.values[x])
            .fold(0.0, f64::max);
        LemmaCertificate {
            m_u,
            m_v,
            displacement,
            displacement_bound,
            ball_radius,
            ball_max,
        }
    }
}

/// Measured quantities behind the lemma's conclusions (i)–(iii).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCertificate {
    pub m_u: f64,
    pub m_v: f64,
    /// `d(u, v)`, bounded in (i) by `2/(σ M(u))`.
    pub displacement: f64,
    pub displacement_bound: f64,
    /// `1/(σ M(v))`.
    pub ball_radius: f64,
    /// Largest sampled value in the closed ball of that radius about `v`.
    pub ball_max: f64,
}

impl LemmaCertificate {
    pub fn displacement_ok(&self) -> bool {
        self.displacement <= self.displacement_bound
    }

    pub fn growth_ok(&self) -> bool {
        self.m_v >= self.m_u
    }

    pub fn ball_ok(&self) -> bool {
        self.ball_max <= 2.0 * self.m_v
    }

    pub fn holds(&self) -> bool {
        self.displacement_ok() && self.growth_ok() && self.ball_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaOutcome {
    /// Index of the returned point `v`.
    pub index: usize,
    /// Number of moves made from `u`.
    pub steps: usize,
    pub certificate: LemmaCertificate,
}

/// Walks from `u` to a point `v` satisfying, on the sample,
/// (i) `d(u,v) ≤ 2/(σM(u))`, (ii) `M(v) ≥ M(u)` and
/// (iii) `d(x,v) ≤ 1/(σM(v)) ⇒ M(x) ≤ 2M(v)`.
///
/// Each move goes to the largest violator of (iii), so `M` at least doubles
/// per step and the walk stops after at most `log2(max M / M(u)) + 1` moves.
pub fn metric_lemma_search<P, D>(field: &MetricField<P, D>, u: usize, sigma: f64) -> Result<LemmaOutcome>
where
    D: Fn(&P, &P) -> f64,
{
    if u >= field.points.len() {
        return Err(Error::Lookup(format!("sample index {u} out of range")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    if !(field.values[u] > 0.0) {
        return Err(Error::Domain("M(u) = 0: the lemma needs a point with positive value".into()));
    }
    let mut v = u;
    let mut steps = 0;
    loop {
        let m_v = field.values[v];
        let radius = 1.0 / (sigma * m_v);
        let violator = (0..field.points.len())
            .filter(|&x| field.values[x] > 2.0 * m_v && field.distance(x, v) <= radius)
            .fold(None, |best: Option<usize>, x| match best {
                Some(b) if field.values[b] >= field.values[x] => Some(b),
                _ => Some(x),
            });
        match violator {
            None => break,
            Some(x) => {
                v = x;
                steps += 1;
                if steps > field.points.len() {
                    return Err(Error::SearchFailure {
                        iterations: steps,
                        message: "lemma walk did not stop".into(),
                        trace: vec![field.values[v]],
                    });
                }
            }
        }
    }
    let certificate = field.certify(u, v, sigma);
    if !certificate.holds() {
        return Err(Error::Verification(format!(
            "lemma conclusions fail on the sample: {certificate:?}"
        )));
    }
    Ok(LemmaOutcome {
        index: v,
        steps,
        certificate,
    })
}

/// How the non-normality of a family is detected on the sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthCriterion {
    /// The last sup is at least `factor` times the first one.
    Ratio(f64),
    /// `sup_n ≥ n^2` for every index, as in the classical choice of `ξ_n`.
    QuadraticIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    /// Lattice points per real axis of each coordinate disk.
    pub grid: usize,
    pub growth: GrowthCriterion,
    /// Radial and angular resolution of the `|w| ≤ n` probe.
    pub probe_radial: usize,
    pub probe_angular: usize,
}

impl ExtractOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            grid: if dim == 1 { 101 } else { 11 },
            growth: GrowthCriterion::Ratio(10.0),
            probe_radial: 16,
            probe_angular: 24,
        }
    }
}

/// One rescaling triple with its certification data.
#[derive(Debug, Clone, PartialEq)]
pub struct RescalingEntry {
    pub n: usize,
    pub center: Vec<C64>,
    pub scale: f64,
    /// The starting point `ξ_n` of the lemma walk.
    pub anchor: Vec<C64>,
    /// `|(f_n)_*(ξ_n)|`.
    pub anchor_derivative: f64,
    /// Fubini–Study derivative of the rescaled map at `w = 0`.
    pub deriv0: f64,
    /// Largest derivative of the rescaled map found on the `|w| ≤ n` probe.
    pub sampled_bound: f64,
    /// Excess of off-lattice probe values over the nearest certified lattice value.
    pub grid_slack: f64,
    pub lemma: LemmaCertificate,
    pub lemma_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RescalingSequence {
    pub entries: Vec<RescalingEntry>,
}

impl RescalingSequence {
    pub fn get(&self, n: usize) -> Option<&RescalingEntry> {
        self.entries.iter().find(|e| e.n == n)
    }

    pub fn scales_non_increasing(&self) -> bool {
        self.entries.windows(2).all(|w| w[1].scale <= w[0].scale)
    }
}

/// Lattice of a polydisk: per-coordinate square lattices clipped to the disks.
struct Lattice {
    points: Vec<Vec<C64>>,
    index: HashMap<Vec<i64>, usize>,
    origin: Vec<C64>,
    step: Vec<f64>,
}

impl Lattice {
    fn new(domain: &Polydisk, grid: usize) -> Result<Self> {
        if grid < 2 {
            return Err(Error::Domain("lattice needs at least 2 points per axis".into()));
        }
        let d = domain.dim();
        let step: Vec<f64> = domain.radius.iter().map(|r| 2.0 * r / (grid - 1) as f64).collect();
        let origin: Vec<C64> = domain
            .center
            .iter()
            .zip(&domain.radius)
            .map(|(c, r)| c - C64::new(*r, *r))
            .collect();
        let per_coord: Vec<Vec<(i64, i64, C64)>> = (0..d)
            .map(|k| {
                let mut out = Vec::new();
                for i in 0..grid as i64 {
                    for j in 0..grid as i64 {
                        let z = origin[k] + C64::new(i as f64 * step[k], j as f64 * step[k]);
                        if (z - domain.center[k]).norm() <= domain.radius[k] * (1.0 + 1e-12) {
                            out.push((i, j, z));
                        }
                    }
                }
                out
            })
            .collect();
        let mut points = Vec::new();
        let mut index = HashMap::new();
        let mut push = |key: Vec<i64>, p: Vec<C64>| {
            index.insert(key, points.len());
            points.push(p);
        };
        if d == 1 {
            for &(i, j, z) in &per_coord[0] {
                push(vec![i, j], vec![z]);
            }
        } else {
            for &(i, j, z) in &per_coord[0] {
                for &(k, l, w) in &per_coord[1] {
                    push(vec![i, j, k, l], vec![z, w]);
                }
            }
        }
        Ok(Self {
            points,
            index,
            origin,
            step,
        })
    }

    /// Sample points among the lattice corners around `x`.
    fn corners(&self, x: &[C64]) -> Vec<usize> {
        let mut keys: Vec<Vec<i64>> = vec![Vec::new()];
        for (k, z) in x.iter().enumerate() {
            let rel = (z - self.origin[k]) / self.step[k];
            let mut next = Vec::new();
            for key in &keys {
                for a in [rel.re.floor(), rel.re.ceil()] {
                    for b in [rel.im.floor(), rel.im.ceil()] {
                        let mut kk = key.clone();
                        kk.push(a as i64);
                        kk.push(b as i64);
                        next.push(kk);
                    }
                }
            }
            keys = next;
        }
        let mut out: Vec<usize> = keys.iter().filter_map(|k| self.index.get(k).copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Extracts rescaling triples `(n, v_n, r_n)` for `n = 1..=count` near `v`.
pub fn zalcman_extract(
    family: &SampledFamily,
    v: &[C64],
    count: usize,
    options: &ExtractOptions,
) -> Result<RescalingSequence> {
    if !family.domain().contains(v) {
        return Err(Error::Domain(format!("base point {v:?} outside the family domain")));
    }
    if count == 0 {
        return Ok(RescalingSequence::default());
    }
    let mut lattice = Lattice::new(family.domain(), options.grid)?;
    let base = match lattice.points.iter().position(|p| euclidean(p, v) == 0.0) {
        Some(i) => i,
        None => {
            lattice.points.push(v.to_vec());
            lattice.points.len() - 1
        }
    };
    let points = &lattice.points;

    // derivative tables and the anchors ξ_n
    let mut tables = Vec::with_capacity(count);
    let mut anchors = Vec::with_capacity(count);
    let mut sups = Vec::with_capacity(count);
    for n in 1..=count {
        let values: Vec<f64> = points
            .par_iter()
            .map(|p| family.fs_derivative(n, p))
            .collect::<Result<_>>()?;
        let delta = family.domain().min_radius() / (n as f64).sqrt();
        let mut anchor = base;
        for (i, p) in points.iter().enumerate() {
            if euclidean(p, v) <= delta && values[i] > values[anchor] {
                anchor = i;
            }
        }
        sups.push(values[anchor]);
        anchors.push(anchor);
        tables.push(values);
    }
    check_growth(&sups, options.growth)?;

    let mut entries = Vec::with_capacity(count);
    for (idx, values) in tables.into_iter().enumerate() {
        let n = idx + 1;
        let anchor = anchors[idx];
        let field = MetricField::new(points.clone(), values, |a: &Vec<C64>, b: &Vec<C64>| {
            euclidean(a, b)
        })?;
        let sigma = 1.0 / n as f64;
        let outcome = metric_lemma_search(&field, anchor, sigma)?;
        let center = points[outcome.index].clone();
        let m_center = field.values()[outcome.index];
        let scale = 1.0 / m_center;
        let deriv0 = scale * family.fs_derivative(n, &center)?;
        let (sampled_bound, grid_slack) = probe_rescaled(
            family,
            &lattice,
            field.values(),
            n,
            &center,
            scale,
            outcome.certificate.ball_radius,
            options,
        )?;
        entries.push(RescalingEntry {
            n,
            center,
            scale,
            anchor: points[anchor].clone(),
            anchor_derivative: field.values()[anchor],
            deriv0,
            sampled_bound,
            grid_slack,
            lemma: outcome.certificate,
            lemma_steps: outcome.steps,
        });
    }
    Ok(RescalingSequence { entries })
}

fn check_growth(sups: &[f64], growth: GrowthCriterion) -> Result<()> {
    let ok = match growth {
        GrowthCriterion::Ratio(factor) => {
            let (first, last) = (sups[0], sups[sups.len() - 1]);
            last > 0.0 && last >= factor * first && sups.len() > 1
        }
        GrowthCriterion::QuadraticIndex => sups
            .iter()
            .enumerate()
            .all(|(i, s)| *s >= ((i + 1) * (i + 1)) as f64),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Diagnostic(format!(
            "no derivative blow-up detected ({growth:?}); sampled sups: {sups:?}"
        )))
    }
}

#[allow(clippy::too_many_arguments)]
fn probe_rescaled(
    family: &SampledFamily,
    lattice: &Lattice,
    values: &[f64],
    n: usize,
    center: &[C64],
    scale: f64,
    ball_radius: f64,
    options: &ExtractOptions,
) -> Result<(f64, f64)> {
    let points = &lattice.points;
    let directions = probe_directions(center.len(), options.probe_angular);
    let mut probes = Vec::new();
    for j in 0..=options.probe_radial {
        let t = n as f64 * j as f64 / options.probe_radial as f64;
        for e in &directions {
            let x: Vec<C64> = center.iter().zip(e).map(|(c, e)| c + e * (scale * t)).collect();
            if family.domain().contains(&x) {
                probes.push(x);
            }
        }
    }
    let center_value = points
        .iter()
        .position(|p| p.as_slice() == center)
        .map(|i| values[i])
        .unwrap_or(1.0 / scale);
    let results: Vec<(f64, f64)> = probes
        .par_iter()
        .map(|x| {
            let fs = scale * family.fs_derivative(n, x)?;
            let certified = lattice
                .corners(x)
                .into_iter()
                .filter(|&i| euclidean(&points[i], center) <= ball_radius)
                .min_by(|&a, &b| euclidean(&points[a], x).total_cmp(&euclidean(&points[b], x)))
                .map(|i| values[i])
                .unwrap_or(center_value);
            Ok((fs, (fs - scale * certified).max(0.0)))
        })
        .collect::<Result<_>>()?;
    Ok(results
        .into_iter()
        .fold((0.0, 0.0), |(b, s), (fs, slack)| (b.max(fs), s.max(slack))))
}

fn probe_directions(dim: usize, angular: usize) -> Vec<Vec<C64>> {
    let angular = angular.max(1);
    let phase = |k: usize| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / angular as f64);
    if dim == 1 {
        (0..angular).map(|k| vec![phase(k)]).collect()
    } else {
        let mut out = Vec::new();
        for &mix in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let phi = mix * std::f64::consts::FRAC_PI_2;
            for k in 0..angular {
                for l in (0..angular).step_by(angular.div_ceil(6).max(1)) {
                    out.push(vec![phase(k) * phi.cos(), phase(l) * phi.sin()]);
                }
            }
        }
        out
    }
}

/// `f_n(v_n + r_n w)` for an entry of the sequence.
pub fn rescaled_eval(family: &SampledFamily, seq: &RescalingSequence, n: usize, w: &[C64]) -> Result<Vec<C64>> {
    let entry = seq
        .get(n)
        .ok_or_else(|| Error::Lookup(format!("index {n} not in the rescaling sequence")))?;
    if w.len() != entry.center.len() {
        return Err(Error::Domain("rescaling point has the wrong dimension".into()));
    }
    let x: Vec<C64> = entry.center.iter().zip(w).map(|(c, w)| c + w * entry.scale).collect();
    family.eval(n, &x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn fs_examples() {
        let id = SampledFamily::new(Polydisk::disk(ZERO, 2.0).unwrap(), |_, z| vec![z[0]])
            .with_jacobian(|_, _| vec![re(1.0)]);
        assert_eq!(id.fs_derivative(1, &[ZERO]).unwrap(), 1.0);
        assert!((id.fs_derivative(1, &[re(1.0)]).unwrap() - 0.5).abs() < 1e-15);
        let c = families::constant(C64::new(0.3, 2.0));
        assert_eq!(c.fs_derivative(4, &[C64::new(0.1, 0.2)]).unwrap(), 0.0);
    }

    #[test]
    fn fs_norm_reduces_to_spherical_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let h = C64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let d = C64::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let a = fs_norm(&[h], &[d]);
            let b = spherical_derivative(h, d);
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn central_differences_track_the_analytic_derivative() {
        let f = families::power(re(1.0), 0.5).unwrap();
        let numeric = SampledFamily::new(f.domain().clone(), |n, z| vec![z[0].powu(n as u32)]);
        let z = [C64::new(0.9, 0.2)];
        let a = f.fs_derivative(7, &z).unwrap();
        let b = numeric.fs_derivative(7, &z).unwrap();
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let f = SampledFamily::new(Polydisk::disk(ZERO, 1.0).unwrap(), |_, z| vec![z[0].inv()]);
        assert!(matches!(f.fs_derivative(1, &[ZERO]), Err(Error::NonFinite(_))));
    }

    fn line_field(values: Vec<f64>, xs: Vec<f64>) -> MetricField<f64, impl Fn(&f64, &f64) -> f64> {
        MetricField::new(xs, values, |a: &f64, b: &f64| (a - b).abs()).unwrap()
    }

    #[test]
    fn lemma_constant_field_accepts_start() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let field = line_field(vec![3.0; 11], xs);
        let out = metric_lemma_search(&field, 4, 0.7).unwrap();
        assert_eq!(out.index, 4);
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn lemma_two_point_space() {
        let field = line_field(vec![1.0, 4.0], vec![0.0, 1.0]);
        let out = metric_lemma_search(&field, 0, 2.0).unwrap();
        assert_eq!(out.index, 0);
        assert!(out.certificate.holds());
        assert_eq!(out.certificate.ball_radius, 0.5);
    }

    #[test]
    fn lemma_exponential_grid_with_large_sigma() {
        let xs: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let values = xs.iter().map(|x| x.exp()).collect();
        let field = line_field(values, xs);
        let out = metric_lemma_search(&field, 0, 1e3).unwrap();
        assert_eq!(out.index, 0);
        assert!(out.certificate.holds());
    }

    #[test]
    fn lemma_walk_moves_and_certifies() {
        // a spike at 0.5 reachable from 0.45 when the ball is wide
        let xs: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let values: Vec<f64> = xs.iter().map(|x| 1.0 + 1e3 * (-(x - 0.5f64).powi(2) * 400.0).exp()).collect();
        let field = line_field(values.clone(), xs);
        let u = 40;
        let out = metric_lemma_search(&field, u, 0.01).unwrap();
        assert!(out.steps >= 1);
        assert!(out.certificate.holds());
        let max = values.iter().copied().fold(0.0, f64::max);
        let bound = (max / values[u]).log2().floor() as usize + 1;
        assert!(out.steps <= bound);
    }

    #[test]
    fn lemma_rejects_zero_start() {
        let field = line_field(vec![0.0, 1.0], vec![0.0, 1.0]);
        assert!(matches!(metric_lemma_search(&field, 0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn metric_field_rejects_non_metric() {
        let bad = MetricField::new(vec![0.0, 1.0, 3.0], vec![1.0; 3], |a: &f64, b: &f64| (a - b).powi(2));
        assert!(bad.is_err());
        let neg = MetricField::new(vec![0.0, 1.0], vec![1.0, -1.0], |a: &f64, b: &f64| (a - b).abs());
        assert!(neg.is_err());
    }

    #[test]
    fn extract_linear_scaling() {
        let family = families::linear_scaling();
        let seq = zalcman_extract(&family, &[ZERO], 12, &ExtractOptions::for_dim(1)).unwrap();
        for e in &seq.entries {
            assert_eq!(e.center, vec![ZERO]);
            assert!((e.scale * e.n as f64 - 1.0).abs() < 1e-12);
            assert!((e.deriv0 - 1.0).abs() < 1e-12);
            assert!(e.sampled_bound <= 2.0 + e.grid_slack);
            let w = [C64::new(0.3, -0.4)];
            let hw = rescaled_eval(&family, &seq, e.n, &w).unwrap();
            assert!((hw[0] - w[0]).norm() < 1e-12);
        }
        assert!(seq.scales_non_increasing());
    }

    #[test]
    fn extract_rejects_normal_family() {
        let family = families::constant(re(0.5));
        let err = zalcman_extract(&family, &[ZERO], 10, &ExtractOptions::for_dim(1)).unwrap_err();
        assert!(matches!(err, Error::Diagnostic(_)));
    }

    #[test]
    fn extract_power_family_scale_is_inverse_linear() {
        let family = families::power(re(1.0), 0.5).unwrap();
        let seq = zalcman_extract(&family, &[re(1.0)], 60, &ExtractOptions::for_dim(1)).unwrap();
        for e in seq.entries.iter().filter(|e| e.n >= 10) {
            let ratio = e.scale * e.n as f64;
            assert!((0.2..=5.0).contains(&ratio), "n = {}, r_n n = {ratio}", e.n);
            assert!(e.lemma.holds());
            assert!((e.deriv0 - 1.0).abs() < 1e-9);
            assert!(e.sampled_bound <= 2.0 + e.grid_slack);
        }
    }

    #[test]
    fn rescaled_eval_examples() {
        let family = families::linear_scaling();
        let seq = zalcman_extract(&family, &[ZERO], 12, &ExtractOptions::for_dim(1)).unwrap();
        let e = seq.get(3).unwrap();
        assert_eq!(
            rescaled_eval(&family, &seq, 3, &[ZERO]).unwrap(),
            family.eval(3, &e.center).unwrap()
        );
        assert!(matches!(rescaled_eval(&family, &seq, 99, &[ZERO]), Err(Error::Lookup(_))));
        let manual = RescalingSequence {
            entries: vec![RescalingEntry {
                n: 4,
                center: vec![ZERO],
                scale: 0.25,
                ..e.clone()
            }],
        };
        let v = rescaled_eval(&family, &manual, 4, &[re(1.0)]).unwrap();
        assert!((v[0] - re(1.0)).norm() < 1e-15);
        let unit = RescalingSequence {
            entries: vec![RescalingEntry {
                n: 2,
                center: vec![ZERO],
                scale: 1.0,
                ..e.clone()
            }],
        };
        let w = [C64::new(0.2, 0.1)];
        assert_eq!(rescaled_eval(&family, &unit, 2, &w).unwrap(), family.eval(2, &w).unwrap());
    }

    #[test]
    fn elementary_iterates_blow_up_at_the_origin() {
        let map = ElementaryMap::real_polynomial(2.0, 3.0, &[0.0, 0.0, 1.0]);
        let family = families::elementary_iterates(&map, 8, 1.0).unwrap();
        let mut prev = 0.0;
        for n in 1..=30 {
            let d = family.fs_derivative(n, &[ZERO, ZERO]).unwrap();
            assert!((d - 3f64.powi(n as i32)).abs() <= 1e-9 * d);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn two_dimensional_extraction_certifies() {
        let map = ElementaryMap::real_polynomial(2.0, 3.0, &[0.0, 0.0, 1.0]);
        let family = families::elementary_iterates(&map, 8, 0.5).unwrap();
        let options = ExtractOptions {
            grid: 7,
            ..ExtractOptions::for_dim(2)
        };
        let seq = zalcman_extract(&family, &[ZERO, ZERO], 6, &options).unwrap();
        for e in &seq.entries {
            assert!(e.lemma.holds());
            assert!((e.deriv0 - 1.0).abs() < 1e-9);
            assert!(e.sampled_bound <= 2.0 + e.grid_slack);
        }
    }
}
