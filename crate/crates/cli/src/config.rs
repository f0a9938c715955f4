//! TOML experiment configuration.
//!
//! A config names one mode and carries the sections that mode reads. Unknown
//! keys are rejected so that typos surface as config errors rather than as
//! silently ignored settings.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use holorenorm::correspondence::{AlgebraicPart, AlgebraicTerm, ElementaryCorrespondence, Exponent};
use holorenorm::elementary::{ElementaryMap, RenormPlan, ScanParams};
use holorenorm::{CoefficientRule, C64};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Iterate,
    Renorm,
    Limit,
    Scan,
    Zalcman,
    Counterexample,
    Correspondence,
    Basin,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Iterate,
        Mode::Renorm,
        Mode::Limit,
        Mode::Scan,
        Mode::Zalcman,
        Mode::Counterexample,
        Mode::Correspondence,
        Mode::Basin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Iterate => "iterate",
            Mode::Renorm => "renorm",
            Mode::Limit => "limit",
            Mode::Scan => "scan",
            Mode::Zalcman => "zalcman",
            Mode::Counterexample => "counterexample",
            Mode::Correspondence => "correspondence",
            Mode::Basin => "basin",
        }
    }

    fn needs_map(self) -> bool {
        matches!(
            self,
            Mode::Iterate | Mode::Renorm | Mode::Limit | Mode::Scan | Mode::Counterexample
        )
    }

    fn needs_plan(self) -> bool {
        matches!(self, Mode::Renorm | Mode::Limit | Mode::Scan)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Config(format!("mode: unknown mode {s:?}")))
    }
}

/// A complex number written as `x` or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CValue {
    Real(f64),
    Pair([f64; 2]),
}

impl CValue {
    pub fn to_c64(self) -> C64 {
        match self {
            CValue::Real(x) => C64::new(x, 0.0),
            CValue::Pair([re, im]) => C64::new(re, im),
        }
    }

    fn checked(self, field: &str) -> Result<C64, CliError> {
        let z = self.to_c64();
        if z.re.is_finite() && z.im.is_finite() {
            Ok(z)
        } else {
            Err(CliError::Config(format!("{field}: must be finite")))
        }
    }
}

impl From<C64> for CValue {
    fn from(z: C64) -> Self {
        if z.im == 0.0 {
            CValue::Real(z.re)
        } else {
            CValue::Pair([z.re, z.im])
        }
    }
}

/// `"auto"` or a positive integer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truncation {
    Fixed(usize),
    Named(String),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Named("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub alpha: CValue,
    pub beta: CValue,
    /// Polynomial coefficients of `h`, lowest degree first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<CValue>>,
    /// Named rule for `h`: `"exp_minus_one"` or `"zero"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_rule: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenormSection {
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default = "default_order")]
    pub order: usize,
}

impl Default for RenormSection {
    fn default() -> Self {
        Self {
            truncation: Truncation::default(),
            order: default_order(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            radius: default_radius(),
            grid: default_grid(),
            n_list: default_n_list(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateSection {
    #[serde(default = "default_iterate_n")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_iterate_order")]
    pub order: usize,
    /// Random points used to cross-check the closed form against pointwise iteration.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for IterateSection {
    fn default() -> Self {
        Self {
            n_list: default_iterate_n(),
            order: default_iterate_order(),
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self { k_max: default_k_max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZalcmanSection {
    /// `"linear"` (`nz` on the unit disk), `"power"` (`z^n`) or
    /// `"elementary"` (iterates of `[map]` on a bidisk).
    pub family: String,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Base point `v`; one entry per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<CValue>>,
    /// Disk center for the power family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<CValue>,
    #[serde(default = "default_zalcman_radius")]
    pub radius: f64,
    /// `"ratio"` or `"quadratic"`.
    #[serde(default = "default_growth")]
    pub growth: String,
    #[serde(default = "default_growth_factor")]
    pub growth_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// `"analytic"` or `"difference"`.
    #[serde(default = "default_derivative")]
    pub derivative: String,
    #[serde(default = "default_iterate_order")]
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraicTermSection {
    pub coeff: CValue,
    pub branch_point: CValue,
    /// Rational exponent such as `"1/2"`.
    pub exponent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrespondenceSection {
    pub c1: CValue,
    pub c2: CValue,
    /// Polynomial coefficients of the entire part.
    #[serde(default)]
    pub entire: Vec<CValue>,
    #[serde(default)]
    pub terms: Vec<AlgebraicTermSection>,
    /// Subtract the branch value at 0 so that `h(0) = 0`.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialSection {
    pub coeff: CValue,
    pub i: u32,
    pub j: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    pub first: Vec<MonomialSection>,
    pub second: Vec<MonomialSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSection {
    /// `"shear_conjugate"`, `"elementary"` (from `[map]`) or `"custom"`.
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<CValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<CValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear: Option<CValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward: Option<PairSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<PairSection>,
    /// Conjugate by the shift `x ↦ x + translate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translate: Option<[CValue; 2]>,
    #[serde(default = "default_guess")]
    pub guess: [CValue; 2],
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default = "default_jet_degree")]
    pub jet_degree: usize,
    #[serde(default = "default_probe_radius")]
    pub probe_radius: f64,
    #[serde(default = "default_probe_grid")]
    pub probe_grid: usize,
    #[serde(default)]
    pub truncation: Truncation,
}

/// The file as written, after defaults; echoed into the manifest with
/// `auto` truncations replaced by the resolved degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    /// Largest acceptable headline error for the mode; exceeded → exit 4.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub renorm: Option<RenormSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterate: Option<IterateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zalcman: Option<ZalcmanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correspondence: Option<CorrespondenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinSection>,
}

fn default_order() -> usize {
    holorenorm::series::DEFAULT_ORDER
}
fn default_radius() -> f64 {
    1.0
}
fn default_grid() -> usize {
    21
}
fn default_n_list() -> Vec<usize> {
    (1..=10).map(|k| 5 * k).collect()
}
fn default_iterate_n() -> Vec<usize> {
    vec![1, 2, 3, 4, 5]
}
fn default_iterate_order() -> usize {
    16
}
fn default_samples() -> usize {
    32
}
fn default_k_max() -> usize {
    50
}
fn default_count() -> usize {
    50
}
fn default_zalcman_radius() -> f64 {
    1.0
}
fn default_growth() -> String {
    "ratio".into()
}
fn default_growth_factor() -> f64 {
    10.0
}
fn default_derivative() -> String {
    "analytic".into()
}
fn default_true() -> bool {
    true
}
fn default_guess() -> [CValue; 2] {
    [CValue::Real(0.1), CValue::Real(0.1)]
}
fn default_depths() -> Vec<usize> {
    vec![5, 10, 15, 20]
}
fn default_jet_degree() -> usize {
    holorenorm::basin::DEFAULT_JET_DEGREE
}
fn default_probe_radius() -> f64 {
    holorenorm::basin::DEFAULT_PROBE_RADIUS
}
fn default_probe_grid() -> usize {
    holorenorm::basin::DEFAULT_PROBE_GRID
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Defaults filled in and truncations resolved where known at parse time.
    pub echo: RawConfig,
    pub map: Option<ElementaryMap>,
    pub plan: Option<RenormPlan>,
    pub scan: ScanParams,
    pub correspondence: Option<ElementaryCorrespondence>,
    /// Truncation for the correspondence's entire reduction.
    pub corr_plan: Option<RenormPlan>,
    pub tolerance: Option<f64>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 0x5eed;

/// Reads and validates `path`; `mode` (from the command line) must agree
/// with a `mode` key in the file when both are present.
pub fn parse_config(path: &Path, mode: Option<Mode>) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config_str(&text, mode)
}

pub fn parse_config_str(text: &str, mode: Option<Mode>) -> Result<ExperimentConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    validate(raw, mode)
}

fn validate(mut raw: RawConfig, cli_mode: Option<Mode>) -> Result<ExperimentConfig, CliError> {
    let mode = match (cli_mode, raw.mode) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::Config(format!(
                "mode: command line says {a} but the config says {b}"
            )))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::Config("mode: missing".into())),
    };
    raw.mode = Some(mode);
    if let Some(t) = raw.tolerance {
        positive("tolerance", t)?;
    }

    let map = match (&raw.map, mode.needs_map()) {
        (Some(section), _) => Some(build_map(section)?),
        (None, true) => return Err(CliError::Config("map: section required".into())),
        (None, false) => None,
    };

    let uses_scan = matches!(mode, Mode::Renorm | Mode::Scan | Mode::Correspondence);
    let uses_renorm = uses_scan || mode == Mode::Limit;
    let scan_section = raw.scan.clone().unwrap_or_default();
    let renorm_section = raw.renorm.clone().unwrap_or_default();
    positive("scan.radius", scan_section.radius)?;
    if scan_section.grid < 2 {
        return Err(CliError::Config("scan.grid: must be at least 2".into()));
    }
    if renorm_section.order == 0 {
        return Err(CliError::Config("renorm.order: must be at least 1".into()));
    }
    let mut scan = ScanParams::new(scan_section.radius, scan_section.grid, scan_section.n_list.clone());
    scan.order = renorm_section.order;
    if uses_scan {
        raw.scan = Some(scan_section);
    }
    if uses_renorm {
        raw.renorm = Some(renorm_section);
    }

    let mut plan = None;
    if mode.needs_plan() {
        let map = map.as_ref().expect("map checked above");
        let renorm = raw.renorm.as_mut().expect("renorm defaulted above");
        let n = resolve_truncation(&renorm.truncation, "renorm.truncation", || {
            map.min_truncation_degree()
        })?;
        renorm.truncation = Truncation::Fixed(n);
        plan = Some(RenormPlan::validate(map, n)?);
    }

    match mode {
        Mode::Iterate => {
            raw.iterate.get_or_insert_with(IterateSection::default);
        }
        Mode::Counterexample => {
            raw.counterexample.get_or_insert_with(CounterexampleSection::default);
        }
        Mode::Zalcman => {
            let z = raw
                .zalcman
                .as_ref()
                .ok_or_else(|| CliError::Config("zalcman: section required".into()))?;
            check_zalcman(z, map.is_some())?;
        }
        Mode::Basin => {
            let b = raw
                .basin
                .as_ref()
                .ok_or_else(|| CliError::Config("basin: section required".into()))?;
            check_basin(b, map.is_some())?;
        }
        _ => {}
    }

    let (correspondence, corr_plan) = if mode == Mode::Correspondence {
        let section = raw
            .correspondence
            .as_ref()
            .ok_or_else(|| CliError::Config("correspondence: section required".into()))?;
        let corr = build_correspondence(section)?;
        let renorm = raw.renorm.as_mut().expect("renorm defaulted above");
        let reduction = corr.entire_reduction();
        let n = resolve_truncation(&renorm.truncation, "renorm.truncation", || {
            reduction.min_truncation_degree()
        })?;
        renorm.truncation = Truncation::Fixed(n);
        let plan = RenormPlan::validate(&reduction, n)?;
        (Some(corr), Some(plan))
    } else {
        (None, None)
    };

    Ok(ExperimentConfig {
        mode,
        tolerance: raw.tolerance,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        echo: raw,
        map,
        plan,
        scan,
        correspondence,
        corr_plan,
    })
}

pub(crate) fn resolve_truncation(
    t: &Truncation,
    field: &str,
    auto: impl FnOnce() -> holorenorm::Result<usize>,
) -> Result<usize, CliError> {
    match t {
        Truncation::Fixed(0) => Err(CliError::Config(format!("{field}: must be at least 1"))),
        Truncation::Fixed(n) => Ok(*n),
        Truncation::Named(s) if s == "auto" => Ok(auto()?),
        Truncation::Named(s) => Err(CliError::Config(format!(
            "{field}: expected \"auto\" or a positive integer, got {s:?}"
        ))),
    }
}

fn positive(field: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{field}: must be positive and finite")))
    }
}

fn coefficients(values: &[CValue], field: &str) -> Result<Vec<C64>, CliError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v.checked(&format!("{field}[{i}]")))
        .collect()
}

fn build_map(section: &MapSection) -> Result<ElementaryMap, CliError> {
    let alpha = section.alpha.checked("map.alpha")?;
    let beta = section.beta.checked("map.beta")?;
    let h = match (&section.h, &section.h_rule) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("map: give either h or h_rule, not both".into()))
        }
        (Some(coeffs), None) => {
            let c = coefficients(coeffs, "map.h")?;
            if c.is_empty() {
                CoefficientRule::zero()
            } else {
                CoefficientRule::polynomial(c)
            }
        }
        (None, Some(rule)) => match rule.as_str() {
            "exp_minus_one" => CoefficientRule::exp_minus_one(),
            "zero" => CoefficientRule::zero(),
            other => return Err(CliError::Config(format!("map.h_rule: unknown rule {other:?}"))),
        },
        (None, None) => return Err(CliError::Config("map: one of h or h_rule is required".into())),
    };
    Ok(ElementaryMap::new(alpha, beta, h)?)
}

fn build_correspondence(section: &CorrespondenceSection) -> Result<ElementaryCorrespondence, CliError> {
    let c1 = section.c1.checked("correspondence.c1")?;
    let c2 = section.c2.checked("correspondence.c2")?;
    let entire = coefficients(&section.entire, "correspondence.entire")?;
    let entire = if entire.is_empty() {
        CoefficientRule::zero()
    } else {
        CoefficientRule::polynomial(entire)
    };
    let mut terms = Vec::with_capacity(section.terms.len());
    for (i, t) in section.terms.iter().enumerate() {
        let field = format!("correspondence.terms[{i}]");
        let exponent: Exponent = t
            .exponent
            .parse()
            .map_err(|e: holorenorm::Error| CliError::Config(format!("{field}.exponent: {e}")))?;
        terms.push(AlgebraicTerm::new(
            t.coeff.checked(&format!("{field}.coeff"))?,
            t.branch_point.checked(&format!("{field}.branch_point"))?,
            exponent,
        ));
    }
    let mut part = AlgebraicPart::new(terms)?;
    if section.normalize {
        part = part.normalized();
    }
    Ok(ElementaryCorrespondence::new(c1, c2, entire, part)?)
}

fn check_zalcman(z: &ZalcmanSection, has_map: bool) -> Result<(), CliError> {
    match z.family.as_str() {
        "linear" | "power" => {}
        "elementary" if has_map => {}
        "elementary" => {
            return Err(CliError::Config(
                "zalcman.family: \"elementary\" needs a [map] section".into(),
            ))
        }
        other => return Err(CliError::Config(format!("zalcman.family: unknown family {other:?}"))),
    }
    if z.count == 0 {
        return Err(CliError::Config("zalcman.count: must be at least 1".into()));
    }
    positive("zalcman.radius", z.radius)?;
    if !matches!(z.growth.as_str(), "ratio" | "quadratic") {
        return Err(CliError::Config(format!("zalcman.growth: unknown criterion {:?}", z.growth)));
    }
    positive("zalcman.growth_factor", z.growth_factor)?;
    if !matches!(z.derivative.as_str(), "analytic" | "difference") {
        return Err(CliError::Config(format!("zalcman.derivative: unknown mode {:?}", z.derivative)));
    }
    if let Some(g) = z.grid {
        if g < 2 {
            return Err(CliError::Config("zalcman.grid: must be at least 2".into()));
        }
    }
    Ok(())
}

fn check_basin(b: &BasinSection, has_map: bool) -> Result<(), CliError> {
    match b.preset.as_str() {
        "shear_conjugate" => {
            if b.lambda1.is_none() || b.lambda2.is_none() {
                return Err(CliError::Config(
                    "basin: shear_conjugate needs lambda1 and lambda2".into(),
                ));
            }
        }
        "elementary" if !has_map => {
            return Err(CliError::Config("basin: preset elementary needs a [map] section".into()))
        }
        "elementary" => {}
        "custom" => {
            if b.forward.is_none() || b.inverse.is_none() {
                return Err(CliError::Config("basin: custom needs forward and inverse".into()));
            }
        }
        other => return Err(CliError::Config(format!("basin.preset: unknown preset {other:?}"))),
    }
    if b.jet_degree == 0 {
        return Err(CliError::Config("basin.jet_degree: must be at least 1".into()));
    }
    positive("basin.probe_radius", b.probe_radius)?;
    if b.probe_grid < 2 {
        return Err(CliError::Config("basin.probe_grid: must be at least 2".into()));
    }
    if b.depths.is_empty() {
        return Err(CliError::Config("basin.depths: must not be empty".into()));
    }
    Ok(())
}
