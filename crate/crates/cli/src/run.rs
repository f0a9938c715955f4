//! Mode drivers. Each produces its tables in memory; nothing touches the
//! output directory until every computation of the run has succeeded.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use holorenorm::basin::{
    conjugation_approx, pushed_renorm_family, Automorphism2D, ConjugationOptions, PolyAutomorphism, ProbeGrid,
};
use holorenorm::elementary::{linear_renorm_coefficient, ElementaryMap, HypothesisReport, RenormPlan};
use holorenorm::poly2::{BiPoly, PolyPair};
use holorenorm::zalcman::{families, zalcman_extract, ExtractOptions, GrowthCriterion, SampledFamily};
use holorenorm::{CoefficientRule, C64};

use crate::config::{resolve_truncation, BasinSection, CValue, ExperimentConfig, Mode, PairSection, ZalcmanSection};
use crate::table::{complex, int, num, Table};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    /// Mode-specific facts recorded in the manifest.
    pub summary: Value,
    /// Which inequalities were checked, with their margins.
    pub hypotheses: Value,
    /// The error compared against the tolerance, when the mode has one.
    pub headline: Option<(String, f64)>,
    /// Resolved settings known only at run time (e.g. an automatic truncation).
    pub resolved: Value,
}

impl RunOutput {
    fn new(tables: Vec<Table>) -> Self {
        Self {
            tables,
            summary: json!({}),
            hypotheses: json!({}),
            headline: None,
            resolved: json!({}),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn check_tolerance(&self, tolerance: Option<f64>) -> Result<(), CliError> {
        match (tolerance, &self.headline) {
            (Some(tol), Some((label, value))) if !(*value <= tol) => Err(CliError::Tolerance(format!(
                "{label} = {value:e} exceeds {tol:e}"
            ))),
            _ => Ok(()),
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    match cfg.mode {
        Mode::Iterate => run_iterate(cfg),
        Mode::Renorm => run_renorm(cfg),
        Mode::Limit => run_limit(cfg),
        Mode::Scan => run_scan(cfg),
        Mode::Zalcman => run_zalcman(cfg),
        Mode::Counterexample => run_counterexample(cfg),
        Mode::Correspondence => run_correspondence(cfg),
        Mode::Basin => run_basin(cfg),
    }
}

fn map_of(cfg: &ExperimentConfig) -> &ElementaryMap {
    cfg.map.as_ref().expect("validated config has a map")
}

fn plan_of(cfg: &ExperimentConfig) -> &RenormPlan {
    cfg.plan.as_ref().expect("validated config has a plan")
}

pub fn hypothesis_record(plan: &RenormPlan) -> Value {
    let HypothesisReport {
        alpha_abs,
        beta_abs,
        alpha_pow,
        alpha_margin,
        beta_margin,
        truncation_margin,
    } = plan.report;
    json!({
        "truncation": plan.truncation,
        "rate": plan.rate,
        "checked": [
            {"inequality": "|alpha| > 1", "value": alpha_abs, "margin": alpha_margin},
            {"inequality": "|beta| > 1", "value": beta_abs, "margin": beta_margin},
            {"inequality": "|beta| < |alpha|^N", "value": alpha_pow, "margin": truncation_margin},
        ],
    })
}

fn run_iterate(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let map = map_of(cfg);
    let section = cfg.echo.iterate.clone().unwrap_or_default();
    let mut table = Table::new("iterate", &["n", "kind", "degree", "re", "im"]);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let points: Vec<(C64, C64)> = (0..section.samples)
        .map(|_| {
            let mut disk = || C64::from_polar(0.5 * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * std::f64::consts::TAU);
            (disk(), disk())
        })
        .collect();
    let mut deviation: f64 = 0.0;
    for &n in &section.n_list {
        let it = map.iterate_closed(n, section.order);
        let [re, im] = complex(it.u_mult);
        table.push(vec![int(n), "u_mult".into(), String::new(), re, im]);
        let [re, im] = complex(it.v_mult);
        table.push(vec![int(n), "v_mult".into(), String::new(), re, im]);
        for (d, c) in it.q.coeffs().iter().enumerate() {
            let [re, im] = complex(*c);
            table.push(vec![int(n), "q".into(), int(d), re, im]);
        }
        for &(u, v) in &points {
            let (a, b) = it.eval(u, v);
            let (mut x, mut y) = (u, v);
            for _ in 0..n {
                (x, y) = map.eval(x, y)?;
            }
            let scale = x.norm().max(y.norm()).max(1.0);
            deviation = deviation.max((a - x).norm().max((b - y).norm()) / scale);
        }
    }
    let mut out = RunOutput::new(vec![table]);
    out.summary = json!({
        "pointwise_check": {"samples": points.len(), "radius": 0.5, "max_relative_deviation": deviation},
    });
    out.headline = Some(("max_relative_deviation".into(), deviation));
    Ok(out)
}

fn run_renorm(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let map = map_of(cfg);
    let plan = plan_of(cfg);
    let mut table = Table::new("renorm", &["n", "degree", "psi_n_re", "psi_n_im"]);
    for &n in &cfg.scan.n_list {
        let r = map.renorm_compose(plan.truncation, n, cfg.scan.order)?;
        for (d, c) in r.q.coeffs().iter().enumerate() {
            let [re, im] = complex(*c);
            table.push(vec![int(n), int(d), re, im]);
        }
    }
    let mut out = RunOutput::new(vec![table]);
    out.hypotheses = hypothesis_record(plan);
    Ok(out)
}

fn limit_table(name: &str, psi: &holorenorm::Jet) -> Table {
    let mut table = Table::new(name, &["degree", "psi_re", "psi_im"]);
    for (d, c) in psi.coeffs().iter().enumerate() {
        let [re, im] = complex(*c);
        table.push(vec![int(d), re, im]);
    }
    table
}

fn run_limit(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let plan = plan_of(cfg);
    let psi = map_of(cfg).limit_psi(plan.truncation, cfg.scan.order)?;
    let mut out = RunOutput::new(vec![limit_table("limit", &psi)]);
    out.hypotheses = hypothesis_record(plan);
    Ok(out)
}

fn scan_table(rows: &[holorenorm::elementary::ScanRow]) -> Table {
    let mut table = Table::new("scan", &["n", "sup_error"]);
    for r in rows {
        table.push(vec![int(r.n), num(r.sup_error)]);
    }
    table
}

/// Ratio of a least-squares geometric fit `err ≈ C q^n`, over positive errors.
pub fn fitted_ratio(rows: &[holorenorm::elementary::ScanRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.sup_error > 0.0 && r.sup_error.is_finite())
        .map(|r| (r.n as f64, r.sup_error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).exp())
}

fn run_scan(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let plan = plan_of(cfg);
    let rows = map_of(cfg).convergence_scan(plan.truncation, &cfg.scan)?;
    let mut out = RunOutput::new(vec![scan_table(&rows)]);
    out.summary = json!({"fitted_ratio": fitted_ratio(&rows), "rate_bound": plan.rate});
    out.hypotheses = hypothesis_record(plan);
    out.headline = rows.last().map(|r| ("sup_error".to_string(), r.sup_error));
    Ok(out)
}

fn run_counterexample(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let map = map_of(cfg);
    let k_max = cfg.echo.counterexample.clone().unwrap_or_default().k_max;
    let (alpha, beta) = (map.alpha(), map.beta());
    let coefs: Vec<C64> = (1..=k_max + 1)
        .map(|k| linear_renorm_coefficient(alpha, beta, k))
        .collect::<holorenorm::Result<_>>()?;
    let mut table = Table::new("counterexample", &["k", "coef_re", "coef_im", "abs", "ratio"]);
    for k in 1..=k_max {
        let c = coefs[k - 1];
        let [re, im] = complex(c);
        table.push(vec![int(k), re, im, num(c.norm()), num(coefs[k].norm() / c.norm())]);
    }
    let mut out = RunOutput::new(vec![table]);
    let c = alpha * alpha / beta;
    out.summary = json!({"c_abs": c.norm(), "expected_ratio": c.norm().max(1.0)});
    Ok(out)
}

fn zalcman_family(z: &ZalcmanSection, cfg: &ExperimentConfig) -> Result<SampledFamily, CliError> {
    let family = match z.family.as_str() {
        "linear" => families::linear_scaling(),
        "power" => families::power(z.center.map(CValue::to_c64).unwrap_or_default(), z.radius)?,
        _ => families::elementary_iterates(map_of(cfg), z.order, z.radius)?,
    };
    Ok(if z.derivative == "difference" {
        let step = 1e-6 * family.domain().min_radius();
        family.with_difference_step(step)?
    } else {
        family
    })
}

fn run_zalcman(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let z = cfg.echo.zalcman.as_ref().expect("validated zalcman section");
    let family = zalcman_family(z, cfg)?;
    let dim = family.dim();
    let v: Vec<C64> = match &z.point {
        Some(p) if p.len() == dim => p.iter().map(|c| c.to_c64()).collect(),
        Some(p) => {
            return Err(CliError::Config(format!(
                "zalcman.point: {} coordinates for a family of dimension {dim}",
                p.len()
            )))
        }
        None => family.domain().center.clone(),
    };
    let mut options = ExtractOptions::for_dim(dim);
    if let Some(g) = z.grid {
        options.grid = g;
    }
    options.growth = match z.growth.as_str() {
        "quadratic" => GrowthCriterion::QuadraticIndex,
        _ => GrowthCriterion::Ratio(z.growth_factor),
    };
    let seq = zalcman_extract(&family, &v, z.count, &options)?;
    let mut header = vec!["n", "v_re", "v_im", "r", "deriv0"];
    if dim == 2 {
        header.extend(["v2_re", "v2_im"]);
    }
    let mut main = Table::new("zalcman", &header);
    let mut lemma = Table::new(
        "zalcman_lemma",
        &[
            "n",
            "m_u",
            "m_v",
            "displacement",
            "displacement_bound",
            "ball_radius",
            "ball_max",
            "lemma_steps",
            "sampled_bound",
            "grid_slack",
            "holds",
        ],
    );
    for e in &seq.entries {
        let [re, im] = complex(e.center[0]);
        let mut row = vec![int(e.n), re, im, num(e.scale), num(e.deriv0)];
        if dim == 2 {
            row.extend(complex(e.center[1]));
        }
        main.push(row);
        let c = &e.lemma;
        lemma.push(vec![
            int(e.n),
            num(c.m_u),
            num(c.m_v),
            num(c.displacement),
            num(c.displacement_bound),
            num(c.ball_radius),
            num(c.ball_max),
            int(e.lemma_steps),
            num(e.sampled_bound),
            num(e.grid_slack),
            c.holds().to_string(),
        ]);
    }
    let mut out = RunOutput::new(vec![main, lemma]);
    out.summary = json!({
        "dim": dim,
        "grid": options.grid,
        "scales_non_increasing": seq.scales_non_increasing(),
        "all_lemma_certificates_hold": seq.entries.iter().all(|e| e.lemma.holds()),
    });
    Ok(out)
}

fn run_correspondence(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let corr = cfg.correspondence.as_ref().expect("validated correspondence");
    let plan = cfg.corr_plan.as_ref().expect("validated correspondence plan");
    let rows = corr.corr_scan(plan.truncation, &cfg.scan)?;
    let psi = corr.corr_limit(plan.truncation, cfg.scan.order)?;
    let mut scan = scan_table(&rows);
    scan.name = "correspondence".into();
    let mut out = RunOutput::new(vec![scan, limit_table("correspondence_limit", &psi)]);
    out.summary = json!({
        "rho": finite_or_null(corr.rho()),
        "fitted_ratio": fitted_ratio(&rows),
        "rate_bound": plan.rate,
    });
    out.hypotheses = hypothesis_record(plan);
    out.headline = rows.last().map(|r| ("sup_error".to_string(), r.sup_error));
    Ok(out)
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn pair_of(section: &PairSection) -> PolyPair {
    let poly = |terms: &[crate::config::MonomialSection]| {
        BiPoly::from_terms(terms.iter().map(|m| (m.coeff.to_c64(), m.i, m.j)))
    };
    PolyPair::new(poly(&section.first), poly(&section.second))
}

fn basin_map(b: &BasinSection, cfg: &ExperimentConfig) -> Result<PolyAutomorphism, CliError> {
    let map = match b.preset.as_str() {
        "shear_conjugate" => PolyAutomorphism::shear_conjugate(
            b.lambda1.expect("validated").to_c64(),
            b.lambda2.expect("validated").to_c64(),
            b.shear.map(CValue::to_c64).unwrap_or(C64::new(1.0, 0.0)),
        )?,
        "elementary" => PolyAutomorphism::from_elementary(map_of(cfg))?,
        _ => PolyAutomorphism::new(
            pair_of(b.forward.as_ref().expect("validated")),
            pair_of(b.inverse.as_ref().expect("validated")),
        )?,
    };
    Ok(match b.translate {
        Some([x, y]) => map.translated([x.to_c64(), y.to_c64()])?,
        None => map,
    })
}

fn run_basin(cfg: &ExperimentConfig) -> Result<RunOutput, CliError> {
    let b = cfg.echo.basin.as_ref().expect("validated basin section");
    let map = basin_map(b, cfg)?;
    let guess = [b.guess[0].to_c64(), b.guess[1].to_c64()];
    let h = Automorphism2D::locate(map, guess)?;
    let probe = ProbeGrid::new(b.probe_radius, b.probe_grid)?;
    let options = ConjugationOptions {
        jet_degree: b.jet_degree,
        probe: probe.clone(),
    };
    let normal_form = ElementaryMap::new(h.multipliers[0], h.multipliers[1], CoefficientRule::zero())?;
    let mut table = Table::new("basin", &["n", "residual", "pushed_error"]);
    let mut last = None;
    let mut truncation = None;
    for &d in &b.depths {
        let conj = conjugation_approx(&h, d, &options)?;
        let n = match truncation {
            Some(n) => n,
            None => {
                let n = resolve_truncation(&b.truncation, "basin.truncation", || {
                    normal_form.min_truncation_degree()
                })?;
                truncation = Some(n);
                n
            }
        };
        let pushed = pushed_renorm_family(&conj, n, d, &probe)?;
        table.push(vec![int(d), num(conj.residual), num(pushed.pushed_error)]);
        last = Some((conj, pushed));
    }
    let (conj, pushed) = last.expect("depths validated non-empty");
    let n = truncation.expect("set with the first depth");
    let plan = RenormPlan::validate(&normal_form, n)?;
    let images: Vec<_> = probe.points_about(h.fixed_point).iter().map(|x| conj.psi(*x)).collect();
    let inverse_defect = conj.inverse_consistency(&images)?;
    let resonance = conj.resonance.expect("basin conjugation checks resonance");
    let mut out = RunOutput::new(vec![table]);
    out.summary = json!({
        "fixed_point": h.fixed_point.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "multipliers": h.multipliers.iter().map(|z| complex(*z)).collect::<Vec<_>>(),
        "repulsive": h.is_repulsive(),
        "jet_degree": b.jet_degree,
        "rounding_floor": conj.rounding_floor(),
        "inverse_consistency": inverse_defect,
        "deepest_pushed_error": pushed.pushed_error,
    });
    let mut record = hypothesis_record(&plan);
    record["resonance"] = json!({
        "max_degree": resonance.max_degree,
        "min_relative_gap": resonance.min_margin,
        "closest": {"k": resonance.worst.0, "i": resonance.worst.1, "j": resonance.worst.2},
    });
    record["repulsive"] = json!(h.multipliers.iter().map(|l| l.norm() - 1.0).collect::<Vec<_>>());
    out.hypotheses = record;
    out.resolved = json!({"basin": {"truncation": n}});
    out.headline = Some(("residual".into(), conj.residual));
    Ok(out)
}
