//! JSON-configured batch runs: build gauges, domains, grids and families,
//! evaluate the requested checks and write CSV rows plus a JSON summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::domain::{distance_field, DistanceField, Domain, DomainSpec, Grid, GridSpec};
use crate::error::{Error, Result};
use crate::gauge::{gauge_constants, make_gauge, Gauge, GaugeConstants, GaugeSpec};
use crate::inequalities::{
    empirical_from_rows, evaluate_check, evaluate_domain_check, prepare_family, prepared_rows, CheckContext, CheckId,
    CheckOptions, CheckResult, EmpiricalConstant, ExponentSet, Prepared, Status,
};
use crate::testfns::{sample_family, FamilyKind, TestFunction};

/// `alpha` as a number or `"auto"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// `(p, alpha)`; `n` comes from the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub p: f64,
    pub alpha: AlphaChoice,
}

impl ExponentTriple {
    pub fn resolve(&self, n: usize) -> Result<ExponentSet> {
        let alpha = match self.alpha {
            AlphaChoice::Value(a) => a,
            AlphaChoice::Auto(_) => ExponentSet::auto_alpha(n, self.p),
        };
        ExponentSet::new(n, self.p, alpha)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "FamilyKind::all")]
    pub kinds: Vec<FamilyKind>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckSelection {
    All(AllTag),
    List(Vec<CheckId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllTag {
    All,
}

impl CheckSelection {
    pub fn ids(&self) -> Vec<CheckId> {
        match self {
            CheckSelection::All(_) => CheckId::all(),
            CheckSelection::List(l) => l.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
    #[serde(default)]
    pub dump_fields: bool,
}

fn default_csv() -> String {
    "results.csv".into()
}

fn default_json() -> String {
    "summary.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { csv: default_csv(), json: default_json(), dump_fields: false }
    }
}

/// Resolution of the gauge-constant computations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantsConfig {
    #[serde(default = "default_resolution")]
    pub sigma_resolution: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    #[serde(default = "default_mc_seed")]
    pub seed: u64,
}

fn default_resolution() -> usize {
    48
}

fn default_mc() -> usize {
    100_000
}

fn default_mc_seed() -> u64 {
    1
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        ConstantsConfig { sigma_resolution: default_resolution(), mc_samples: default_mc(), seed: default_mc_seed() }
    }
}

/// Overrides of the check tolerances.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SlackConfig {
    pub relative: Option<f64>,
    pub difference: Option<f64>,
}

/// One reproducible experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gauges: Vec<GaugeSpec>,
    pub domains: Vec<DomainSpec>,
    pub grid: GridSpec,
    pub exponents: Vec<ExponentTriple>,
    pub family: FamilyConfig,
    pub checks: CheckSelection,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub slack: SlackConfig,
    /// Extra dyadic refinements for the stability of empirical constants (0 = off).
    #[serde(default)]
    pub refine: u32,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub minimize_epsilon: bool,
    #[serde(default)]
    pub constants: ConstantsConfig,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks plus exponent admissibility for every domain dimension.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.gauges.is_empty() || self.domains.is_empty() || self.exponents.is_empty() {
            return bad("gauges, domains and exponents must be nonempty".into());
        }
        if self.checks.ids().is_empty() {
            return bad("checks must be nonempty".into());
        }
        if self.family.count == 0 || self.family.kinds.is_empty() {
            return bad("family.count and family.kinds must be nonempty".into());
        }
        if !(self.grid.h > 0.0) || !(self.grid.padding >= 0.0) {
            return bad(format!("grid.h = {} must be positive and grid.padding nonnegative", self.grid.h));
        }
        for (i, g) in self.gauges.iter().enumerate() {
            make_gauge(g).map_err(|e| Error::Config(format!("gauges[{i}]: {e}")))?;
            if !self.domains.iter().any(|d| d.dim() == g.dim()) {
                return bad(format!("gauges[{i}]: no domain of dimension {}", g.dim()));
            }
        }
        for (i, d) in self.domains.iter().enumerate() {
            Domain::new(d).map_err(|e| Error::Config(format!("domains[{i}]: {e}")))?;
            if !self.gauges.iter().any(|g| g.dim() == d.dim()) {
                return bad(format!("domains[{i}]: no gauge of dimension {}", d.dim()));
            }
            for (j, t) in self.exponents.iter().enumerate() {
                t.resolve(d.dim()).map_err(|e| Error::Config(format!("exponents[{j}] with domains[{i}]: {e}")))?;
            }
        }
        Ok(())
    }

    pub fn check_options(&self) -> CheckOptions {
        let mut o = CheckOptions { seed: self.family.seed, minimize_epsilon: self.minimize_epsilon, ..Default::default() };
        if let Some(s) = self.slack.relative {
            o.slack = s;
        }
        if let Some(d) = self.slack.difference {
            o.diff_tol = d;
        }
        if let Some(e) = self.epsilon {
            o.epsilon = e;
        }
        o
    }
}

/// Gauge constants keyed by gauge label, in config order.
pub fn compute_constants(cfg: &RunConfig) -> Result<Vec<(Gauge, GaugeConstants)>> {
    cfg.gauges
        .iter()
        .map(|spec| {
            let g = make_gauge(spec)?;
            let c = gauge_constants(&g, cfg.constants.sigma_resolution, cfg.constants.mc_samples, cfg.constants.seed)?;
            Ok((g, c))
        })
        .collect()
}

/// Distance field of `g` on the grid of `spec`.
pub fn build_field(g: &Gauge, domain: &DomainSpec, grid: GridSpec) -> Result<DistanceField> {
    let grid = Arc::new(Grid::new(&Domain::new(domain)?, grid)?);
    distance_field(g, &grid)
}

/// Rows, empirical constants and timings of one run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub rows: Vec<CheckResult>,
    pub empirical: Vec<EmpiricalConstant>,
    pub constants: Vec<(String, GaugeConstants)>,
    /// Seconds per check id, summed over all blocks.
    pub timing: BTreeMap<String, f64>,
    pub wall_seconds: f64,
}

impl RunReport {
    pub fn failures(&self) -> Vec<&CheckResult> {
        self.rows.iter().filter(|r| r.status == Status::Fail).collect()
    }

    pub fn count(&self, pred: impl Fn(&Status) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.status)).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures().is_empty() {
            0
        } else {
            1
        }
    }
}

fn rows_for(id: CheckId, family: &[Prepared], ctx: &CheckContext, exps: &ExponentSet) -> Result<Vec<CheckResult>> {
    if id.is_domain_level() {
        evaluate_domain_check(id, ctx, exps)
    } else {
        prepared_rows(id, family, ctx, exps)
    }
}

/// Executes every (gauge, domain, exponents, check) block of the config.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let constants = compute_constants(cfg)?;
    let options = cfg.check_options();
    let checks = cfg.checks.ids();
    let mut rows = Vec::new();
    let mut empirical = Vec::new();
    let mut timing: BTreeMap<String, f64> = BTreeMap::new();
    for (g, consts) in &constants {
        for dspec in cfg.domains.iter().filter(|d| d.dim() == g.dim()) {
            let df = build_field(g, dspec, cfg.grid)?;
            let family = sample_family(&df, cfg.family.count, cfg.family.seed, &cfg.family.kinds)?;
            let fine = if cfg.refine > 0 { Some(build_field(g, dspec, cfg.grid.refined(cfg.refine))?) } else { None };
            let ctx = CheckContext::new(g, consts, &df, options);
            let fine_ctx = fine.as_ref().map(|f| CheckContext::new(g, consts, f, options));
            let prepared = if checks.iter().all(|id| id.is_domain_level()) { Vec::new() } else { prepare_family(&family, &ctx)? };
            let fine_prepared = match &fine_ctx {
                Some(fc) if !prepared.is_empty() => prepare_family(&family, fc)?,
                _ => Vec::new(),
            };
            for triple in &cfg.exponents {
                let exps = triple.resolve(dspec.dim())?;
                for &id in &checks {
                    let t0 = Instant::now();
                    let block = rows_for(id, &prepared, &ctx, &exps)?;
                    if !id.is_domain_level() {
                        let fine_rows = match &fine_ctx {
                            Some(fc) => Some(prepared_rows(id, &fine_prepared, fc, &exps)?),
                            None => None,
                        };
                        empirical.push(empirical_from_rows(id, &block, fine_rows.as_deref())?);
                    }
                    *timing.entry(id.name()).or_default() += t0.elapsed().as_secs_f64();
                    rows.extend(block);
                }
            }
        }
    }
    Ok(RunReport {
        rows,
        empirical,
        constants: constants.into_iter().map(|(g, c)| (g.label(), c)).collect(),
        timing,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Single check on a single family member, for library users.
pub fn check_one(id: CheckId, f: &TestFunction, ctx: &CheckContext, exps: &ExponentSet) -> Result<CheckResult> {
    evaluate_check(id, &Prepared::new(f.id.clone(), f.field.clone(), ctx.gauge), ctx, exps)
}

pub fn write_csv(rows: &[CheckResult], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CheckResult::csv_header())?;
    for r in rows {
        w.write_record(r.csv_record())?;
    }
    w.flush()?;
    Ok(())
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Summary document; everything run-dependent in wall-clock terms sits under `"timing"`.
pub fn summary_json(cfg: &RunConfig, report: &RunReport, timing: Value) -> Value {
    let constants: Vec<Value> = report
        .constants
        .iter()
        .map(|(label, c)| {
            json!({
                "gauge": label,
                "s_nf": c.s_nf,
                "wulff_volume": c.wulff_volume,
                "omega_n": c.omega_n,
                "sigma_f": c.sigma_f,
                "sigma_f_note": c.sigma_f_note,
            })
        })
        .collect();
    let empirical: Vec<Value> = report
        .empirical
        .iter()
        .map(|e| {
            json!({
                "check_id": e.check_id,
                "gauge": e.gauge,
                "domain": e.domain,
                "n": e.n,
                "p": e.p,
                "alpha": e.alpha,
                "sup_ratio": e.sup_ratio,
                "witness": e.witness,
                "refined_sup_ratio": e.refined_sup_ratio,
                "refinement_delta": e.refinement_delta,
                "unstable": e.unstable,
                "skipped": e.skipped,
            })
        })
        .collect();
    let fails: Vec<Value> = report
        .failures()
        .iter()
        .map(|r| json!({"check_id": r.check_id, "gauge": r.gauge, "domain": r.domain, "function": r.function, "p": r.p, "alpha": r.alpha}))
        .collect();
    let extras: Vec<Value> = report
        .rows
        .iter()
        .filter(|r| !r.extras.is_empty())
        .map(|r| {
            let m: serde_json::Map<String, Value> = r.extras.iter().map(|(k, v)| (k.clone(), finite_or_null(*v))).collect();
            json!({"check_id": r.check_id, "gauge": r.gauge, "domain": r.domain, "function": r.function, "p": r.p, "alpha": r.alpha, "extras": m})
        })
        .collect();
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seeds": {"family": cfg.family.seed, "constants": cfg.constants.seed},
        "config": cfg,
        "counts": {
            "rows": report.rows.len(),
            "pass": report.count(|s| *s == Status::Pass),
            "fail": report.count(|s| *s == Status::Fail),
            "expected_violation": report.count(|s| *s == Status::ExpectedViolation),
            "skipped": report.count(|s| matches!(s, Status::Skipped(_))),
        },
        "constants": constants,
        "empirical_constants": empirical,
        "failures": fails,
        "row_extras": extras,
        "timing": timing,
    })
}

/// Writes the CSV and JSON reports below `out_dir`; returns their paths.
pub fn write_reports(cfg: &RunConfig, report: &RunReport, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(&cfg.output.csv);
    let json_path = out_dir.join(&cfg.output.json);
    write_csv(&report.rows, &csv_path)?;
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let timing = json!({"finished_unix": started, "wall_seconds": report.wall_seconds, "per_check_seconds": report.timing});
    std::fs::write(&json_path, serde_json::to_vec_pretty(&summary_json(cfg, report, timing))?)?;
    Ok((csv_path, json_path))
}

/// Dumps `d_F` for every (gauge, domain) pair as `<out>/fields/dF_<i>_<j>.{bin,json}`.
pub fn dump_distance_fields(cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("fields");
    std::fs::create_dir_all(&dir)?;
    let mut out = Vec::new();
    for (i, gspec) in cfg.gauges.iter().enumerate() {
        let g = make_gauge(gspec)?;
        for (j, dspec) in cfg.domains.iter().enumerate().filter(|(_, d)| d.dim() == g.dim()) {
            let df = build_field(&g, dspec, cfg.grid)?;
            let stem = dir.join(format!("dF_{i}_{j}"));
            df.field.write_binary(&stem, json!({"gauge": gspec, "quantity": "d_F"}))?;
            out.push(stem.with_extension("bin"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "gauges": [{"family": "euclidean", "n": 2}],
        "domains": [{"variant": "ball", "center": [0, 0], "radius": 1}],
        "grid": {"h": 0.03125},
        "exponents": [{"p": 2, "alpha": "auto"}, {"p": 1.5, "alpha": 0}],
        "family": {"count": 4, "seed": 3},
        "checks": ["mr_bound", "weighted_sobolev"],
        "constants": {"sigma_resolution": 16, "mc_samples": 100000}
    }"#;

    #[test]
    fn config_parsing_and_validation() {
        let cfg = RunConfig::from_json(SMALL).unwrap();
        assert_eq!(cfg.exponents[0].alpha, AlphaChoice::Auto(AutoTag::Auto));
        assert_eq!(cfg.family.kinds, FamilyKind::all());
        assert!(matches!(RunConfig::from_json(&SMALL.replace("\"p\": 1.5", "\"p\": 2.5")), Err(Error::Config(_))));
        let err = RunConfig::from_json(&SMALL.replace("\"grid\"", "\"gird\"")).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
        let all = RunConfig::from_json(&SMALL.replace(r#"["mr_bound", "weighted_sobolev"]"#, r#""all""#)).unwrap();
        assert_eq!(all.checks.ids().len(), CheckId::all().len());
    }

    #[test]
    fn small_run_passes() {
        let cfg = RunConfig::from_json(SMALL).unwrap();
        let report = run(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2 * (9 + 4));
        assert_eq!(report.exit_code(), 0, "{:?}", report.failures());
        let dir = tempfile::tempdir().unwrap();
        let (csv, json) = write_reports(&cfg, &report, dir.path()).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert!(text.starts_with("check_id,gauge,domain,n,p,alpha,function,lhs,rhs,ratio,theoretical_C,status\n"));
        let summary: Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
        assert_eq!(summary["counts"]["fail"], 0);
        assert!(summary["timing"]["wall_seconds"].is_number());
    }
}
