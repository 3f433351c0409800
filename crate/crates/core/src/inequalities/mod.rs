//! Exponent algebra, theoretical constants, the Hardy difference and the check registry.

mod checks;
mod empirical;

pub use checks::{evaluate_check, evaluate_domain_check, m_r, CheckContext, CheckOptions, H1Status, Prepared};
pub use empirical::{
    empirical_constant, empirical_from_rows, family_rows, prepare_family, prepared_rows, EmpiricalConstant,
};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::domain::DistanceField;
use crate::error::{Error, Result};
use crate::field::{gradient, weighted_integral, weighted_sum, ScalarField};
use crate::gauge::{omega_n, Gauge};

/// Derived exponents of a triple `(n, p, alpha)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    /// `np / (n - p(1 - alpha))`.
    pub p_star_alpha: f64,
    /// `n / (n - 1 + alpha)`.
    pub one_star_alpha: f64,
    /// `p / (p - 1)`, infinite at `p = 1`.
    pub p_prime: f64,
    /// `1 - 1/p`, finite also at `p = 1`.
    pub inv_p_prime: f64,
    /// Hölder conjugate of `p_star_alpha`.
    pub conj_p_star: f64,
    pub s: f64,
    pub b: f64,
    pub a: f64,
    pub theta: f64,
}

impl ExponentSet {
    pub fn new(n: usize, p: f64, alpha: f64) -> Result<ExponentSet> {
        let nf = n as f64;
        if n < 2 {
            return Err(Error::InvalidExponents(format!("dimension {n} < 2")));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::InvalidExponents(format!("alpha = {alpha} not in [0, 1)")));
        }
        let bound = nf / (1.0 - alpha);
        if !(p >= 1.0 && p < bound) {
            return Err(Error::InvalidExponents(format!("p = {p} not in [1, {bound}) for n = {n}, alpha = {alpha}")));
        }
        let q = 1.0 - alpha;
        let den = nf - p * q;
        let p_star_alpha = nf * p / den;
        let one_star_alpha = nf / (nf - q);
        let conj_p_star = p_star_alpha / (p_star_alpha - 1.0);
        let b = (p * q - 1.0) * (nf - q) / den;
        Ok(ExponentSet {
            n,
            p,
            alpha,
            p_star_alpha,
            one_star_alpha,
            p_prime: if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) },
            inv_p_prime: 1.0 - 1.0 / p,
            conj_p_star,
            s: p_star_alpha / one_star_alpha,
            b,
            a: (p - 1.0) * q * (nf - 1.0) / den,
            theta: conj_p_star * q,
        })
    }

    /// Midpoint of the `alpha` range in `[0, 1)` where the triple is admissible and `theta < 1`.
    pub fn auto_alpha(n: usize, p: f64) -> f64 {
        let nf = n as f64;
        let lower = [0.0, (nf - p) / (p * (nf - 1.0)), 1.0 - nf / p].into_iter().fold(0.0, f64::max);
        0.5 * (lower + 1.0)
    }

    /// `1* = n/(n-1)`.
    pub fn one_star(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 1.0)
    }
}

/// `(1 - alpha) eps^(-alpha/(1-alpha)) / S`, the gradient coefficient of the pre-Sobolev bound.
pub fn pre_sobolev_a(exps: &ExponentSet, s_nf: f64, eps: f64) -> f64 {
    let q = 1.0 - exps.alpha;
    q * eps.powf(-exps.alpha / q) / s_nf
}

/// `kappa = 1 / max(A, A|b + alpha| + alpha eps)`.
pub fn kappa(exps: &ExponentSet, s_nf: f64, eps: f64) -> f64 {
    let a = pre_sobolev_a(exps, s_nf, eps);
    1.0 / a.max(a * (exps.b + exps.alpha).abs() + exps.alpha * eps)
}

/// `C_2 = (s/kappa)^p 2^(p-1)`.
pub fn theoretical_c2(exps: &ExponentSet, s_nf: f64, eps: f64) -> f64 {
    (exps.s / kappa(exps, s_nf, eps)).powf(exps.p) * 2f64.powf(exps.p - 1.0)
}

/// Smallest `C_2` over `eps = 10^k`, `k` on a uniform grid in `[-3, 3]`; returns `(eps, C_2)`.
pub fn theoretical_c2_min_eps(exps: &ExponentSet, s_nf: f64) -> (f64, f64) {
    (0..=120)
        .map(|i| {
            let eps = 10f64.powf(-3.0 + 0.05 * i as f64);
            (eps, theoretical_c2(exps, s_nf, eps))
        })
        .fold((1.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Sharp Euclidean Sobolev constant `S_{n,p}` with `S ||u||_{p*} <= ||grad u||_p`.
pub fn euclidean_sobolev_constant(n: usize, p: f64) -> Result<f64> {
    let nf = n as f64;
    if !(p >= 1.0 && p < nf) {
        return Err(Error::InvalidExponents(format!("p = {p} not in [1, {n})")));
    }
    if p == 1.0 {
        return Ok(nf * omega_n(n).powf(1.0 / nf));
    }
    let ratio = gamma(1.0 + nf / 2.0) * gamma(nf) / (gamma(nf / p) * gamma(1.0 + nf - nf / p));
    let c = std::f64::consts::PI.powf(-0.5)
        * nf.powf(-1.0 / p)
        * ((p - 1.0) / (nf - p)).powf(1.0 - 1.0 / p)
        * ratio.powf(1.0 / nf);
    Ok(1.0 / c)
}

/// Constant of the `alpha = 0` route through the classical Sobolev inequality,
/// `2^(p-1) / (m S_{n,p})^p` with `m = min F` on the unit sphere.
pub fn classic_route_constant(g: &Gauge, p: f64) -> Result<f64> {
    let s = euclidean_sobolev_constant(g.dim(), p)?;
    Ok(2f64.powf(p - 1.0) / (g.min_on_unit_sphere() * s).powf(p))
}

/// The two integrals of the Hardy difference.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyTerms {
    /// `integral F^p(grad u)`.
    pub gradient: f64,
    /// `integral |u|^p / d_F^p`.
    pub potential: f64,
    /// `gradient - ((p-1)/p)^p potential`.
    pub value: f64,
}

pub fn hardy_terms(u: &ScalarField, df: &DistanceField, g: &Gauge, p: f64) -> Result<HardyTerms> {
    if !(p > 1.0) {
        return Err(Error::Precondition(format!("Hardy difference needs p > 1, got {p}")));
    }
    let grad = gradient(u);
    let fp: Vec<f64> = (0..u.values.len()).map(|k| g.value(grad.at(k)).powf(p)).collect();
    let gradient = weighted_sum(df, 0.0, &fp)?;
    let potential = weighted_integral(u, df, -p, p)?;
    let value = gradient - ((p - 1.0) / p).powf(p) * potential;
    Ok(HardyTerms { gradient, potential, value })
}

/// `I_p[u] = integral F^p(grad u) - ((p-1)/p)^p integral |u|^p / d_F^p`.
pub fn hardy_difference(u: &ScalarField, df: &DistanceField, g: &Gauge, p: f64) -> Result<f64> {
    Ok(hardy_terms(u, df, g, p)?.value)
}

/// Registry of inequality checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Gagliardo,
    Interpolation,
    LeibnizGn,
    PreSobolev,
    WeightedSobolev,
    ClassicSobolevAlpha0,
    GradientOnly,
    LaplacianForm,
    HalfSpaceSharp,
    HardySobolev,
    HardyMorrey,
    MorreyLemma,
    MrBound,
    HolderBmo,
    ConvexityPointwise,
    Positivity,
    FeebleRegularity,
}

impl CheckId {
    pub fn all() -> Vec<CheckId> {
        use CheckId::*;
        vec![
            Gagliardo,
            Interpolation,
            LeibnizGn,
            PreSobolev,
            WeightedSobolev,
            ClassicSobolevAlpha0,
            GradientOnly,
            LaplacianForm,
            HalfSpaceSharp,
            HardySobolev,
            HardyMorrey,
            MorreyLemma,
            MrBound,
            HolderBmo,
            ConvexityPointwise,
            Positivity,
            FeebleRegularity,
        ]
    }

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }

    pub fn parse(s: &str) -> Result<CheckId> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Config(format!("unknown check id {s:?}")))
    }

    /// Checks evaluated once per (gauge, domain, exponents) instead of per function.
    pub fn is_domain_level(self) -> bool {
        matches!(self, CheckId::MrBound | CheckId::Positivity | CheckId::FeebleRegularity)
    }

    /// Family members enter as `u` (Hardy side) rather than `v`.
    pub fn takes_u(self) -> bool {
        matches!(self, CheckId::HardySobolev | CheckId::HardyMorrey | CheckId::MorreyLemma | CheckId::HolderBmo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// A hypothesis of the targeted statement fails on this domain and the inequality is violated.
    ExpectedViolation,
    Skipped(String),
}

impl Status {
    pub fn label(&self) -> String {
        match self {
            Status::Pass => "pass".into(),
            Status::Fail => "fail".into(),
            Status::ExpectedViolation => "expected_violation".into(),
            Status::Skipped(r) => format!("skipped({r})"),
        }
    }
}

/// One evaluated check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check_id: CheckId,
    pub gauge: String,
    pub domain: String,
    pub n: usize,
    pub p: f64,
    pub alpha: f64,
    pub function: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Option<f64>,
    pub theoretical_c: Option<f64>,
    pub slack_allowance: f64,
    pub status: Status,
    /// Auxiliary quantities (route cross-checks, probe values, Morrey radii).
    pub extras: Vec<(String, f64)>,
}

impl CheckResult {
    pub fn csv_header() -> [&'static str; 12] {
        ["check_id", "gauge", "domain", "n", "p", "alpha", "function", "lhs", "rhs", "ratio", "theoretical_C", "status"]
    }

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.check_id.name(),
            self.gauge.clone(),
            self.domain.clone(),
            self.n.to_string(),
            self.p.to_string(),
            self.alpha.to_string(),
            self.function.clone(),
            self.lhs.to_string(),
            self.rhs.to_string(),
            opt(self.ratio),
            opt(self.theoretical_c),
            self.status.label(),
        ]
    }

    pub fn extra(&self, key: &str) -> Option<f64> {
        self.extras.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}
