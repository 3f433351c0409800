//! Gauge norms `F`, their derivatives, polars and derived constants.
//!
//! A [`Gauge`] is an even, 1-homogeneous, strictly convex norm on `R^n`
//! evaluated in closed form (euclidean, `l^q`, ellipse, blends) or, for the
//! polar of a blend, by constrained ascent.

mod constants;
mod convexity;
mod polar;

pub use constants::{
    gauge_constants, omega_n, sigma_f, sobolev_sharp_constant, GaugeConstants, SobolevConstant,
};
pub use convexity::convexity_split_residual;
pub use polar::{duality_residuals, polar, polar_numeric, DualityResiduals, POLAR_ITERATIONS};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom;

/// Serializable description of a gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GaugeSpec {
    Euclidean {
        n: usize,
    },
    /// `(sum |xi_i|^q)^(1/q)`.
    PNorm {
        q: f64,
        n: usize,
    },
    /// `sqrt(xi . A xi)`, `a` is row-major.
    Ellipse {
        a: Vec<f64>,
        n: usize,
    },
    /// `sqrt(sum w_k F_k^2)`.
    Blend {
        components: Vec<BlendComponent>,
        n: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlendComponent {
    pub weight: f64,
    pub gauge: GaugeSpec,
}

impl GaugeSpec {
    pub fn dim(&self) -> usize {
        match self {
            GaugeSpec::Euclidean { n }
            | GaugeSpec::PNorm { n, .. }
            | GaugeSpec::Ellipse { n, .. }
            | GaugeSpec::Blend { n, .. } => *n,
        }
    }

    /// Short identifier used in report rows.
    pub fn label(&self) -> String {
        match self {
            GaugeSpec::Euclidean { .. } => "euclidean".to_string(),
            GaugeSpec::PNorm { q, .. } => format!("p_norm({q})"),
            GaugeSpec::Ellipse { a, n } => {
                let diag: Vec<String> = (0..*n).map(|i| format!("{}", a[i * n + i])).collect();
                let off_diag = (0..*n).any(|i| (0..*n).any(|j| i != j && a[i * n + j] != 0.0));
                if off_diag {
                    format!("ellipse({})", a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
                } else {
                    format!("ellipse(diag({}))", diag.join(","))
                }
            }
            GaugeSpec::Blend { components, .. } => {
                let parts: Vec<String> = components
                    .iter()
                    .map(|c| format!("{}*{}", c.weight, c.gauge.label()))
                    .collect();
                format!("blend({})", parts.join("+"))
            }
        }
    }
}

/// Lower bound on relative eigenvalues used to call a matrix positive definite.
const SPD_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Euclidean,
    PNorm { q: f64 },
    Ellipse { a: DMatrix<f64> },
    Blend(Vec<(f64, Gauge)>),
    /// `F°` of the boxed primal gauge, evaluated by ascent.
    NumericPolar(Box<Gauge>),
}

/// Evaluatable gauge: value, gradient `F_xi` and Hessian of `F^2`.
#[derive(Clone, Debug)]
pub struct Gauge {
    n: usize,
    pub(crate) kind: Kind,
    spec: Option<GaugeSpec>,
}

/// Builds an evaluator, validating the `GaugeSpec`.
pub fn make_gauge(spec: &GaugeSpec) -> Result<Gauge> {
    let n = spec.dim();
    if n < 2 {
        return Err(Error::InvalidGauge(format!("dimension {n} < 2")));
    }
    let kind = match spec {
        GaugeSpec::Euclidean { .. } => Kind::Euclidean,
        GaugeSpec::PNorm { q, .. } => {
            if !(q.is_finite() && *q > 1.0) {
                return Err(Error::InvalidGauge(format!("p_norm needs 1 < q < inf, got {q}")));
            }
            Kind::PNorm { q: *q }
        }
        GaugeSpec::Ellipse { a, .. } => {
            if a.len() != n * n {
                return Err(Error::InvalidGauge(format!(
                    "ellipse matrix has {} entries, expected {}",
                    a.len(),
                    n * n
                )));
            }
            let m = DMatrix::from_row_slice(n, n, a);
            check_spd(&m)?;
            Kind::Ellipse { a: m }
        }
        GaugeSpec::Blend { components, .. } => {
            if components.is_empty() {
                return Err(Error::InvalidGauge("blend without components".into()));
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if components.iter().any(|c| !(c.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidGauge(format!(
                    "blend weights must be positive and sum to 1 (sum {total})"
                )));
            }
            let mut parts = Vec::with_capacity(components.len());
            for c in components {
                if c.gauge.dim() != n {
                    return Err(Error::InvalidGauge("blend component dimension mismatch".into()));
                }
                parts.push((c.weight, make_gauge(&c.gauge)?));
            }
            Kind::Blend(parts)
        }
    };
    Ok(Gauge { n, kind, spec: Some(spec.clone()) })
}

fn check_spd(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::InvalidGauge("ellipse matrix is not symmetric".into()));
            }
        }
    }
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    if !(min > 0.0) || min < SPD_TOL * max {
        return Err(Error::InvalidGauge(format!(
            "ellipse matrix is not positive definite (eigenvalues in [{min}, {max}])"
        )));
    }
    Ok(())
}

impl Gauge {
    pub(crate) fn from_kind(n: usize, kind: Kind, spec: Option<GaugeSpec>) -> Self {
        Gauge { n, kind, spec }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The `GaugeSpec` this gauge was built from; `None` for numerically evaluated polars.
    pub fn spec(&self) -> Option<&GaugeSpec> {
        self.spec.as_ref()
    }

    pub fn label(&self) -> String {
        match (&self.spec, &self.kind) {
            (Some(s), _) => s.label(),
            (None, Kind::NumericPolar(p)) => format!("polar[{}]", p.label()),
            (None, _) => "gauge".to_string(),
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self.kind, Kind::NumericPolar(_))
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, Kind::Euclidean)
    }

    /// `F(xi)`.
    pub fn value(&self, xi: &[f64]) -> f64 {
        match &self.kind {
            Kind::Euclidean => geom::norm(xi),
            Kind::PNorm { q } => pnorm(xi, *q),
            Kind::Ellipse { a } => quad_form(a, xi).max(0.0).sqrt(),
            Kind::Blend(parts) => parts
                .iter()
                .map(|(w, g)| {
                    let v = g.value(xi);
                    w * v * v
                })
                .sum::<f64>()
                .sqrt(),
            Kind::NumericPolar(primal) => polar::polar_value(primal, xi).map(|(v, _)| v).unwrap_or(f64::NAN),
        }
    }

    /// Writes `F_xi(xi)` into `out`; `xi` must be nonzero.
    pub fn gradient_into(&self, xi: &[f64], out: &mut [f64]) {
        let n = self.n;
        match &self.kind {
            Kind::Euclidean => {
                let r = geom::norm(xi);
                for i in 0..n {
                    out[i] = xi[i] / r;
                }
            }
            Kind::PNorm { q } => {
                let f = pnorm(xi, *q);
                for i in 0..n {
                    out[i] = xi[i].signum() * (xi[i].abs() / f).powf(q - 1.0);
                    if xi[i] == 0.0 {
                        out[i] = 0.0;
                    }
                }
            }
            Kind::Ellipse { a } => {
                let f = quad_form(a, xi).sqrt();
                for i in 0..n {
                    let mut s = 0.0;
                    for j in 0..n {
                        s += a[(i, j)] * xi[j];
                    }
                    out[i] = s / f;
                }
            }
            Kind::Blend(parts) => {
                let f = self.value(xi);
                let mut buf = vec![0.0; n];
                out[..n].iter_mut().for_each(|x| *x = 0.0);
                for (w, g) in parts {
                    let fk = g.value(xi);
                    g.gradient_into(xi, &mut buf);
                    for i in 0..n {
                        out[i] += w * fk * buf[i] / f;
                    }
                }
            }
            Kind::NumericPolar(primal) => match polar::polar_value(primal, xi) {
                Ok((_, arg)) => out[..n].copy_from_slice(&arg),
                Err(_) => out[..n].iter_mut().for_each(|x| *x = f64::NAN),
            },
        }
    }

    pub fn gradient(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.gradient_into(xi, &mut out);
        out
    }

    /// `F(xi) F_xi(xi) = grad(F^2)/2`, continuously extended by 0 at the origin.
    pub fn flux_into(&self, xi: &[f64], out: &mut [f64]) {
        if xi.iter().all(|&x| x == 0.0) {
            out[..self.n].iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        let f = self.value(xi);
        self.gradient_into(xi, out);
        out[..self.n].iter_mut().for_each(|x| *x *= f);
    }

    /// Hessian of `F^2` at `xi != 0`.
    ///
    /// For `l^q` with `q != 2`, coordinates of the unit direction within
    /// `1e-8` of zero are moved to `1e-7` first.
    pub fn hessian_of_square(&self, xi: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        match &self.kind {
            Kind::Euclidean => DMatrix::identity(n, n) * 2.0,
            Kind::Ellipse { a } => a * 2.0,
            Kind::PNorm { q } => {
                let scale = geom::norm(xi);
                let mut w: Vec<f64> = xi.iter().map(|x| x / scale).collect();
                if (*q - 2.0).abs() > 0.0 {
                    for x in w.iter_mut() {
                        if x.abs() < 1e-8 {
                            *x = if *x < 0.0 { -1e-7 } else { 1e-7 };
                        }
                    }
                }
                let f = pnorm(&w, *q);
                let g: Vec<f64> = w.iter().map(|x| x.signum() * (x.abs() / f).powf(q - 1.0)).collect();
                // Hess F = (q-1) [F^(1-q) diag|w|^(q-2) - g g^T / F]; Hess F^2 = 2 g g^T + 2 F Hess F
                let mut h = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let mut hf = -(q - 1.0) * g[i] * g[j] / f;
                        if i == j {
                            hf += (q - 1.0) * f.powf(1.0 - q) * w[i].abs().powf(q - 2.0);
                        }
                        h[(i, j)] = 2.0 * g[i] * g[j] + 2.0 * f * hf;
                    }
                }
                h
            }
            Kind::Blend(parts) => {
                let mut h = DMatrix::zeros(n, n);
                for (w, g) in parts {
                    h += g.hessian_of_square(xi) * *w;
                }
                h
            }
            Kind::NumericPolar(_) => {
                // central differences of grad(F^2) = 2 F grad F
                let scale = geom::norm(xi);
                let step = 1e-5 * scale;
                let mut h = DMatrix::zeros(n, n);
                let mut xp = xi.to_vec();
                let mut xm = xi.to_vec();
                let mut gp = vec![0.0; n];
                let mut gm = vec![0.0; n];
                for j in 0..n {
                    xp[j] += step;
                    xm[j] -= step;
                    self.flux_into(&xp, &mut gp);
                    self.flux_into(&xm, &mut gm);
                    for i in 0..n {
                        h[(i, j)] = (gp[i] - gm[i]) / step;
                    }
                    xp[j] = xi[j];
                    xm[j] = xi[j];
                }
                (&h + h.transpose()) * 0.5
            }
        }
    }

    /// `max |F_xi|` over the Euclidean unit sphere.
    pub fn sup_grad_norm(&self) -> f64 {
        let count = if self.is_numeric() { 256 } else { 2048 };
        let (v, _) = geom::minimize_on_sphere(self.n, count, |u| -geom::norm(&self.gradient(u)));
        -v
    }

    /// `min F` over the Euclidean unit sphere, so that `F(xi) >= m |xi|`.
    pub fn min_on_unit_sphere(&self) -> f64 {
        let count = if self.is_numeric() { 256 } else { 2048 };
        geom::minimize_on_sphere(self.n, count, |u| self.value(u)).0
    }

    /// `max F` over the Euclidean unit sphere.
    pub fn max_on_unit_sphere(&self) -> f64 {
        let count = if self.is_numeric() { 256 } else { 2048 };
        -geom::minimize_on_sphere(self.n, count, |u| -self.value(u)).0
    }
}

fn pnorm(xi: &[f64], q: f64) -> f64 {
    let m = xi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * xi.iter().map(|x| (x.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
}

fn quad_form(a: &DMatrix<f64>, xi: &[f64]) -> f64 {
    let n = xi.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += xi[i] * a[(i, j)] * xi[j];
        }
    }
    s
}

/// The four gauges exercised throughout the test and acceptance suites.
pub fn builtin_specs(n: usize) -> Vec<GaugeSpec> {
    let mut ellipse = vec![0.0; n * n];
    for i in 0..n {
        ellipse[i * n + i] = 1.0;
    }
    ellipse[0] = 4.0;
    vec![
        GaugeSpec::Euclidean { n },
        GaugeSpec::PNorm { q: 4.0, n },
        GaugeSpec::Ellipse { a: ellipse, n },
        GaugeSpec::Blend {
            components: vec![
                BlendComponent { weight: 0.5, gauge: GaugeSpec::Euclidean { n } },
                BlendComponent { weight: 0.5, gauge: GaugeSpec::PNorm { q: 4.0, n } },
            ],
            n,
        },
    ]
}
