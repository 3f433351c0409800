use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gauge, GaugeSpec, Kind};
use crate::error::{Error, Result};
use crate::geom;

pub const POLAR_ITERATIONS: usize = 200;

/// Relative tangential gradient below which an ascent run is converged.
const GRAD_TOL: f64 = 1e-11;
/// Relative tangential gradient above which the best run is reported as a failure.
const FAIL_TOL: f64 = 1e-6;

/// `F°`: closed forms for euclidean, `l^q` and ellipse; numeric ascent otherwise.
pub fn polar(g: &Gauge) -> Gauge {
    let n = g.dim();
    match &g.kind {
        Kind::Euclidean => g.clone(),
        Kind::PNorm { q } => {
            let spec = GaugeSpec::PNorm { q: q / (q - 1.0), n };
            Gauge::from_kind(n, Kind::PNorm { q: q / (q - 1.0) }, Some(spec))
        }
        Kind::Ellipse { a } => {
            let inv = a.clone().try_inverse().expect("ellipse matrix is SPD");
            let inv = (&inv + inv.transpose()) * 0.5;
            let flat: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| inv[(i, j)]).collect();
            Gauge::from_kind(n, Kind::Ellipse { a: inv }, Some(GaugeSpec::Ellipse { a: flat, n }))
        }
        Kind::Blend(_) => polar_numeric(g),
        Kind::NumericPolar(primal) => (**primal).clone(),
    }
}

/// `F°` evaluated by multistart projected ascent regardless of closed forms.
pub fn polar_numeric(g: &Gauge) -> Gauge {
    Gauge::from_kind(g.dim(), Kind::NumericPolar(Box::new(g.clone())), None)
}

/// `sup_{F(xi)=1} xi . eta` and the maximizer (which is the gradient of `F°` at `eta`).
pub(crate) fn polar_value(primal: &Gauge, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = primal.dim();
    let scale = geom::norm(eta);
    if scale == 0.0 {
        return Ok((0.0, vec![0.0; n]));
    }
    let e: Vec<f64> = eta.iter().map(|x| x / scale).collect();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for start in starts(&e) {
        let (val, u, res) = ascend(primal, &e, start);
        let better = match &best {
            None => true,
            Some((bv, _, _)) => val > *bv,
        };
        if better {
            best = Some((val, u, res));
        }
    }
    let (val, u, res) = best.expect("at least one start");
    if !(res <= FAIL_TOL) || !val.is_finite() {
        return Err(Error::PolarNonConvergence { direction: eta.to_vec(), residual: res });
    }
    let fu = primal.value(&u);
    Ok((scale * val, u.iter().map(|x| x / fu).collect()))
}

fn starts(e: &[f64]) -> Vec<Vec<f64>> {
    let n = e.len();
    let mut out = Vec::with_capacity(2 * n + 8);
    out.push(e.to_vec());
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = s;
            out.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x9017_a5);
    while out.len() < 2 * n + 8 {
        let v: Vec<f64> = (0..n).map(|_| geom::gaussian(&mut rng)).collect();
        if geom::norm(&v) > 1e-6 {
            out.push(geom::normalized(&v));
        }
    }
    out
}

/// Ascent of `u . e / F(u)` on the Euclidean unit sphere along geodesics,
/// each step a root search on the directional derivative.
fn ascend(g: &Gauge, e: &[f64], start: Vec<f64>) -> (f64, Vec<f64>, f64) {
    let n = e.len();
    let mut u = start;
    let mut grad = vec![0.0; n];
    let mut res = f64::INFINITY;
    let tangent_at = |u: &[f64], grad: &mut [f64]| -> (f64, Vec<f64>) {
        let f = g.value(u);
        let val = geom::dot(u, e) / f;
        g.gradient_into(u, grad);
        let mut t: Vec<f64> = (0..n).map(|i| (e[i] - val * grad[i]) / f).collect();
        let radial = geom::dot(&t, u);
        for i in 0..n {
            t[i] -= radial * u[i];
        }
        (val, t)
    };
    for _ in 0..POLAR_ITERATIONS {
        let (_, t) = tangent_at(&u, &mut grad);
        res = geom::norm(&t);
        if !(res >= GRAD_TOL) {
            break;
        }
        let dir: Vec<f64> = t.iter().map(|x| x / res).collect();
        let along = |th: f64| -> Vec<f64> { (0..n).map(|i| th.cos() * u[i] + th.sin() * dir[i]).collect() };
        let mut buf = vec![0.0; n];
        let mut slope = |th: f64| -> f64 {
            let p = along(th);
            let (_, t) = tangent_at(&p, &mut buf);
            let tan: Vec<f64> = (0..n).map(|i| -th.sin() * u[i] + th.cos() * dir[i]).collect();
            geom::dot(&t, &tan)
        };
        let (mut lo, mut dlo) = (0.0, res);
        let mut hi = res.min(0.5);
        let mut dhi = slope(hi);
        while dhi > 0.0 && hi < FRAC_PI_2 {
            lo = hi;
            dlo = dhi;
            hi = (2.0 * hi).min(FRAC_PI_2);
            dhi = slope(hi);
        }
        let th = if dhi > 0.0 {
            hi
        } else {
            let mut side = 0;
            let mut th = hi;
            for _ in 0..80 {
                th = (lo * dhi - hi * dlo) / (dhi - dlo);
                if !(th > lo && th < hi) {
                    th = 0.5 * (lo + hi);
                }
                let d = slope(th);
                if d.abs() <= 1e-3 * GRAD_TOL || hi - lo <= 1e-16 {
                    break;
                }
                if d > 0.0 {
                    lo = th;
                    dlo = d;
                    if side == 1 {
                        dhi *= 0.5;
                    }
                    side = 1;
                } else {
                    hi = th;
                    dhi = d;
                    if side == -1 {
                        dlo *= 0.5;
                    }
                    side = -1;
                }
            }
            th
        };
        if th <= 0.0 {
            break;
        }
        u = geom::normalized(&along(th));
    }
    let val = geom::dot(&u, e) / g.value(&u);
    (val, u, res)
}

impl Gauge {
    /// `F(xi)`, surfacing ascent failures of numeric polars as errors.
    pub fn try_value(&self, xi: &[f64]) -> Result<f64> {
        match &self.kind {
            Kind::NumericPolar(primal) => polar_value(primal, xi).map(|(v, _)| v),
            _ => Ok(self.value(xi)),
        }
    }

    /// `F_xi(xi)`, surfacing ascent failures of numeric polars as errors.
    pub fn try_gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.iter().all(|&x| x == 0.0) {
            return Err(Error::ZeroVector);
        }
        match &self.kind {
            Kind::NumericPolar(primal) => polar_value(primal, xi).map(|(_, g)| g),
            _ => Ok(self.gradient(xi)),
        }
    }

    /// The matrix of an ellipse gauge, if this is one.
    pub fn ellipse_matrix(&self) -> Option<&DMatrix<f64>> {
        match &self.kind {
            Kind::Ellipse { a } => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualityResiduals {
    /// `F(xi) F°(eta) - |xi . eta|`, nonnegative by the generalized Cauchy-Schwarz inequality.
    pub young_slack: f64,
    /// `|F(F°_xi(eta)) - 1|`.
    pub id1: f64,
    /// `|F°(F_xi(xi)) - 1|`.
    pub id2: f64,
}

pub fn duality_residuals(g: &Gauge, polar: &Gauge, xi: &[f64], eta: &[f64]) -> Result<DualityResiduals> {
    if xi.iter().all(|&x| x == 0.0) || eta.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    let young_slack = g.value(xi) * polar.try_value(eta)? - geom::dot(xi, eta).abs();
    let id1 = (g.value(&polar.try_gradient(eta)?) - 1.0).abs();
    let id2 = (polar.try_value(&g.gradient(xi))? - 1.0).abs();
    Ok(DualityResiduals { young_slack, id1, id2 })
}
