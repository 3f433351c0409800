use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::gamma;

use super::{polar, Gauge};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom;

/// Eigenvalue ratio of the Hessian of `F^2` below which `F` is not strongly convex.
const STRONG_CONVEXITY_TOL: f64 = 1e-8;
/// Stratified Monte Carlo relative error budget.
const MC_BUDGET: f64 = 5e-3;
/// Allowed disagreement between Monte Carlo and radial quadrature.
const CROSS_CHECK_TOL: f64 = 1e-2;

/// Volume of the Euclidean unit ball in `R^n`.
pub fn omega_n(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    std::f64::consts::PI.powf(h) / gamma(h + 1.0)
}

/// Uniform-convexity modulus `sigma_F`, the square root of
/// `max_{v,w} 2 F^2(v) / (v . Hess F^2(w) v)` over pairs of unit directions.
///
/// `resolution` directions are used for both `v` and `w`; the best grid
/// pairs are then refined by alternating maximization over each factor.
pub fn sigma_f(g: &Gauge, resolution: usize) -> Result<f64> {
    let n = g.dim();
    let dirs = geom::sphere_samples(n, resolution.max(8));
    let hessians: Vec<Result<DMatrix<f64>>> = exec::map_slice(&dirs, |w| strongly_convex_hessian(g, w));
    let hessians: Vec<DMatrix<f64>> = hessians.into_iter().collect::<Result<_>>()?;
    let num: Vec<f64> = dirs.iter().map(|v| 2.0 * g.value(v).powi(2)).collect();

    // best ratio for each v over the w grid
    let per_v: Vec<(f64, usize)> = exec::map_range(dirs.len(), |iv| {
        let v = &dirs[iv];
        let mut best = (f64::NEG_INFINITY, 0);
        for (iw, h) in hessians.iter().enumerate() {
            let r = num[iv] / quad(h, v);
            if r > best.0 {
                best = (r, iw);
            }
        }
        best
    });
    let mut order: Vec<usize> = (0..dirs.len()).collect();
    order.sort_by(|&a, &b| per_v[b].0.total_cmp(&per_v[a].0).then(a.cmp(&b)));

    let mut best = per_v[order[0]].0;
    for &iv in order.iter().take(4) {
        let mut v = dirs[iv].clone();
        let mut w = dirs[per_v[iv].1].clone();
        let mut val = per_v[iv].0;
        for _ in 0..6 {
            let wv = v.clone();
            let (neg, w_new) = refine(n, &w, |w| {
                let h = g.hessian_of_square(w);
                -2.0 * g.value(&wv).powi(2) / quad(&h, &wv)
            });
            w = w_new;
            let h = g.hessian_of_square(&w);
            check_strong(&h, &w)?;
            let (neg2, v_new) = refine(n, &v, |v| -2.0 * g.value(v).powi(2) / quad(&h, v));
            v = v_new;
            let next = (-neg).max(-neg2);
            if next <= val * (1.0 + 1e-14) {
                val = val.max(next);
                break;
            }
            val = next;
        }
        best = best.max(val);
    }
    Ok(best.sqrt())
}

fn quad(h: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += v[i] * h[(i, j)] * v[j];
        }
    }
    s
}

fn strongly_convex_hessian(g: &Gauge, w: &[f64]) -> Result<DMatrix<f64>> {
    let h = g.hessian_of_square(w);
    check_strong(&h, w)?;
    Ok(h)
}

fn check_strong(h: &DMatrix<f64>, w: &[f64]) -> Result<()> {
    let eig = h.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = min / max;
    if !(max > 0.0) || !(ratio >= STRONG_CONVEXITY_TOL) {
        return Err(Error::NotStronglyConvex { direction: w.to_vec(), eigen_ratio: ratio });
    }
    Ok(())
}

/// Local minimization on the sphere around `start`.
fn refine(n: usize, start: &[f64], f: impl Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    if n == 2 {
        let t0 = start[1].atan2(start[0]);
        let (t, v) = geom::golden_min(t0 - 0.05, t0 + 0.05, 1e-12, |t| f(&geom::circle(t)));
        let f0 = f(start);
        if f0 <= v {
            return (f0, start.to_vec());
        }
        return (v, geom::circle(t).to_vec());
    }
    let basis = geom::tangent_basis(start);
    let mut u = start.to_vec();
    let mut fu = f(&u);
    let mut step = 0.05;
    while step > 1e-10 {
        let mut improved = false;
        for e in &basis {
            for s in [1.0, -1.0] {
                let trial = geom::normalized(&(0..n).map(|i| u[i] + s * step * e[i]).collect::<Vec<_>>());
                let ft = f(&trial);
                if ft < fu {
                    u = trial;
                    fu = ft;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (fu, u)
}

/// Wulff-shape volume and the derived Sobolev constant `n vol({F° <= 1})^(1/n)`.
#[derive(Clone, Debug, Serialize)]
pub struct SobolevConstant {
    pub n: usize,
    /// Stratified Monte Carlo estimate of the Wulff volume.
    pub wulff_volume: f64,
    pub mc_relative_error: f64,
    pub mc_samples: usize,
    /// Radial quadrature estimate (2D and 3D only).
    pub wulff_volume_quadrature: Option<f64>,
    pub s_nf: f64,
    pub omega_n: f64,
}

pub fn sobolev_sharp_constant(g: &Gauge, mc_samples: usize, seed: u64) -> Result<SobolevConstant> {
    let n = g.dim();
    let fp = polar(g);
    let half: Vec<f64> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            g.value(&e)
        })
        .collect();
    let box_vol: f64 = half.iter().map(|h| 2.0 * h).product();

    let per_axis = ((mc_samples.max(2) as f64 / 2.0).powf(1.0 / n as f64).floor() as usize).max(1);
    let strata = per_axis.pow(n as u32);
    let hits: Vec<Result<(f64, f64)>> = exec::map_range(strata, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut idx = k;
        let mut cell = vec![0usize; n];
        for c in cell.iter_mut() {
            *c = idx % per_axis;
            idx /= per_axis;
        }
        let mut sample = || -> Result<f64> {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    let t = (cell[i] as f64 + rng.random::<f64>()) / per_axis as f64;
                    half[i] * (2.0 * t - 1.0)
                })
                .collect();
            Ok(if fp.try_value(&x)? <= 1.0 { 1.0 } else { 0.0 })
        };
        Ok((sample()?, sample()?))
    });
    let hits: Vec<(f64, f64)> = hits.into_iter().collect::<Result<_>>()?;
    let means: Vec<f64> = hits.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let vars: Vec<f64> = hits.iter().map(|(a, b)| 0.25 * (a - b) * (a - b)).collect();
    let cell_vol = box_vol / strata as f64;
    let volume = cell_vol * exec::pairwise_sum(&means);
    let std = cell_vol * exec::pairwise_sum(&vars).sqrt();
    let rel = if volume > 0.0 { std / volume } else { f64::INFINITY };
    if rel > MC_BUDGET {
        return Err(Error::MonteCarloError(rel));
    }

    let quadrature = radial_volume(&fp)?;
    if let Some(q) = quadrature {
        if (volume - q).abs() > CROSS_CHECK_TOL * q {
            return Err(Error::WulffMismatch { monte_carlo: volume, quadrature: q });
        }
    }
    Ok(SobolevConstant {
        n,
        wulff_volume: volume,
        mc_relative_error: rel,
        mc_samples: 2 * strata,
        wulff_volume_quadrature: quadrature,
        s_nf: n as f64 * volume.powf(1.0 / n as f64),
        omega_n: omega_n(n),
    })
}

/// Volume of `{F° <= 1}` from its radial function `1/F°(u)`.
fn radial_volume(fp: &Gauge) -> Result<Option<f64>> {
    use std::f64::consts::PI;
    match fp.dim() {
        2 => {
            let k = 1024;
            let terms: Vec<Result<f64>> = exec::map_range(k, |i| {
                let t = 2.0 * PI * i as f64 / k as f64;
                let rho = 1.0 / fp.try_value(&geom::circle(t))?;
                Ok(0.5 * rho * rho * 2.0 * PI / k as f64)
            });
            let terms: Vec<f64> = terms.into_iter().collect::<Result<_>>()?;
            Ok(Some(exec::pairwise_sum(&terms)))
        }
        3 => {
            let (zs, ws) = geom::gauss_legendre(48);
            let m = 96;
            let terms: Vec<Result<f64>> = exec::map_range(zs.len() * m, |k| {
                let (iz, ip) = (k / m, k % m);
                let z = zs[iz];
                let r = (1.0 - z * z).sqrt();
                let phi = 2.0 * PI * ip as f64 / m as f64;
                let rho = 1.0 / fp.try_value(&[r * phi.cos(), r * phi.sin(), z])?;
                Ok(rho.powi(3) / 3.0 * ws[iz] * 2.0 * PI / m as f64)
            });
            let terms: Vec<f64> = terms.into_iter().collect::<Result<_>>()?;
            Ok(Some(exec::pairwise_sum(&terms)))
        }
        _ => Ok(None),
    }
}

/// Everything the checks need from a gauge.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeConstants {
    /// `None` when the Hessian of `F^2` degenerates (the modulus is unbounded).
    pub sigma_f: Option<f64>,
    pub sigma_f_note: Option<String>,
    pub wulff_volume: f64,
    pub s_nf: f64,
    pub omega_n: f64,
    pub sobolev: SobolevConstant,
    pub sup_grad_norm: f64,
    pub min_unit_value: f64,
}

pub fn gauge_constants(g: &Gauge, resolution: usize, mc_samples: usize, seed: u64) -> Result<GaugeConstants> {
    let (sigma, note) = match sigma_f(g, resolution) {
        Ok(s) => (Some(s), None),
        Err(e @ Error::NotStronglyConvex { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let sobolev = sobolev_sharp_constant(g, mc_samples, seed)?;
    Ok(GaugeConstants {
        sigma_f: sigma,
        sigma_f_note: note,
        wulff_volume: sobolev.wulff_volume,
        s_nf: sobolev.s_nf,
        omega_n: sobolev.omega_n,
        sup_grad_norm: g.sup_grad_norm(),
        min_unit_value: g.min_on_unit_sphere(),
        sobolev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{builtin_specs, make_gauge, GaugeSpec};
    use approx::assert_relative_eq;

    #[test]
    fn omega_closed_forms() {
        assert_relative_eq!(omega_n(2), std::f64::consts::PI, epsilon = 1e-14);
        assert_relative_eq!(omega_n(3), 4.0 * std::f64::consts::PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn sigma_of_euclid_and_ellipse_is_one() {
        let e = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        assert_relative_eq!(sigma_f(&e, 90).unwrap(), 1.0, epsilon = 1e-12);
        let el = make_gauge(&GaugeSpec::Ellipse { a: vec![2.0, 0.3, 0.3, 0.5], n: 2 }).unwrap();
        assert_relative_eq!(sigma_f(&el, 90).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn sigma_rejects_degenerate_hessian() {
        let p = make_gauge(&GaugeSpec::PNorm { q: 4.0, n: 2 }).unwrap();
        assert!(matches!(sigma_f(&p, 90), Err(Error::NotStronglyConvex { .. })));
    }

    #[test]
    fn sigma_of_blend_is_finite_and_scale_invariant() {
        let b = make_gauge(&builtin_specs(2)[3]).unwrap();
        let s = sigma_f(&b, 180).unwrap();
        assert!(s > 1.0 && s < 3.0, "{s}");
    }

    #[test]
    fn euclidean_sobolev_constants() {
        let e2 = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        let c = sobolev_sharp_constant(&e2, 40_000, 1).unwrap();
        assert!((c.s_nf / 3.5449077018110318 - 1.0).abs() < 5e-3, "{c:?}");
        assert_relative_eq!(c.wulff_volume_quadrature.unwrap(), std::f64::consts::PI, epsilon = 1e-12);
        let e3 = make_gauge(&GaugeSpec::Euclidean { n: 3 }).unwrap();
        let c = sobolev_sharp_constant(&e3, 60_000, 1).unwrap();
        assert!((c.s_nf / 4.835975862049409 - 1.0).abs() < 5e-3, "{c:?}");
    }

    #[test]
    fn p4_wulff_area_matches_superellipse_quadrature() {
        let p = make_gauge(&GaugeSpec::PNorm { q: 4.0, n: 2 }).unwrap();
        let c = sobolev_sharp_constant(&p, 40_000, 3).unwrap();
        assert_relative_eq!(c.wulff_volume_quadrature.unwrap(), 2.541639254432942, max_relative = 1e-6);
        assert!((c.wulff_volume / 2.541639254432942 - 1.0).abs() < 5e-3);
        assert!(c.mc_relative_error <= 5e-3);
    }
}
