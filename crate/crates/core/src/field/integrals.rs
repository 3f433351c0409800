use std::sync::OnceLock;

use super::ScalarField;
use crate::domain::DistanceField;
use crate::error::{Error, Result};
use crate::exec;
use crate::geom;

/// Cells whose linearized distance reaches below this many spacings use the layer rule.
const LAYER: f64 = 4.0;
const TRANSVERSE_NODES: usize = 8;

fn transverse_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| geom::gauss_legendre(TRANSVERSE_NODES))
}

/// Quadrature weight of each cell for `integral d_F^gamma`:
/// `frac h^n d^gamma` by the midpoint rule, and near the boundary the
/// integral of `(s + g . y)_+^gamma` over the cell, exact along the
/// dominant gradient axis and Gauss-Legendre across it. Cells touching
/// the boundary get `inf` when `gamma <= -1`.
pub fn cell_weights(df: &DistanceField, gamma: f64) -> Vec<f64> {
    let grid = df.grid();
    let h = grid.h;
    let vol = grid.cell_volume();
    let d = &df.field.values;
    exec::map_range(grid.len(), |k| {
        let s = df.signed[k];
        let g = df.grad.at(k);
        let spread = 0.5 * h * g.iter().map(|x| x.abs()).sum::<f64>();
        if gamma > -1.0 && s.is_finite() && s + spread > 0.0 && s - spread < LAYER * h {
            return layer_weight(s, g, h, gamma);
        }
        let f = grid.frac[k];
        if f == 0.0 {
            0.0
        } else if gamma == 0.0 {
            f * vol
        } else {
            f * vol * d[k].powf(gamma)
        }
    })
}

/// `integral over [-h/2, h/2]^n of (s + g . y)_+^gamma dy`.
fn layer_weight(s: f64, g: &[f64], h: f64, gamma: f64) -> f64 {
    let n = g.len();
    let a = (0..n).max_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs()).then(j.cmp(&i))).unwrap_or(0);
    let ga = g[a];
    let (nodes, weights) = transverse_rule();
    let others: Vec<usize> = (0..n).filter(|&i| i != a).collect();
    let m = nodes.len();
    let count = m.pow(others.len() as u32);
    let line = |shift: f64| -> f64 {
        if ga.abs() < 1e-14 {
            return h * shift.max(0.0).powf(gamma);
        }
        let e = gamma + 1.0;
        let hi = (shift + 0.5 * h * ga.abs()).max(0.0).powf(e);
        let lo = (shift - 0.5 * h * ga.abs()).max(0.0).powf(e);
        (hi - lo) / (e * ga.abs())
    };
    let mut total = 0.0;
    for j in 0..count {
        let mut r = j;
        let mut shift = s;
        let mut w = 1.0;
        for &i in &others {
            let q = r % m;
            r /= m;
            shift += g[i] * 0.5 * h * nodes[q];
            w *= 0.5 * h * weights[q];
        }
        total += w * line(shift);
    }
    total
}

/// `sum_k integrand[k] * W_k(gamma)` with pairwise summation; zero integrand
/// cells are skipped so that singular weights outside the support do not matter.
pub fn weighted_sum(df: &DistanceField, gamma: f64, integrand: &[f64]) -> Result<f64> {
    let w = cell_weights(df, gamma);
    let mut terms = Vec::with_capacity(integrand.len());
    for (k, (&f, &wk)) in integrand.iter().zip(&w).enumerate() {
        if f == 0.0 || wk == 0.0 {
            continue;
        }
        let t = f * wk;
        if !t.is_finite() {
            return Err(Error::NonFinite(k));
        }
        terms.push(t);
    }
    Ok(exec::pairwise_sum(&terms))
}

/// `integral_Omega d_F^gamma |v|^p`.
pub fn weighted_integral(v: &ScalarField, df: &DistanceField, gamma: f64, p: f64) -> Result<f64> {
    let integrand: Vec<f64> = v.values.iter().map(|x| x.abs().powf(p)).collect();
    weighted_sum(df, gamma, &integrand)
}

/// `|| d_F^w v ||_{L^q}`.
pub fn weighted_lq_norm(v: &ScalarField, df: &DistanceField, w: f64, q: f64) -> Result<f64> {
    Ok(weighted_integral(v, df, w * q, q)?.powf(1.0 / q))
}

/// `integral |v|` with cut-cell fractions.
pub fn l1_norm(v: &ScalarField) -> f64 {
    let g = &v.grid;
    let terms: Vec<f64> = v.values.iter().zip(&g.frac).map(|(x, f)| x.abs() * f).collect();
    exec::pairwise_sum(&terms) * g.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{distance_field, Domain, DomainSpec, Grid, GridSpec};
    use crate::gauge::{make_gauge, GaugeSpec};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn setup(spec: DomainSpec, h: f64) -> DistanceField {
        let n = spec.dim();
        let grid = Arc::new(Grid::new(&Domain::new(&spec).unwrap(), GridSpec { h, padding: 0.0 }).unwrap());
        distance_field(&make_gauge(&GaugeSpec::Euclidean { n }).unwrap(), &grid).unwrap()
    }

    #[test]
    fn layer_weight_limits() {
        let h = 0.1;
        assert_relative_eq!(layer_weight(1.0, &[0.0, 1.0], h, 0.0), h * h, epsilon = 1e-15);
        assert_relative_eq!(layer_weight(0.0, &[0.0, 1.0], h, 0.0), 0.5 * h * h, epsilon = 1e-15);
        // d = y on the cell above a flat boundary: integral of y^gamma over [0, h] times h
        let exact = h * h.powf(0.5) / 0.5;
        assert_relative_eq!(layer_weight(0.5 * h, &[0.0, 1.0], h, -0.5), exact, epsilon = 1e-14);
    }

    #[test]
    fn singular_weight_on_the_disk() {
        let df = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 128.0);
        let one = ScalarField::from_fn(df.grid().clone(), |_| 1.0).unwrap();
        let v = weighted_integral(&one, &df, -0.5, 2.0).unwrap();
        assert!((v / (8.0 * std::f64::consts::PI / 3.0) - 1.0).abs() < 2e-3, "{v}");
    }

    #[test]
    fn linear_integrands_are_exact_inside() {
        let df = setup(DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }, 1.0 / 64.0);
        let v = ScalarField::from_fn(df.grid().clone(), |x| {
            if (0.25..0.75).contains(&x[0]) && (0.25..0.75).contains(&x[1]) {
                1.0 + x[0] + 2.0 * x[1]
            } else {
                0.0
            }
        })
        .unwrap();
        assert_relative_eq!(weighted_integral(&v, &df, 0.0, 1.0).unwrap(), 0.25 * (1.0 + 0.5 + 1.0), epsilon = 1e-12);
        assert_relative_eq!(l1_norm(&v), 0.625, epsilon = 1e-12);
        assert_eq!(weighted_integral(&v.scaled(0.0), &df, -3.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn norm_is_homogeneous_and_flags_singular_cells() {
        let df = setup(DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }, 1.0 / 32.0);
        let v = ScalarField::from_fn(df.grid().clone(), |x| (x[0] * 3.0).sin() * x[1]).unwrap();
        let a = weighted_lq_norm(&v, &df, 0.3, 2.5).unwrap();
        let b = weighted_lq_norm(&v.scaled(-2.0), &df, 0.3, 2.5).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-12);
        let disk = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 32.0);
        let one = ScalarField::from_fn(disk.grid().clone(), |_| 1.0).unwrap();
        assert!(matches!(weighted_integral(&one, &disk, -1.5, 2.0), Err(Error::NonFinite(_))));
    }
}
