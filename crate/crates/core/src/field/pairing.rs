use serde::Serialize;

use super::{gradient, l1_norm, ScalarField, VectorField};
use crate::domain::{DistanceField, Domain};
use crate::error::{Error, Result};
use crate::exec;
use crate::gauge::Gauge;

fn check_support(phi: &ScalarField) -> Result<()> {
    let grid = &phi.grid;
    match (0..grid.len()).find(|&k| phi.values[k] != 0.0 && !grid.admissible[k]) {
        Some(k) => Err(Error::SupportInCollar(k)),
        None => Ok(()),
    }
}

/// Cells where the finite-difference gradient of `phi` can be nonzero.
fn gradient_support(phi: &ScalarField) -> Vec<usize> {
    let grid = &phi.grid;
    let mut mark = vec![false; grid.len()];
    for k in phi.support() {
        mark[k] = true;
        for a in 0..grid.n {
            for o in [-2, -1, 1, 2] {
                if let Some(j) = grid.neighbor(k, a, o) {
                    mark[j] = true;
                }
            }
        }
    }
    (0..grid.len()).filter(|&k| mark[k]).collect()
}

/// `(-Delta_F u)[phi] = integral F(grad u) F_xi(grad u) . grad phi`,
/// with `grad u` taken by finite differences.
pub fn f_laplacian_pairing(u: &ScalarField, phi: &ScalarField, g: &Gauge) -> Result<f64> {
    f_laplacian_pairing_with_gradient(&gradient(u), phi, g)
}

/// As [`f_laplacian_pairing`] with a supplied gradient of `u` (for instance the exact `grad d_F`).
pub fn f_laplacian_pairing_with_gradient(grad_u: &VectorField, phi: &ScalarField, g: &Gauge) -> Result<f64> {
    check_support(phi)?;
    let grid = &phi.grid;
    let gphi = gradient(phi);
    let cells = gradient_support(phi);
    let vol = grid.cell_volume();
    let terms: Vec<f64> = exec::map_slice(&cells, |&k| {
        let xi = grad_u.at(k);
        let mut flux = vec![0.0; grid.n];
        g.flux_into(xi, &mut flux);
        let gp = gphi.at(k);
        grid.frac[k] * vol * flux.iter().zip(gp).map(|(a, b)| a * b).sum::<f64>()
    });
    if let Some(i) = terms.iter().position(|t| !t.is_finite()) {
        return Err(Error::NonFinite(cells[i]));
    }
    Ok(exec::pairwise_sum(&terms))
}

/// Normalized pairings of a nonnegative family and the most negative one.
#[derive(Clone, Debug, Serialize)]
pub struct ProbeResult {
    pub value: f64,
    pub witness: usize,
    pub values: Vec<f64>,
}

/// `min_i (-Delta_F d_F)[phi_i] / ||phi_i||_1`, using the exact gradient of `d_F`.
pub fn positivity_probe(df: &DistanceField, g: &Gauge, phis: &[ScalarField]) -> Result<ProbeResult> {
    if phis.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if let Some(phi) = phis.iter().find(|p| p.values.iter().any(|&v| v < 0.0)) {
        let k = phi.values.iter().position(|&v| v < 0.0).unwrap_or(0);
        return Err(Error::Precondition(format!("probe function is negative at cell {k}")));
    }
    let mut values = Vec::with_capacity(phis.len());
    for phi in phis {
        let m = l1_norm(phi);
        let pair = f_laplacian_pairing_with_gradient(&df.grad, phi, g)?;
        values.push(if m > 0.0 { pair / m } else { 0.0 });
    }
    let (witness, min) = exec::argmin(&values).unwrap_or((0, 0.0));
    Ok(ProbeResult { value: min, witness, values })
}

/// Largest `|integral F(grad d) F_xi(grad d) . grad(phi d)| / ||phi||_1` over the
/// family, a lower estimate of the feeble-regularity constant `K` off `omega`.
pub fn feeble_regularity_k(
    df: &DistanceField,
    g: &Gauge,
    omega: Option<&Domain>,
    phis: &[ScalarField],
) -> Result<ProbeResult> {
    if phis.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let grid = df.grid();
    let d = &df.field.values;
    let vol = grid.cell_volume();
    let mut values = Vec::with_capacity(phis.len());
    for phi in phis {
        check_support(phi)?;
        if let Some(om) = omega {
            if let Some(k) = phi.support().into_iter().find(|&k| om.contains(&grid.center(k))) {
                return Err(Error::SupportInCore(k));
            }
        }
        let gphi = gradient(phi);
        let cells = gradient_support(phi);
        let terms: Vec<f64> = exec::map_slice(&cells, |&k| {
            let xi = df.grad.at(k);
            let f = g.value(xi);
            let mut flux = vec![0.0; grid.n];
            g.flux_into(xi, &mut flux);
            let dot: f64 = flux.iter().zip(gphi.at(k)).map(|(a, b)| a * b).sum();
            grid.frac[k] * vol * (d[k] * dot + phi.values[k] * f * f)
        });
        let m = l1_norm(phi);
        let s = exec::pairwise_sum(&terms).abs();
        values.push(if m > 0.0 { s / m } else { 0.0 });
    }
    let (witness, max) = exec::argmax(&values).unwrap_or((0, 0.0));
    Ok(ProbeResult { value: max, witness, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{distance_field, DomainSpec, Grid, GridSpec};
    use crate::gauge::{make_gauge, GaugeSpec};
    use std::sync::Arc;

    fn setup(spec: DomainSpec, h: f64) -> (DistanceField, Gauge) {
        let n = spec.dim();
        let grid = Arc::new(Grid::new(&Domain::new(&spec).unwrap(), GridSpec { h, padding: 0.0 }).unwrap());
        let g = make_gauge(&GaugeSpec::Euclidean { n }).unwrap();
        (distance_field(&g, &grid).unwrap(), g)
    }

    fn radial_bump(df: &DistanceField, r0: f64, r1: f64) -> ScalarField {
        ScalarField::from_fn(df.grid().clone(), |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let s = (2.0 * r - r0 - r1) / (r1 - r0);
            if s.abs() < 1.0 {
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn ball_pairing_matches_radial_quadrature() {
        let (df, g) = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 128.0);
        let phi = radial_bump(&df, 0.3, 0.7);
        let got = f_laplacian_pairing(&df.field, &phi, &g).unwrap();
        // integral of phi (n-1)/|x| over the plane = 2 pi integral of phi(r) dr
        let m = 200_000;
        let exact: f64 = (0..m)
            .map(|i| {
                let r = 0.3 + 0.4 * (i as f64 + 0.5) / m as f64;
                let s = (2.0 * r - 1.0) / 0.4;
                (1.0 - 1.0 / (1.0 - s * s)).exp() * 0.4 / m as f64
            })
            .sum::<f64>()
            * 2.0
            * std::f64::consts::PI;
        assert!((got / exact - 1.0).abs() < 1e-2, "{got} vs {exact}");
        assert!(got > 0.0);
    }

    #[test]
    fn annulus_inner_collar_pairing_is_negative() {
        let (df, g) = setup(DomainSpec::Annulus { center: vec![0.0, 0.0], r_in: 1.0, r_out: 2.0 }, 1.0 / 64.0);
        let phi = radial_bump(&df, 1.1, 1.4);
        assert!(f_laplacian_pairing(&df.field, &phi, &g).unwrap() < 0.0);
        let p = positivity_probe(&df, &g, &[radial_bump(&df, 1.6, 1.9), phi]).unwrap();
        assert_eq!(p.witness, 1);
        assert!(p.value < -0.1);
    }

    #[test]
    fn collar_and_core_are_enforced() {
        let (df, g) = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 32.0);
        let touching = radial_bump(&df, 0.5, 1.2);
        assert!(matches!(f_laplacian_pairing(&df.field, &touching, &g), Err(Error::SupportInCollar(_))));
        let core = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 0.5 }).unwrap();
        let inner = radial_bump(&df, 0.2, 0.6);
        assert!(matches!(feeble_regularity_k(&df, &g, Some(&core), &[inner]), Err(Error::SupportInCore(_))));
        assert!(matches!(positivity_probe(&df, &g, &[]), Err(Error::EmptyFamily)));
    }

    #[test]
    fn pairing_is_linear_in_phi() {
        let (df, g) = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 64.0);
        let a = radial_bump(&df, 0.3, 0.6);
        let b = radial_bump(&df, 0.4, 0.8).scaled(0.7);
        let pa = f_laplacian_pairing(&df.field, &a, &g).unwrap();
        let pb = f_laplacian_pairing(&df.field, &b, &g).unwrap();
        let pab = f_laplacian_pairing(&df.field, &a.add(&b), &g).unwrap();
        assert!((pab - pa - pb).abs() <= 1e-10 * pab.abs());
    }

    #[test]
    fn feeble_constant_on_the_ball_is_below_the_bound() {
        let (df, g) = setup(DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }, 1.0 / 64.0);
        let core = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 0.5 }).unwrap();
        let phis = [radial_bump(&df, 0.52, 0.7), radial_bump(&df, 0.6, 0.92)];
        let k = feeble_regularity_k(&df, &g, Some(&core), &phis).unwrap();
        assert!(k.value > 0.0 && k.value <= 1.0 + 4.0 * df.grid().h, "{k:?}");
        let zero = ScalarField::zeros(df.grid().clone());
        assert_eq!(feeble_regularity_k(&df, &g, None, &[zero]).unwrap().value, 0.0);
    }
}
