use super::Gauge;
use crate::error::{Error, Result};

/// `F^p(xi1+xi2) - F^p(xi1) - 2^(1-p)/sigma^p F^p(xi2) - p F^(p-1)(xi1) F_xi(xi1) . xi2`.
///
/// Nonnegative whenever `sigma >= sigma_F`. `sigma = inf` drops the
/// uniform-convexity term. At `xi1 = 0` the gradient term is extended by
/// continuity (it vanishes for `p >= 2`).
pub fn convexity_split_residual(g: &Gauge, p: f64, xi1: &[f64], xi2: &[f64], sigma: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::Precondition(format!("convexity splitting needs p >= 2, got {p}")));
    }
    let n = g.dim();
    let sum: Vec<f64> = (0..n).map(|i| xi1[i] + xi2[i]).collect();
    let f1 = g.value(xi1);
    let mut flux = vec![0.0; n];
    g.flux_into(xi1, &mut flux);
    // F^(p-1) F_xi = F^(p-2) (F F_xi)
    let lin = if f1 > 0.0 {
        p * f1.powf(p - 2.0) * flux.iter().zip(xi2).map(|(a, b)| a * b).sum::<f64>()
    } else {
        0.0
    };
    let coef = if sigma.is_infinite() { 0.0 } else { 2f64.powf(1.0 - p) / sigma.powf(p) };
    Ok(g.value(&sum).powf(p) - f1.powf(p) - coef * g.value(xi2).powf(p) - lin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{make_gauge, GaugeSpec};

    #[test]
    fn residual_examples() {
        let e = make_gauge(&GaugeSpec::Euclidean { n: 2 }).unwrap();
        let r = convexity_split_residual(&e, 2.0, &[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        let r = convexity_split_residual(&e, 3.0, &[0.4, -0.2], &[0.0, 0.0], 1.0).unwrap();
        assert!(r.abs() < 1e-15);
        assert!(convexity_split_residual(&e, 1.5, &[1.0, 0.0], &[0.0, 1.0], 1.0).is_err());
    }
}
