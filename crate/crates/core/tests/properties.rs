use std::sync::{Arc, OnceLock};

use anisogauge::domain::{distance_field, DistanceField, Domain, DomainSpec, Grid, GridSpec};
use anisogauge::field::{f_laplacian_pairing, gradient, weighted_sum, ScalarField};
use anisogauge::gauge::{
    builtin_specs, convexity_split_residual, gauge_constants, make_gauge, polar, polar_numeric, sigma_f, Gauge,
    GaugeSpec,
};
use anisogauge::inequalities::{
    evaluate_check, CheckContext, CheckId, CheckOptions, ExponentSet, Prepared, Status,
};
use anisogauge::testfns::{ground_state_transform, probe_family, sample_family, FamilyKind, TestFunction};
use proptest::prelude::*;

fn gauges(n: usize) -> &'static [Gauge] {
    static G2: OnceLock<Vec<Gauge>> = OnceLock::new();
    static G3: OnceLock<Vec<Gauge>> = OnceLock::new();
    let cell = if n == 2 { &G2 } else { &G3 };
    cell.get_or_init(|| builtin_specs(n).iter().map(|s| make_gauge(s).unwrap()).collect())
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-6))
}

struct Setup {
    gauge: Gauge,
    constants: anisogauge::gauge::GaugeConstants,
    df: DistanceField,
    family: Vec<TestFunction>,
}

fn setup() -> &'static Setup {
    static S: OnceLock<Setup> = OnceLock::new();
    S.get_or_init(|| {
        let gauge = make_gauge(&GaugeSpec::Ellipse { a: vec![4.0, 0.0, 0.0, 1.0], n: 2 }).unwrap();
        let constants = gauge_constants(&gauge, 16, 50_000, 1).unwrap();
        let domain = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
        let grid = Arc::new(Grid::new(&domain, GridSpec { h: 1.0 / 48.0, padding: 0.0 }).unwrap());
        let df = distance_field(&gauge, &grid).unwrap();
        let family = sample_family(&df, 6, 21, &FamilyKind::all()).unwrap();
        Setup { gauge, constants, df, family }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn gauge_norm_axioms(g in 0..4usize, x in vector(2), y in vector(2), c in -5.0..5.0f64) {
        let f = &gauges(2)[g];
        let fx = f.value(&x);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((f.value(&cx) - c.abs() * fx).abs() <= 1e-12 * (1.0 + c.abs() * fx));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((f.value(&neg) - fx).abs() <= 1e-12 * fx);
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(fx + f.value(&y) - f.value(&s) >= -1e-12 * (fx + f.value(&y)));
    }

    #[test]
    fn euler_and_young_equality(g in 0..4usize, n in 2..4usize, seed in prop::collection::vec(-10.0..10.0f64, 3)) {
        let x = &seed[..n];
        prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
        let f = &gauges(n)[g];
        let fx = f.value(x);
        let grad = f.gradient(x);
        let euler: f64 = grad.iter().zip(x).map(|(a, b)| a * b).sum();
        prop_assert!((euler - fx).abs() <= 1e-8 * fx);
        let fp = polar_numeric(f);
        let slack = fx * fp.value(&grad) - euler;
        prop_assert!(slack.abs() <= 1e-8 * fx, "slack {slack}");
    }

    #[test]
    fn convexity_splitting_is_nonnegative(g in 0..4usize, p in prop::sample::select(vec![2.0, 2.5, 3.0, 4.0]), x in vector(2), y in vector(2)) {
        static SIGMA: OnceLock<Vec<f64>> = OnceLock::new();
        let sig = SIGMA.get_or_init(|| gauges(2).iter().map(|f| sigma_f(f, 24).unwrap_or(f64::INFINITY)).collect());
        let r = convexity_split_residual(&gauges(2)[g], p, &x, &y, sig[g]).unwrap();
        let f = &gauges(2)[g];
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        prop_assert!(r / (1.0 + f.value(&s).powf(p)) >= -1e-9, "{r}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bidual_recovers_the_gauge(g in 0..4usize, x in vector(2)) {
        let f = &gauges(2)[g];
        let fpp = polar_numeric(&polar(f));
        let a = fpp.value(&x);
        prop_assert!((a / f.value(&x) - 1.0).abs() < 1e-6, "{a}");
    }

    #[test]
    fn sigma_is_scale_invariant(c in 0.2..5.0f64, a in 1.5..6.0f64) {
        let base = make_gauge(&GaugeSpec::Ellipse { a: vec![a, 0.3, 0.3, 1.0], n: 2 }).unwrap();
        let scaled = make_gauge(&GaugeSpec::Ellipse { a: vec![c * c * a, c * c * 0.3, c * c * 0.3, c * c], n: 2 }).unwrap();
        let s0 = sigma_f(&base, 16).unwrap();
        let s1 = sigma_f(&scaled, 16).unwrap();
        prop_assert!((s0 / s1 - 1.0).abs() < 1e-6, "{s0} {s1}");
    }

    #[test]
    fn distance_is_lipschitz_in_the_polar_metric(
        g in 0..4usize,
        dom in 0..3usize,
        x in prop::collection::vec(0.02..0.98f64, 2),
        y in prop::collection::vec(0.02..0.98f64, 2),
    ) {
        let specs = [
            DomainSpec::Cuboid { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
            DomainSpec::Ball { center: vec![0.5, 0.5], radius: 0.5 },
            DomainSpec::ConvexPolygon { vertices: vec![[0.0, 0.0], [1.0, 0.0], [0.6, 1.0], [0.0, 0.8]] },
        ];
        let d = Domain::new(&specs[dom]).unwrap();
        prop_assume!(d.contains(&x) && d.contains(&y));
        let f = &gauges(2)[g];
        let fp = polar_numeric(f);
        let dx = d.anisotropic_distance(f, &x).unwrap();
        let dy = d.anisotropic_distance(f, &y).unwrap();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!((dx - dy).abs() <= fp.value(&diff) + 1e-9);
        prop_assert!(dx > 0.0);
        if g == 0 {
            prop_assert!((dx - d.euclid_signed(&x)).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exponent_identities(n in 2..6usize, t in 0.0..1.0f64, alpha in 0.0..0.99f64) {
        let hi = n as f64 / (1.0 - alpha);
        let p = 1.0 + t * (hi - 1.0) * 0.999;
        let e = ExponentSet::new(n, p, alpha).unwrap();
        prop_assert!((e.b - (e.inv_p_prime - alpha) * e.s).abs() <= 1e-12 * (1.0 + e.b.abs()).max(e.s));
        prop_assert!((e.a - (e.b + alpha)).abs() <= 1e-12 * (1.0 + e.a.abs()));
        let lhs = 1.0 - e.one_star_alpha * e.inv_p_prime;
        prop_assert!((lhs - 1.0 / e.s).abs() <= 1e-12 * (1.0 + 1.0 / e.s));
    }

    #[test]
    fn critical_exponent_decreases_in_alpha(n in 2..6usize, pf in 0.0..1.0f64, a0 in 0.0..0.98f64, da in 0.0..0.5f64) {
        let p = 1.0 + pf * (n as f64 - 1.0) * 0.999;
        let a1 = (a0 + da).min(0.99);
        let e0 = ExponentSet::new(n, p, a0).unwrap();
        let e1 = ExponentSet::new(n, p, a1).unwrap();
        prop_assert!(e1.p_star_alpha <= e0.p_star_alpha);
        prop_assert!(e1.p_star_alpha >= p);
        let e = ExponentSet::new(n, p, 0.0).unwrap();
        let sobolev = n as f64 * p / (n as f64 - p);
        prop_assert!((e.p_star_alpha - sobolev).abs() <= 1e-12 * sobolev);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratios_are_invariant_under_scaling(member in 0..6usize, c in prop::sample::select(vec![-3.0, 0.25, 7.5]), check in 0..5usize) {
        let s = setup();
        let ids = [CheckId::Gagliardo, CheckId::WeightedSobolev, CheckId::GradientOnly, CheckId::LaplacianForm, CheckId::HardySobolev];
        let exps = ExponentSet::new(2, 2.0, 0.5).unwrap();
        let ctx = CheckContext::new(&s.gauge, &s.constants, &s.df, CheckOptions::default());
        let f = &s.family[member];
        let base = evaluate_check(ids[check], &Prepared::new("a", f.field.clone(), &s.gauge), &ctx, &exps).unwrap();
        let scaled = evaluate_check(ids[check], &Prepared::new("b", f.field.scaled(c), &s.gauge), &ctx, &exps).unwrap();
        let deg = c.abs().powf(if ids[check] == CheckId::Gagliardo { 1.0 } else { exps.p });
        prop_assert!((scaled.lhs - deg * base.lhs).abs() <= 1e-9 * deg * base.lhs.abs().max(1e-300));
        match (base.ratio, scaled.ratio) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} {b}"),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
    }

    #[test]
    fn pairing_is_linear(i in 0..24usize, j in 0..24usize, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let s = setup();
        static PROBES: OnceLock<Vec<ScalarField>> = OnceLock::new();
        let probes = PROBES.get_or_init(|| probe_family(&s.df, 24).unwrap());
        let (i, j) = (i % probes.len(), j % probes.len());
        let u = &s.df.field;
        let combo = probes[i].scaled(a).add(&probes[j].scaled(b));
        let lhs = f_laplacian_pairing(u, &combo, &s.gauge).unwrap();
        let pi = f_laplacian_pairing(u, &probes[i], &s.gauge).unwrap();
        let pj = f_laplacian_pairing(u, &probes[j], &s.gauge).unwrap();
        let rhs = a * pi + b * pj;
        let scale = (a * pi).abs() + (b * pj).abs();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.max(1e-300), "{lhs} {rhs}");
    }

    #[test]
    fn ground_state_transform_is_homogeneous(member in 0..6usize, c in -4.0..4.0f64, p in 1.5..4.0f64) {
        let s = setup();
        let v = &s.family[member].field;
        let u = ground_state_transform(v, &s.df, p).unwrap();
        let uc = ground_state_transform(&v.scaled(c), &s.df, p).unwrap();
        for (a, b) in u.values.iter().zip(&uc.values) {
            prop_assert!((b - c * a).abs() <= 1e-12 * (1.0 + (c * a).abs()));
        }
    }

    #[test]
    fn integrated_splitting_agrees_with_pointwise(member in 0..6usize, p in prop::sample::select(vec![2.0, 3.0])) {
        let s = setup();
        let exps = ExponentSet::new(2, p, ExponentSet::auto_alpha(2, p)).unwrap();
        let ctx = CheckContext::new(&s.gauge, &s.constants, &s.df, CheckOptions::default());
        let v = &s.family[member].field;
        let pointwise = evaluate_check(CheckId::ConvexityPointwise, &Prepared::new("v", v.clone(), &s.gauge), &ctx, &exps).unwrap();
        prop_assume!(pointwise.status == Status::Pass);
        // convex2 integrated with u = d^(1/p') v and the finite-difference gradient of u
        let sigma = s.constants.sigma_f.unwrap_or(f64::INFINITY);
        let u = ground_state_transform(v, &s.df, p).unwrap();
        let gu = gradient(&u);
        let gv = gradient(v);
        let d = &s.df.field.values;
        let grid = s.df.grid();
        let mut integrand = vec![0.0; grid.len()];
        let mut scale = vec![0.0; grid.len()];
        for k in 0..grid.len() {
            if !grid.inside[k] || d[k] <= 0.0 {
                continue;
            }
            let c1 = exps.inv_p_prime * d[k].powf(-1.0 / p) * v.values[k];
            let c2 = d[k].powf(exps.inv_p_prime);
            let xi1: Vec<f64> = s.df.grad.at(k).iter().map(|x| c1 * x).collect();
            let xi2: Vec<f64> = gv.at(k).iter().map(|x| c2 * x).collect();
            let split = convexity_split_residual(&s.gauge, p, &xi1, &xi2, sigma).unwrap();
            let sum: Vec<f64> = xi1.iter().zip(&xi2).map(|(a, b)| a + b).collect();
            integrand[k] = split + s.gauge.value(gu.at(k)).powf(p) - s.gauge.value(&sum).powf(p);
            scale[k] = s.gauge.value(gu.at(k)).powf(p);
        }
        let total = weighted_sum(&s.df, 0.0, &integrand).unwrap();
        let norm = weighted_sum(&s.df, 0.0, &scale).unwrap();
        prop_assert!(total >= -10.0 * grid.h * norm, "{total} vs {norm}");
    }
}
