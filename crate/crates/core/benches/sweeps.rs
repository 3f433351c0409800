use std::sync::Arc;

use anisogauge::domain::{distance_field, Domain, DomainSpec, Grid, GridSpec};
use anisogauge::exec;
use anisogauge::gauge::{gauge_constants, make_gauge, GaugeSpec};
use anisogauge::inequalities::{prepare_family, prepared_rows, CheckContext, CheckId, CheckOptions, ExponentSet};
use anisogauge::testfns::{sample_family, FamilyKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn sweeps(c: &mut Criterion) {
    let gauge = make_gauge(&GaugeSpec::Ellipse { a: vec![4.0, 0.0, 0.0, 1.0], n: 2 }).unwrap();
    let constants = gauge_constants(&gauge, 16, 20_000, 1).unwrap();
    let domain = Domain::new(&DomainSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 }).unwrap();
    let grid = Arc::new(Grid::new(&domain, GridSpec { h: 1.0 / 96.0, padding: 0.0 }).unwrap());
    let df = distance_field(&gauge, &grid).unwrap();
    let family = sample_family(&df, 8, 3, &FamilyKind::all()).unwrap();
    let exps = ExponentSet::new(2, 1.5, 0.25).unwrap();

    let mut group = c.benchmark_group("sweeps");
    group.sample_size(10);
    for mode in ["parallel", "sequential"] {
        let run = |f: &mut dyn FnMut()| if mode == "parallel" { f() } else { exec::sequential(f) };
        group.bench_function(BenchmarkId::new("distance_field", mode), |b| {
            b.iter(|| run(&mut || drop(distance_field(&gauge, &grid).unwrap())))
        });
        group.bench_function(BenchmarkId::new("hardy_sobolev_family", mode), |b| {
            b.iter(|| {
                run(&mut || {
                    let ctx = CheckContext::new(&gauge, &constants, &df, CheckOptions::default());
                    let prepared = prepare_family(&family, &ctx).unwrap();
                    drop(prepared_rows(CheckId::HardySobolev, &prepared, &ctx, &exps).unwrap());
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
