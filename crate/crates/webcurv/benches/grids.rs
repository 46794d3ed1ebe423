//! Benchmarks the data-parallel grid evaluation against the sequential
//! fallback. `par_map` dispatches through rayon when the `parallel` feature
//! is enabled (the default), so the "parallel" series measures the rayon
//! path and the "sequential" series a plain iterator over the same points.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use webcurv::expr::parse;
use webcurv::models::sphere_model;
use webcurv::par::par_map;
use webcurv::webgeom::{curvature_report, WebModel};

fn exp_xy() -> WebModel {
    WebModel::Explicit {
        n: 1,
        entries: vec![vec![parse("exp(x1*y1)", &["x1", "y1"]).unwrap()]],
        params: vec![],
    }
}

fn sphere() -> WebModel {
    WebModel::RaySpace(sphere_model([0.1, 0.2, 0.3], 1.0))
}

fn grid(dim: usize, side: usize, half: f64) -> Vec<Vec<f64>> {
    let step = 2.0 * half / (side.max(2) - 1) as f64;
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut k| {
            (0..dim)
                .map(|_| {
                    let i = k % side;
                    k /= side;
                    -half + step * i as f64
                })
                .collect()
        })
        .collect()
}

fn bench_grid(c: &mut Criterion, name: &str, m: WebModel, points: Vec<Vec<f64>>) {
    let mut group = c.benchmark_group(name);
    group.throughput(Throughput::Elements(points.len() as u64));
    group.bench_with_input(
        BenchmarkId::new("parallel", points.len()),
        &points,
        |b, pts| {
            b.iter(|| par_map(pts, |p| curvature_report(&m, p).unwrap()));
        },
    );
    group.bench_with_input(
        BenchmarkId::new("sequential", points.len()),
        &points,
        |b, pts| {
            b.iter(|| {
                pts.iter()
                    .map(|p| curvature_report(&m, p).unwrap())
                    .collect::<Vec<_>>()
            });
        },
    );
    group.finish();
}

fn benches(c: &mut Criterion) {
    bench_grid(c, "planar_grid", exp_xy(), grid(2, 24, 0.4));
    bench_grid(c, "sphere_grid", sphere(), grid(4, 3, 0.15));
}

criterion_group!(grids, benches);
criterion_main!(grids);
