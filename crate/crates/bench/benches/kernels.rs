use criterion::{black_box, criterion_group, criterion_main, Criterion};

use qlp_core::bartnik::{advance_u, Coefficients};
use qlp_core::flow::{run_flow, step_flow, FlowConfig, Slice};
use qlp_core::refgeom::{ConformalProfile, ReferenceManifold};
use qlp_core::sphere::SphereGrid;
use qlp_core::surfgeom::{geometry, StarSurface};
use qlp_core::solve_u;

fn profile() -> ConformalProfile {
    ConformalProfile::new(&ReferenceManifold::schwarzschild(1.0).unwrap(), 2.05, 400.0).unwrap()
}

fn transforms(c: &mut Criterion) {
    for (nt, np) in [(16, 32), (32, 64)] {
        let grid = SphereGrid::new(nt, np).unwrap();
        let f = grid.from_fn(|t, p| (3.0 * t).cos() * (1.0 + 0.2 * p.sin()));
        c.bench_function(&format!("analyze_{nt}x{np}"), |b| b.iter(|| grid.analyze(black_box(&f))));
        c.bench_function(&format!("jet3_{nt}x{np}"), |b| b.iter(|| grid.jet3(black_box(&f))));
    }
}

fn surfaces(c: &mut Criterion) {
    let p = profile();
    let grid = SphereGrid::new(16, 32).unwrap();
    let s = StarSurface::ellipsoid(&p, &grid, 5.0, 0.1).unwrap();
    c.bench_function("geometry_16x32", |b| b.iter(|| geometry(black_box(&s)).unwrap()));
    c.bench_function("step_flow_16x32", |b| b.iter(|| step_flow(black_box(&s), 0.05).unwrap()));
}

fn u_equation(c: &mut Criterion) {
    let p = profile();
    let grid = SphereGrid::new(16, 32).unwrap();
    let s0 = StarSurface::ellipsoid(&p, &grid, 5.0, 0.1).unwrap();
    let s1 = step_flow(&s0, 0.05).unwrap();
    let a = Coefficients::from_slice(&Slice::new(0.0, s0.clone()).unwrap(), 0).unwrap();
    let b1 = Coefficients::from_slice(&Slice::new(0.05, s1).unwrap(), 1).unwrap();
    let u = grid.from_fn(|t, ph| 1.1 + 0.05 * t.sin().powi(2) * (2.0 * ph).cos());
    c.bench_function("advance_u_16x32", |b| b.iter(|| advance_u(&grid, &a, &b1, black_box(&u), 0.05).unwrap()));

    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("flow_and_solve_8x16", |b| {
        let g = SphereGrid::new(8, 16).unwrap();
        let s = StarSurface::ellipsoid(&p, &g, 5.0, 0.1).unwrap();
        b.iter(|| {
            let fol = run_flow(&s, &FlowConfig::new(0.05, 5.0, (8, 16))).unwrap();
            solve_u(&fol, &vec![1.1; g.len()]).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, transforms, surfaces, u_equation);
criterion_main!(benches);
