use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fsl_core::curvature::square_grid;
use fsl_core::engine::Engine;
use fsl_core::indicatrix::averaged_metric_polar;
use fsl_core::metric::preset;
use fsl_core::par::{map_seq, par_map};

fn averaged_metric_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("averaged_metric_grid");
    group.sample_size(10);
    for spec in ["randers-shear:0.3", "plane:trifocal-rot"] {
        let m = preset(spec).unwrap();
        let grid = square_grid([0.0, 0.0], 1.0, 5);
        let eval = |p: &[f64; 2]| averaged_metric_polar(m.as_ref(), *p, 128, &Engine::Dual).unwrap().0;
        group.bench_with_input(BenchmarkId::new("par_map", spec), &grid, |b, g| b.iter(|| par_map(g, eval)));
        group.bench_with_input(BenchmarkId::new("map_seq", spec), &grid, |b, g| b.iter(|| map_seq(g, eval)));
    }
    group.finish();
}

criterion_group!(benches, averaged_metric_grid);
criterion_main!(benches);
