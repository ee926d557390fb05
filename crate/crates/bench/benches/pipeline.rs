use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pansharp_bench::scene;
use pansharp_core::{fit_spectral_weights, fuse, spatial_degrade, DegradeConfig, FusionTag, SensorSpec};

fn bench_fusion(c: &mut Criterion) {
    let s = scene(256, 4);
    let spec = SensorSpec::new("bench", 4, 11, 4).unwrap();
    let mut group = c.benchmark_group("fuse_256");
    for tag in FusionTag::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(tag), &tag, |b, &tag| {
            b.iter(|| fuse(&s.pan, &s.lrms, &spec, tag).unwrap())
        });
    }
    group.finish();
}

fn bench_degrade(c: &mut Criterion) {
    let s = scene(256, 5);
    let cfg = DegradeConfig::default();
    c.bench_function("spatial_degrade_256x4", |b| b.iter(|| spatial_degrade(&s.hrms, &cfg).unwrap()));
    let pan_r = spatial_degrade(&s.pan, &cfg).unwrap();
    c.bench_function("fit_spectral_64", |b| b.iter(|| fit_spectral_weights(&s.lrms, &pan_r, 0.0).unwrap()));
}

fn bench_synth(c: &mut Criterion) {
    c.bench_function("generate_scene_256", |b| b.iter(|| scene(256, 6)));
}

criterion_group!(pipeline, bench_fusion, bench_degrade, bench_synth);
criterion_main!(pipeline);
