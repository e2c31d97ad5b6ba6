use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cropmix_bench::gradient;
use cropmix_core::pipeline::apply;
use cropmix_core::resize::resize;
use cropmix_core::{BetaParams, InterpolationMode, PipelineConfig, RngStream};
use std::hint::black_box;

fn bench_resize(c: &mut Criterion) {
    let img = gradient(3, 375, 500);
    let mut group = c.benchmark_group("resize_500x375_to_224");
    for mode in InterpolationMode::ALL {
        group.bench_with_input(
            BenchmarkId::from_parameter(mode.as_str()),
            &mode,
            |b, &mode| b.iter(|| resize(black_box(&img), 224, 224, mode)),
        );
    }
    group.finish();
}

fn bench_apply(c: &mut Criterion) {
    let img = gradient(3, 375, 500);
    let cropmix = PipelineConfig::default();
    let rrc = cropmix.as_baseline();
    let mut group = c.benchmark_group("apply_224");
    for (name, cfg) in [("rrc", &rrc), ("cropmix", &cropmix)] {
        let mut index = 0u64;
        group.bench_function(name, |b| {
            b.iter(|| {
                index += 1;
                apply(black_box(&img), cfg, 7, index).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_beta(c: &mut Criterion) {
    let mut group = c.benchmark_group("beta_sample");
    for alpha in [0.1, 0.4, 1.0] {
        let params = BetaParams::new(alpha).unwrap();
        let mut rng = RngStream::split(3, 0);
        group.bench_with_input(BenchmarkId::from_parameter(alpha), &params, |b, p| {
            b.iter(|| rng.beta(black_box(*p)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_resize, bench_apply, bench_beta);
criterion_main!(benches);
