use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use memtrack_bench::{cost_matrix, dance, metric_pair, structured_model, tim_batch};
use memtrack_core::memory::MemoryConfig;
use memtrack_core::metrics::{evaluate, hota, hungarian};
use memtrack_core::tim::tim_forward;
use memtrack_core::{run_sequence, Tracker, TrackerConfig};
use std::hint::black_box;

fn assignment(c: &mut Criterion) {
    let mut g = c.benchmark_group("hungarian");
    for n in [8, 32, 128] {
        let cost = cost_matrix(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, cost| {
            b.iter(|| hungarian(black_box(cost)).unwrap())
        });
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let (gt, pred) = metric_pair(8, 200, 3);
    c.bench_function("hota/8x200", |b| b.iter(|| hota(black_box(&gt), black_box(&pred)).unwrap()));
    c.bench_function("evaluate/8x200", |b| b.iter(|| evaluate(black_box(&gt), black_box(&pred)).unwrap()));
}

fn temporal(c: &mut Criterion) {
    let (p, batch) = tim_batch(8, 64, 5);
    let mem = MemoryConfig::default();
    c.bench_function("tim_forward/8x64", |b| b.iter(|| tim_forward(black_box(&batch), &p, &mem).unwrap()));
}

fn tracking(c: &mut Criterion) {
    let s = dance(8, 200, 7);
    let model = structured_model();
    let cfg = TrackerConfig::default();
    c.bench_function("tracker/step", |b| {
        b.iter_batched(
            || {
                let mut t = Tracker::new(model.clone(), cfg).unwrap();
                for f in &s.frames[..20] {
                    t.step(f).unwrap();
                }
                t
            },
            |mut t| t.step(black_box(&s.frames[20])).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
    let mut g = c.benchmark_group("tracker");
    g.sample_size(10);
    g.bench_function("sequence/8x200", |b| b.iter(|| run_sequence(&model, &cfg, black_box(&s.frames)).unwrap()));
    g.finish();
}

criterion_group!(benches, assignment, metrics, temporal, tracking);
criterion_main!(benches);
