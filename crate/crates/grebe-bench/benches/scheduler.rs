//! Request planning cost over cluster-sized page layouts.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use grebe::clusterpool::{plan_requests, SchedulerConfig};
use grebe_bench::gapped_layout;
use std::hint::black_box;

fn bench_plan(c: &mut Criterion) {
    let mut group = c.benchmark_group("plan_requests");
    for pages in [64usize, 1024, 16 << 10] {
        let contiguous = gapped_layout(pages, 4096, 0, 5);
        let gappy = gapped_layout(pages, 4096, 64 << 10, 5);
        let config = SchedulerConfig::default();
        group.throughput(Throughput::Elements(pages as u64));
        group.bench_function(BenchmarkId::new("contiguous", pages), |b| {
            b.iter(|| plan_requests(black_box(&contiguous), &config).unwrap())
        });
        group.bench_function(BenchmarkId::new("gappy", pages), |b| {
            b.iter(|| plan_requests(black_box(&gappy), &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_plan);
criterion_main!(benches);
