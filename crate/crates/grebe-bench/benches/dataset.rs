//! End-to-end write and read throughput on the lhcb-like sample.

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use grebe::gen::{self, SampleShape};
use grebe::{ContainerSource, ContainerTarget, DatasetReader, WriterOptions};
use std::hint::black_box;
use tempfile::TempDir;

fn bench_write(c: &mut Criterion) {
    let dir = TempDir::new().unwrap();
    let shape = SampleShape::preset("lhcb-like").unwrap().scaled(0.02);
    let path = dir.path().join("w.grb");
    let entries = shape.entry_count;

    let mut group = c.benchmark_group("write");
    group.sample_size(20);
    group.throughput(Throughput::Elements(entries));
    group.bench_function("lhcb_like", |b| {
        b.iter(|| {
            let target = ContainerTarget::BareFile(path.clone());
            black_box(gen::generate(&shape, 17, &target, WriterOptions::default()).unwrap())
        })
    });
    group.finish();
}

fn bench_read(c: &mut Criterion) {
    let dir = TempDir::new().unwrap();
    let shape = SampleShape::preset("lhcb-like").unwrap().scaled(0.1);
    let path = dir.path().join("r.grb");
    let summary = gen::generate(
        &shape,
        17,
        &ContainerTarget::BareFile(path.clone()),
        WriterOptions::default(),
    )
    .unwrap();
    let reader = DatasetReader::open(&ContainerSource::BareFile(path)).unwrap();

    let mut group = c.benchmark_group("read");
    group.throughput(Throughput::Elements(summary.entries));
    group.bench_function("all_entries", |b| {
        let mut entry = reader.create_entry();
        b.iter(|| {
            for i in 0..summary.entries {
                reader.load_entry(i, &mut entry).unwrap();
            }
            black_box(&entry);
        })
    });
    group.bench_function("six_column_checksum", |b| {
        b.iter(|| {
            reader
                .checksum_fields(black_box(&["f0000", "f0003", "f0007", "f0010", "f0019", "f0025"]))
                .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_write, bench_read);
criterion_main!(benches);
