//! Element packing and unpacking, the per-page CPU cost floor.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use grebe::pages::{pack_page, unpack_page, Page};
use grebe::format::PhysicalType;
use grebe_bench::{plateau_f64, sparse_bools};
use std::hint::black_box;

const ELEMENTS: usize = 64 << 10;

fn f64_page() -> Page {
    Page::new(0, PhysicalType::Float64, 0, ELEMENTS as u64, plateau_f64(ELEMENTS, 11)).unwrap()
}

fn bit_page() -> Page {
    Page::new(0, PhysicalType::Bit, 0, ELEMENTS as u64, sparse_bools(ELEMENTS, 11)).unwrap()
}

fn bench_pack(c: &mut Criterion) {
    let mut group = c.benchmark_group("pack");
    let f64s = f64_page();
    group.throughput(Throughput::Bytes(f64s.payload().len() as u64));
    group.bench_function(BenchmarkId::from_parameter("float64"), |b| {
        b.iter(|| pack_page(black_box(&f64s), None).unwrap())
    });
    let bits = bit_page();
    group.throughput(Throughput::Bytes(bits.payload().len() as u64));
    group.bench_function(BenchmarkId::from_parameter("bit"), |b| {
        b.iter(|| pack_page(black_box(&bits), None).unwrap())
    });
    group.finish();
}

fn bench_unpack(c: &mut Criterion) {
    let mut group = c.benchmark_group("unpack");
    let f64s = pack_page(&f64_page(), None).unwrap();
    group.throughput(Throughput::Bytes(f64s.len() as u64));
    group.bench_function(BenchmarkId::from_parameter("float64"), |b| {
        b.iter(|| {
            unpack_page(black_box(&f64s), 0, PhysicalType::Float64, 0, ELEMENTS as u64).unwrap()
        })
    });
    let bits = pack_page(&bit_page(), None).unwrap();
    group.throughput(Throughput::Bytes(bits.len() as u64));
    group.bench_function(BenchmarkId::from_parameter("bit"), |b| {
        b.iter(|| unpack_page(black_box(&bits), 0, PhysicalType::Bit, 0, ELEMENTS as u64).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_pack, bench_unpack);
criterion_main!(benches);
