//! Serial vs parallel throughput of the two data-parallel cores: exhaustive
//! sequence scoring and Monte-Carlo shot sampling.

use criterion::{criterion_group, criterion_main, Criterion};

use qpartial_core::optimizer::{optimize_one_stage_serial, optimize_two_stage_serial, DEFAULT_MARGIN};
use qpartial_core::twostage::{compose, simulate_end_to_end_serial};
use qpartial_core::OperatorSequence;

#[cfg(feature = "parallel")]
use qpartial_core::optimizer::{optimize_one_stage, optimize_two_stage};
#[cfg(feature = "parallel")]
use qpartial_core::twostage::simulate_end_to_end;

fn bench_one_stage(c: &mut Criterion) {
    let m_set: Vec<u32> = (1..8).collect();
    let mut group = c.benchmark_group("one_stage_n8_k13");
    group.sample_size(10);
    group.bench_function("serial", |b| {
        b.iter(|| optimize_one_stage_serial(8, 13, &m_set, DEFAULT_MARGIN).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| optimize_one_stage(8, 13, &m_set, DEFAULT_MARGIN).unwrap())
    });
    group.finish();
}

fn bench_two_stage(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_stage_n9_k18");
    group.sample_size(10);
    group.bench_function("serial", |b| {
        b.iter(|| optimize_two_stage_serial(9, 18, 2, DEFAULT_MARGIN).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| optimize_two_stage(9, 18, 2, DEFAULT_MARGIN).unwrap())
    });
    group.finish();
}

fn bench_shots(c: &mut Criterion) {
    let first: OperatorSequence = "S(6,2;1,1,3,1)".parse().unwrap();
    let plan = compose(first, 2).unwrap();
    let mut group = c.benchmark_group("shots_n6_100k");
    group.sample_size(10);
    group.bench_function("serial", |b| {
        b.iter(|| simulate_end_to_end_serial(&plan, 11, 100_000, 7).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| simulate_end_to_end(&plan, 11, 100_000, 7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_one_stage, bench_two_stage, bench_shots);
criterion_main!(benches);
