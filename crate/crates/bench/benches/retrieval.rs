use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use geofact_bench::{corpus, queries, verdicts};
use geofact_core::factscore;
use geofact_core::knowledge::{build_index, retrieve};

fn bench_build_index(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_index");
    for n in [100, 1000] {
        let passages = corpus(n, 5000, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &passages, |b, p| {
            b.iter(|| build_index(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn bench_retrieve(c: &mut Criterion) {
    let mut group = c.benchmark_group("retrieve");
    for n in [100, 1000] {
        let index = build_index(&corpus(n, 5000, 2)).unwrap();
        let qs = queries(64, 5000, 3);
        group.bench_with_input(BenchmarkId::new("top5", n), &index, |b, index| {
            let mut i = 0;
            b.iter(|| {
                i = (i + 1) % qs.len();
                retrieve(index, black_box(&qs[i]), 5).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_factscore(c: &mut Criterion) {
    let v = verdicts(200, 4);
    c.bench_function("factscore/200", |b| b.iter(|| factscore(black_box(&v)).unwrap()));
}

criterion_group!(benches, bench_build_index, bench_retrieve, bench_factscore);
criterion_main!(benches);
