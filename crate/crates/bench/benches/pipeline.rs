use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use lonscape::encodings::MutationRates;
use lonscape::evaluate::{evaluate, EvaluatorConfig};
use lonscape::lon::{build_lon, lon_summary};
use lonscape::model::hash_phenotype;
use lonscape::stats::mann_whitney_u;
use lonscape::{Encoding, RngStream};
use lonscape_bench::{genotypes, run_logs, trees};

fn expression(c: &mut Criterion) {
    let mut group = c.benchmark_group("express");
    for enc in Encoding::ALL {
        let gs = genotypes(enc, 64);
        group.bench_function(enc.name(), |b| {
            b.iter(|| gs.iter().map(|g| g.express().unwrap().len()).sum::<usize>())
        });
    }
    group.finish();
}

fn mutation(c: &mut Criterion) {
    let mut group = c.benchmark_group("mutate");
    for enc in Encoding::ALL {
        let gs = genotypes(enc, 64);
        let rates = MutationRates::for_encoding(enc);
        group.bench_function(enc.name(), |b| {
            let mut rng = RngStream::new(3);
            b.iter(|| {
                for g in &gs {
                    black_box(g.mutate(&rates, &mut rng));
                }
            })
        });
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let ts = trees(Encoding::Direct, 64);
    let cfg = EvaluatorConfig::default();
    c.bench_function("surrogate fitness", |b| {
        b.iter(|| ts.iter().map(|t| evaluate(t, &cfg).unwrap().value).sum::<f64>())
    });
    c.bench_function("phenotype hash", |b| {
        b.iter(|| ts.iter().fold(0u64, |acc, t| acc ^ hash_phenotype(t).unwrap()))
    });
}

fn lon(c: &mut Criterion) {
    let logs = run_logs(Encoding::LSystem, 30);
    c.bench_function("build lon", |b| b.iter(|| build_lon(black_box(&logs)).unwrap()));
    let lon = build_lon(&logs).unwrap();
    c.bench_function("lon summary", |b| b.iter(|| lon_summary(black_box(&lon))));
}

fn u_test(c: &mut Criterion) {
    let mut rng = RngStream::new(11);
    let mut sample = |n: usize| (0..n).map(|_| rng.uniform(0.0, 100.0)).collect::<Vec<f64>>();
    let (small_a, small_b) = (sample(8), sample(8));
    let (big_a, big_b) = (sample(1000), sample(1000));
    c.bench_function("u-test exact 8x8", |b| {
        b.iter(|| mann_whitney_u(&small_a, &small_b).unwrap())
    });
    c.bench_function("u-test normal 1000x1000", |b| {
        b.iter_batched(
            || (big_a.clone(), big_b.clone()),
            |(a, b)| mann_whitney_u(&a, &b).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, expression, mutation, scoring, lon, u_test);
criterion_main!(benches);
