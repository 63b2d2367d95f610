use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fbct_core::fbct::{fbct_table, fbct_uniformity, FbctOptions, PerturbedFbct};
use fbct_core::{inverse_function, swapped_inverse, Field, Transposition};

fn field(s: &str) -> Arc<Field> {
    Arc::new(Field::parse(s).unwrap())
}

fn field_mul(c: &mut Criterion) {
    let mut g = c.benchmark_group("field_mul");
    for s in ["2^8", "3^5", "2^16"] {
        let k = field(s);
        let q = k.order();
        g.bench_function(BenchmarkId::from_parameter(s), |b| {
            b.iter(|| {
                let mut acc = 1;
                for x in 1..q.min(4096) {
                    acc = k.mul(acc, black_box(x));
                }
                acc
            })
        });
    }
    g.finish();
}

fn table_engines(c: &mut Criterion) {
    let k = field("2^8");
    let f = swapped_inverse(&k, Transposition::new(0, 1).unwrap()).unwrap();
    let mut g = c.benchmark_group("fbct_table_2^8");
    g.sample_size(10);
    g.bench_function("direct", |b| {
        b.iter(|| fbct_table(black_box(&f), &FbctOptions::default()).unwrap())
    });
    g.bench_function("direct_unreduced", |b| {
        b.iter(|| fbct_table(black_box(&f), &FbctOptions::unreduced()).unwrap())
    });
    g.bench_function("collision", |b| {
        b.iter(|| fbct_table(black_box(&f), &FbctOptions::collision()).unwrap())
    });
    g.finish();
}

fn gamma_sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("uniformity_per_gamma");
    g.sample_size(10);
    for s in ["2^7", "3^4"] {
        let k = field(s);
        let base = inverse_function(&k);
        let engine = PerturbedFbct::new(&base).unwrap();
        let gammas: Vec<u32> = (2..k.order()).take(16).collect();
        let swaps: Vec<_> = gammas
            .iter()
            .map(|&gm| swapped_inverse(&k, Transposition::new(1, gm).unwrap()).unwrap())
            .collect();
        g.bench_function(BenchmarkId::new("perturbed", s), |b| {
            b.iter(|| swaps.iter().map(|f| engine.uniformity(f).unwrap()).max())
        });
        g.bench_function(BenchmarkId::new("collision", s), |b| {
            b.iter(|| {
                swaps
                    .iter()
                    .map(|f| fbct_uniformity(f, &FbctOptions::collision()).unwrap())
                    .count()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, field_mul, table_engines, gamma_sweep);
criterion_main!(benches);
