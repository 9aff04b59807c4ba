use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use phasealign::data::{decimate, label_phases, prepare_split, PrepConfig};
use phasealign::metrics::{pca_project, proxy_a_distance, ProbeConfig};
use phasealign::synth::{gen_flight, FlightClass};
use phasealign::Tensor;
use phasealign_bench::{fleet, small_split};

fn generate(c: &mut Criterion) {
    let spec = FlightClass::Long.spec();
    c.bench_function("gen_flight_long", |b| b.iter(|| gen_flight(black_box(&spec), 3)));
}

fn preprocess(c: &mut Criterion) {
    let units = fleet(FlightClass::Medium, 1, 4);
    let unit = &units[0];
    c.bench_function("decimate_unit", |b| {
        b.iter(|| decimate(black_box(unit), 10, 8).unwrap())
    });
    c.bench_function("label_phases_unit", |b| {
        b.iter(|| label_phases(black_box(unit), 0.5, 51).unwrap())
    });
    let src = fleet(FlightClass::Short, 2, 1);
    let tgt = fleet(FlightClass::Long, 1, 2);
    let cfg = PrepConfig {
        window_stride: 20,
        ..PrepConfig::default()
    };
    c.bench_function("prepare_split_small", |b| {
        b.iter(|| prepare_split(black_box(&src), &tgt, &cfg).unwrap())
    });
}

fn evaluate(c: &mut Criterion) {
    let split = small_split(20);
    let n = split.source.len().min(300);
    let emb = |k: usize| Tensor::from_fn([n, 50], move |i| ((i * (k + 1)) as f64 * 0.07).sin());
    let (s, t) = (emb(1), emb(2));
    let probe = ProbeConfig {
        epochs: 20,
        seeds: 1,
        ..ProbeConfig::default()
    };
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.bench_function("pad_probe_20_epochs", |b| {
        b.iter(|| proxy_a_distance(black_box(&s), &t, &probe).unwrap())
    });
    group.bench_function("pca_2d", |b| b.iter(|| pca_project(black_box(&s), 2).unwrap()));
    group.finish();
}

criterion_group!(benches, generate, preprocess, evaluate);
criterion_main!(benches);
