use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use timectl_core::capacity::{capacity_numeric, default_chi_grid};
use timectl_core::channel::transmit;
use timectl_core::codec::{build_codebook_with, ml_decode_prefix};
use timectl_core::harness::{run_episode, ExperimentConfig};
use timectl_core::quantizer::quantize;
use timectl_core::rng::{substream, Purpose};
use timectl_core::{CapacityOptions, DelayModel, DiscretizedDist, Layout};

fn capacity(c: &mut Criterion) {
    let opts = CapacityOptions { grid_step: 0.1, ..CapacityOptions::default() };
    let delay = DiscretizedDist::exponential_ceil(1.0, 0.1, 15.0).unwrap();
    let grid = default_chi_grid(1.0, 4);
    c.bench_function("capacity_numeric step 0.1, 4 chi", |b| {
        b.iter(|| capacity_numeric(black_box(&delay), &grid, &opts).unwrap())
    });
}

fn quantizer(c: &mut Criterion) {
    c.bench_function("quantize depth 40", |b| b.iter(|| quantize(black_box(0.3141), 1.0, 40).unwrap()));
}

fn decoding(c: &mut Criterion) {
    let model = DelayModel::Exponential { mean: 1.0 };
    for (n, n_prime) in [(8u32, 4u32), (12, 18)] {
        let cb = build_codebook_with(n, n_prime, 1.0, 7, Layout::Flat, 18).unwrap();
        let mut seed = 0u64;
        c.bench_function(&format!("ml decode flat n={n} n'={n_prime}"), |b| {
            b.iter_batched(
                || {
                    seed += 1;
                    let row = cb.row(seed % cb.rows());
                    transmit(&row, &model, &mut substream(seed, Purpose::Delays, 0)).unwrap().inter_reception
                },
                |d| ml_decode_prefix(&cb, &d, &model),
                BatchSize::SmallInput,
            )
        });
    }
}

fn episode(c: &mut Criterion) {
    let cfg = ExperimentConfig::default();
    c.bench_function("abstract-error episode, 250 steps", |b| b.iter(|| run_episode(&cfg, black_box(3)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = capacity, quantizer, decoding, episode
}
criterion_main!(benches);
