//! Sequential versus rayon execution of the data-parallel hot paths.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use snn_dlbp::descriptors::{conv_encode, PatchGeometry};
use snn_dlbp::event_io::{poisson_stream, SpikeRaster};
use snn_dlbp::network::{NetworkConfig, NetworkWeights, SimOptions};
use snn_dlbp::neuron::{prox_curve, LifParams};
use snn_dlbp::oracle::oracle_check;
use snn_dlbp::tuning::init_weights;
use snn_dlbp::{Exec, DEFAULT_DT};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_prox(c: &mut Criterion) {
    let p = LifParams::matched(0.25, DEFAULT_DT).unwrap();
    let mut g = c.benchmark_group("prox_curve");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| prox_curve(&p, -1.0, 1.0, 81, 5.0, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let seeds: Vec<u64> = (0..20).collect();
    let mut g = c.benchmark_group("oracle_check");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| oracle_check(16, 32, 0.25, &seeds, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_conv(c: &mut Criterion) {
    let (w, h) = (32u16, 32u16);
    let rates: Vec<f64> = (0..(w as usize * h as usize)).map(|i| ((i % 7) as f64 - 3.0) * 10.0).collect();
    let stream = poisson_stream(w, h, &rates, 0.5, 3).unwrap();
    let input = SpikeRaster::from_stream(&stream, DEFAULT_DT, 0.5).unwrap();
    let geom = PatchGeometry {
        width: w as usize,
        height: h as usize,
        patch_w: 8,
        patch_h: 8,
        stride: 4,
    };
    let cfg = NetworkConfig::new(64, 32, 0.25).unwrap();
    let weights = Arc::new(NetworkWeights::from_phi(init_weights(64, 32, 1.0, 0.5, 1).unwrap()));
    let opts = SimOptions::default();
    let mut g = c.benchmark_group("conv_encode");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| conv_encode(&input, &geom, &cfg, &weights, &opts, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_prox, bench_oracle, bench_conv);
criterion_main!(benches);
