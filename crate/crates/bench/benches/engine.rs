use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use tomoseg_bench::desk_fixture;
use tomoseg_core::data::{generate_sequence, window, GenParams};
use tomoseg_core::layers::{Conv3dLayer, GruCell, DEFAULT_KERNEL};
use tomoseg_core::tensor::Tensor;
use tomoseg_core::training::l2_loss;

fn bench_conv3d(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layer = Conv3dLayer::new(6, 6, DEFAULT_KERNEL, &mut rng);
    let data: Vec<f64> = (0..6 * 5 * 16 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("conv3d_forward_6ch_5x16x64", |b| {
        b.iter(|| {
            let input = Tensor::from_vec(data.clone(), &[6, 5, 16, 64]).unwrap();
            black_box(layer.forward(&input).unwrap().to_vec())
        })
    });
    c.bench_function("conv3d_backward_6ch_5x16x64", |b| {
        b.iter(|| {
            let input = Tensor::param(data.clone(), &[6, 5, 16, 64]).unwrap();
            let loss = layer.forward(&input).unwrap().sum().unwrap();
            loss.backward().unwrap();
            black_box(input.grad())
        })
    });
}

fn bench_gru_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cell = GruCell::new(96, 1, &mut rng);
    let x: Vec<f64> = (0..96).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..96).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("gru_step_hidden96", |b| {
        b.iter(|| {
            let xt = Tensor::from_vec(x.clone(), &[96]).unwrap();
            let ht = Tensor::from_vec(h.clone(), &[96]).unwrap();
            black_box(cell.step(&xt, &ht).unwrap().0.to_vec())
        })
    });
}

fn bench_window_training_step(c: &mut Criterion) {
    let (model, normed) = desk_fixture(8);
    let cfg = model.config().clone();
    let samples = window(&normed, cfg.window_len).unwrap();
    let sample = samples[4].clone();
    c.bench_function("desk_window_forward_backward", |b| {
        b.iter(|| {
            let input = Tensor::from_vec(
                sample.window.clone(),
                &[1, cfg.window_len, cfg.height, cfg.width],
            )
            .unwrap();
            let target =
                Tensor::from_vec(sample.target.clone(), &[cfg.boundary_count, cfg.width]).unwrap();
            let out = model.c3d().unwrap().forward(&input).unwrap();
            let loss = l2_loss(&out.predictions, &target).unwrap();
            loss.backward().unwrap();
            black_box(loss.item().unwrap())
        })
    });
}

fn bench_sequence_inference(c: &mut Criterion) {
    let (model, normed) = desk_fixture(16);
    c.bench_function("desk_sequence_inference_16_slices", |b| {
        b.iter(|| black_box(model.predict_sequence(&normed).unwrap()))
    });
}

fn bench_generation(c: &mut Criterion) {
    c.bench_function("generate_sequence_16x64x64", |b| {
        let mut seed = 0u64;
        b.iter(|| {
            seed += 1;
            black_box(
                generate_sequence(&GenParams {
                    depth: 16,
                    seed,
                    ..GenParams::default()
                })
                .unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_conv3d,
    bench_gru_step,
    bench_window_training_step,
    bench_sequence_inference,
    bench_generation
);
criterion_main!(benches);
