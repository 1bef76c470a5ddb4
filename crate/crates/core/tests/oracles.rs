//! Oracle equivalence: the engine's convolution, GRU step, and column-error
//! metric against direct loop transcriptions, over randomized instances.

mod support;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{conv3d_oracle, conv_sweep, gru_sweep, metric_sweep, random_vec, TOL};
use tomoseg_core::tensor::Tensor;

#[test]
fn conv3d_matches_loop_oracle_on_random_instances() {
    assert_eq!(conv_sweep(120, 0xC0117), 120);
}

#[test]
fn conv3d_matches_oracle_on_spec_shape() {
    // The 1x3x6x4 shape called out as the reference instance.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EC5);
    let input = random_vec(&mut rng, 3 * 6 * 4);
    #[allow(clippy::identity_op)] // written as out_ch * in_ch * kD * kH * kW
    let weight = random_vec(&mut rng, 2 * 1 * 3 * 5 * 3);
    let bias = random_vec(&mut rng, 2);
    let expected = conv3d_oracle(
        &input,
        (1, 3, 6, 4),
        &weight,
        (2, 3, 5, 3),
        &bias,
        [1, 2, 1],
    );
    let it = Tensor::from_vec(input, &[1, 3, 6, 4]).unwrap();
    let wt = Tensor::from_vec(weight, &[2, 1, 3, 5, 3]).unwrap();
    let bt = Tensor::from_vec(bias, &[2]).unwrap();
    let got = it.conv3d(&wt, &bt, [1, 2, 1]).unwrap().to_vec();
    for (g, e) in got.iter().zip(expected.iter()) {
        assert!((g - e).abs() < TOL);
    }
}

#[test]
fn gru_step_matches_scalar_oracle_on_random_instances() {
    assert_eq!(gru_sweep(120, 0x6B0), 120);
}

#[test]
fn mean_column_error_matches_loop_oracle_on_random_instances() {
    assert_eq!(metric_sweep(120, 0xE77), 120);
}
