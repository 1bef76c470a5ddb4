//! Shared fixtures for the engine benchmarks.

use tomoseg_core::data::{generate_sequence, GenParams, PixelNormalizer, NormalizedSequence};
use tomoseg_core::models::{CombinedModel, Mode, ModelConfig};

/// Desk-scale combined model plus one normalized sequence to feed it.
pub fn desk_fixture(depth: usize) -> (CombinedModel, NormalizedSequence) {
    let cfg = ModelConfig::desk(Mode::C3dRnn);
    let model = CombinedModel::new(&cfg, 7).expect("valid config");
    let seq = generate_sequence(&GenParams {
        depth,
        seed: 7,
        ..GenParams::default()
    })
    .expect("valid params");
    let mut normalizer = PixelNormalizer::new();
    normalizer.fit(&[&seq]).expect("non-empty");
    let normed = normalizer.normalize_sequence(&seq).expect("fitted");
    (model, normed)
}
