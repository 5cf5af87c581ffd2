//! Seeded weight initialization shared by the attention modules.
//!
//! All learned parameters are drawn uniformly from [-1/sqrt(d), 1/sqrt(d)]
//! where `d` is the channel count the weights act on, so identical seeds
//! produce bit-identical weights.

use rand::Rng;

use crate::features::{Activation, FlatFeatures, MlpWeights};

/// Matrix with entries uniform in [-1/sqrt(fan), 1/sqrt(fan)].
pub(crate) fn uniform_matrix<R: Rng>(
    rows: usize,
    cols: usize,
    fan: usize,
    rng: &mut R,
) -> FlatFeatures {
    let bound = 1.0 / (fan.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    FlatFeatures::new(rows, cols, data).expect("uniform draws are finite")
}

/// Two-layer MLP with seeded weights and zero biases.
pub(crate) fn seeded_mlp<R: Rng>(
    d_in: usize,
    hidden: usize,
    d_out: usize,
    fan: usize,
    rng: &mut R,
) -> MlpWeights {
    MlpWeights::new(
        uniform_matrix(d_in, hidden, fan, rng),
        vec![0.0; hidden],
        uniform_matrix(hidden, d_out, fan, rng),
        vec![0.0; d_out],
        Activation::Rectifier,
    )
    .expect("generated shapes are consistent")
}
