use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform values in [-1, 1).
pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Relative error with a floor on the denominator so near-zero gradients are
/// compared absolutely.
pub fn rel_err(analytic: f32, numeric: f64) -> f64 {
    let a = analytic as f64;
    (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2)
}
