#![allow(dead_code)]

use altgda::{GameInstance, PayoffMatrix, StepSizes};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn to_nalgebra(a: &PayoffMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.entries())
}

/// Largest singular value from nalgebra's SVD.
pub fn oracle_spectral_norm(a: &PayoffMatrix) -> f64 {
    to_nalgebra(a)
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, max_dim: usize) -> PayoffMatrix {
    let k1 = rng.gen_range(1..=max_dim);
    let k2 = rng.gen_range(1..=max_dim);
    PayoffMatrix::new(k1, k2, random_vec(rng, k1 * k2, 1.0)).unwrap()
}

/// Step sizes with `√(η1 η2)·‖A‖` drawn from `[0.05, 1.9]` and an
/// asymmetric ratio `η1/η2` in `[1/4, 4]`.
pub fn random_safe_steps(rng: &mut ChaCha8Rng, a: &PayoffMatrix) -> StepSizes {
    let norm = oracle_spectral_norm(a).max(1e-3);
    let g = rng.gen_range(0.05..1.9) / norm;
    let ratio: f64 = rng.gen_range(0.25f64..4.0);
    StepSizes::new(g * ratio.sqrt(), g / ratio.sqrt()).unwrap()
}

pub fn random_safe_game(rng: &mut ChaCha8Rng, max_dim: usize) -> GameInstance {
    let a = random_matrix(rng, max_dim);
    let steps = random_safe_steps(rng, &a);
    let x1 = random_vec(rng, a.rows(), 10.0);
    let x2 = random_vec(rng, a.cols(), 10.0);
    GameInstance::new(a, steps, x1, x2).unwrap()
}

pub fn scalar_game(a: f64, eta1: f64, eta2: f64, x1: f64, x2: f64) -> GameInstance {
    GameInstance::new(
        PayoffMatrix::scalar(a).unwrap(),
        StepSizes::new(eta1, eta2).unwrap(),
        vec![x1],
        vec![x2],
    )
    .unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    let s = a.abs().max(b.abs());
    if s > 0.0 {
        d / s
    } else {
        d
    }
}
