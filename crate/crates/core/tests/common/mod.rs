#![allow(dead_code)]

use htl_core::lssvm::{train_ova, HyperParams};
use htl_core::transfer::SourceHypothesis;
use htl_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Class `g` centered at `sep` along axis `g mod dim`, unit-variance
/// Gaussian-ish noise scaled by `spread`.
pub fn blobs(rng: &mut ChaCha8Rng, per_class: usize, classes: u32, dim: usize, sep: f64, spread: f64) -> (Matrix, Vec<u32>) {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..per_class {
        for g in 0..classes {
            let row: Vec<f64> = (0..dim)
                .map(|j| {
                    let center = if j == g as usize % dim { sep } else { 0.0 };
                    // Sum of uniforms: cheap, bounded, roughly normal.
                    let noise: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() * 0.866;
                    center + spread * noise
                })
                .collect();
            rows.push(row);
            labels.push(g + 1);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

pub fn source(id: &str, x: &Matrix, labels: &[u32], hp: &HyperParams) -> SourceHypothesis {
    SourceHypothesis::new(id, train_ova(x, labels, hp).unwrap())
}

pub fn accuracy(truth: &[u32], predicted: &[u32]) -> f64 {
    truth.iter().zip(predicted).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}
