//! Shared data generators for the benchmarks.

use annr_core::spatial::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

pub fn random_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
    Dataset::build(random_points(n, dim, seed), vec![0.0; n]).expect("valid dataset")
}
