//! The exact-Delaunay recall suite behind `annr oracle-check`: walks must be
//! sound (every validated candidate is an exact Delaunay simplex) and reach
//! the target recall.

use annr_core::oracles::exact_delaunay;
use annr_core::spatial::Dataset;
use annr_core::walk::{skeleton_walk, validate_candidate};
use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub struct OracleCheckReport {
    pub recalls: Vec<f64>,
    pub mean_recall: f64,
    pub unsound: usize,
    pub min_recall: f64,
}

impl OracleCheckReport {
    pub fn passed(&self) -> bool {
        self.unsound == 0 && self.mean_recall >= self.min_recall
    }
}

/// Runs the suite. `Err` is reserved for unusable parameters; threshold
/// failures are reported through [`OracleCheckReport::passed`].
pub fn oracle_check(
    dim: usize,
    n: usize,
    seeds: u64,
    steps: usize,
    min_recall: f64,
) -> Result<OracleCheckReport> {
    if !(1..=3).contains(&dim) {
        bail!("the exact oracle supports dimensions 1..=3, got {dim}");
    }
    if n < dim + 2 {
        bail!("need at least {} points", dim + 2);
    }
    if seeds == 0 || steps == 0 {
        bail!("seeds and steps must be positive");
    }
    let mut recalls = Vec::with_capacity(seeds as usize);
    let mut unsound = 0usize;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let data = Dataset::build(points.clone(), vec![0.0; n])?;
        let exact: BTreeSet<Vec<usize>> = exact_delaunay(&points, 1e-9).into_iter().collect();
        let start = rng.gen_range(0..n);
        let cands = skeleton_walk(&data, start, steps, &mut rng, 0)?;
        let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
        for c in &cands {
            if validate_candidate(&data, c) {
                if !exact.contains(&c.vertex_indices) {
                    unsound += 1;
                }
                found.insert(c.vertex_indices.clone());
            }
        }
        recalls.push(found.len() as f64 / exact.len().max(1) as f64);
    }
    let mean_recall = recalls.iter().sum::<f64>() / recalls.len().max(1) as f64;
    Ok(OracleCheckReport {
        recalls,
        mean_recall,
        unsound,
        min_recall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suite_passes() {
        let report = oracle_check(2, 30, 3, 2000, 0.95).unwrap();
        assert!(report.passed(), "recalls {:?}", report.recalls);
    }

    #[test]
    fn rejects_high_dimension() {
        assert!(oracle_check(6, 30, 1, 100, 0.9).is_err());
    }
}
