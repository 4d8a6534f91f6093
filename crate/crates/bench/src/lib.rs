//! Shared fixtures for the criterion benchmarks.

use lpann_core::{sample_dataset, Dataset, Distribution};

pub fn gaussian(n: usize, d: usize, seed: u64) -> Dataset {
    sample_dataset(n, d, Distribution::Gaussian, 1.0, seed).expect("valid fixture parameters")
}
