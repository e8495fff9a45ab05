//! Fixtures shared by the benchmarks.

use baxter_core::{autocovariance, AutocovSeq, ProcessSpec};

/// Autocovariances of fractional noise with `d = 0.25` up to lag `n`.
pub fn fractional_noise_gamma(n: usize) -> AutocovSeq {
    autocovariance(&ProcessSpec::fractional_noise(0.25), n, n).expect("valid process")
}

/// A deterministic, slowly decaying test vector.
pub fn test_vector(n: usize) -> Vec<f64> {
    (1..=n).map(|k| (k as f64).powf(-0.75) * if k % 3 == 0 { -1.0 } else { 1.0 }).collect()
}
