//! Shared fixtures for the criterion benchmarks.

use ftspan_core::gen::{generate_metric, Distribution};
use ftspan_core::{Config, Metric};

/// Seeded 2D instance of size `n`.
pub fn instance(n: usize, dist: Distribution) -> Metric {
    generate_metric(n, 2, dist, n as u64).expect("valid generator parameters")
}

pub fn config(f: usize, fast_pools: bool, xi: f64) -> Config {
    Config {
        fast_pools,
        xi,
        ..Config::new(0.1, f)
    }
}
