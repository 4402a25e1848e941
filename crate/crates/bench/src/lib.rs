// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fixtures shared by the benchmarks.

use cpp_core::{rng, CppConfig, CppDetector, GlrConfig, GlrDetector, OnlineDetector, SingleCpModel};
use rand_distr::{Distribution, StandardNormal};

/// `n` standard normal draws with a unit mean shift after `n / 2`.
pub fn shifted_series(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed);
    (0..n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut r);
            z + if i >= n / 2 { 1.0 } else { 0.0 }
        })
        .collect()
}

pub fn known_config() -> CppConfig {
    CppConfig::new(SingleCpModel::known(0.0, 1.0))
}

/// Detector that has already consumed the first `n` points of `xs`.
pub fn warm_cpp(config: CppConfig, xs: &[f64], n: usize) -> CppDetector {
    CppDetector::run(config, 1, &xs[..n]).expect("finite fixture data")
}

pub fn warm_glr(xs: &[f64], n: usize) -> GlrDetector {
    let mut d = GlrDetector::new(GlrConfig::new(0.0, 1.0)).expect("valid config");
    for &x in &xs[..n] {
        d.observe(x).expect("finite fixture data");
    }
    d
}
