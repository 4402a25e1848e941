// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference computations, written directly from the model
//! definitions without the crate's sufficient statistics.

#![allow(dead_code)]

use std::f64::consts::PI;

pub fn normal_logpdf(x: f64, mu: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mu).powi(2) / (2.0 * var)
}

pub fn pointwise_loglik(xs: &[f64], mu: f64, var: f64) -> f64 {
    xs.iter().map(|&x| normal_logpdf(x, mu, var)).sum()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Exactly-one split posterior with plug-in estimates, by enumeration.
/// `known_mu0` fixes the first segment mean; `known_var` fixes the variance,
/// otherwise it is pooled from the residuals of both segments.
pub fn exactly_one_plugin(xs: &[f64], known_mu0: Option<f64>, known_var: Option<f64>) -> Vec<f64> {
    let n = xs.len();
    let mut logw = Vec::new();
    for i in 1..n {
        let (pre, post) = xs.split_at(i);
        let mu_a = known_mu0.unwrap_or_else(|| mean(pre));
        let mu_b = mean(post);
        let var = known_var.unwrap_or_else(|| {
            let ss: f64 = pre.iter().map(|x| (x - mu_a).powi(2)).sum::<f64>()
                + post.iter().map(|x| (x - mu_b).powi(2)).sum::<f64>();
            let dof = n - 1 - usize::from(known_mu0.is_none());
            ss / dof as f64
        });
        logw.push(pointwise_loglik(pre, mu_a, var) + pointwise_loglik(post, mu_b, var));
    }
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// GLR statistic by scanning onsets and a fine grid of change magnitudes.
pub fn glr_grid(xs: &[f64], mu0: f64, sigma: f64, nu_min: f64) -> f64 {
    let var = sigma * sigma;
    let k = xs.len();
    let mut best = 0.0f64;
    for j in 0..k {
        let seg = &xs[j..];
        let s: f64 = seg.iter().map(|x| x - mu0).sum();
        let m = seg.len() as f64;
        // the unconstrained optimum, if admissible, plus a grid on |nu| >= nu_min
        let mut candidates = vec![nu_min, -nu_min];
        let nu_hat = s / m;
        if nu_hat.abs() >= nu_min {
            candidates.push(nu_hat);
        }
        for step in 0..=4000 {
            let nu = nu_min + step as f64 * 0.005;
            candidates.push(nu);
            candidates.push(-nu);
        }
        for nu in candidates {
            let llr: f64 = seg.iter().map(|x| (nu * (x - mu0) - nu * nu / 2.0) / var).sum();
            best = best.max(llr);
        }
    }
    best
}
