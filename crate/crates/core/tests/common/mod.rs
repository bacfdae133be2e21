#![allow(dead_code)]

use richness_core::sampler::effective_sample_size;
use richness_core::{Chain, Dataset, Observation, SamplerConfig};

pub fn short_config(seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_warmup: 1500,
        n_samples: 2500,
        seed,
        ..SamplerConfig::default()
    }
}

pub fn intervals(category: &str, bounds: &[(f64, f64)]) -> Dataset {
    let obs = bounds
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Observation::interval(category, a, b, 2000 + i as i32, &format!("syn{i}")))
        .collect();
    Dataset::from_observations(obs).unwrap()
}

/// Pooled draws of parameter `name` across chains.
pub fn pooled(chains: &[Chain], name: &str) -> Vec<f64> {
    let idx = chains[0].names.iter().position(|n| n == name).unwrap();
    chains.iter().flat_map(|c| c.column(idx)).collect()
}

pub fn per_chain(chains: &[Chain], name: &str) -> Vec<Vec<f64>> {
    let idx = chains[0].names.iter().position(|n| n == name).unwrap();
    chains.iter().map(|c| c.column(idx)).collect()
}

/// Mean and Monte-Carlo standard error of a multi-chain series.
pub fn mean_and_mcse(series: &[Vec<f64>]) -> (f64, f64) {
    let all: Vec<f64> = series.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
    let ess = effective_sample_size(&refs);
    (mean, (var / ess).sqrt())
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

/// Largest gap between the empirical CDF of `x` and `cdf`.
pub fn ks_statistic(x: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS critical value at level 0.01.
pub fn ks_critical_01(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
