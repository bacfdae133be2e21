//! Shared fixtures for the criterion benchmarks.

use richness_core::{Dataset, Hierarchy, Model, ParameterState, SamplerConfig};

pub fn canonical_model() -> Model {
    Model::new(&Dataset::canonical(), Hierarchy::canonical()).expect("bundled data fit the bundled tree")
}

/// A fixed interior state of the canonical model.
pub fn reference_state(model: &Model) -> ParameterState {
    ParameterState {
        leaf_mu_m: vec![7.9, 2.2, 5.5, 2.1, 3.2, 2.0],
        leaf_mu_r: vec![-0.4, -2.0, 0.6, -0.3, 0.1, 0.3],
        sigma_m: vec![1.0, 1.5, 2.0, 3.0, 5.0, 10.0],
        sigma_r: vec![0.5, 0.8, 1.0, 1.2, 0.9, 1.5],
        rho: 0.6,
        latent_log_r: vec![1.0; model.n_latent()],
    }
}

/// Short chains for timing one sweep-heavy run.
pub fn short_run(seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_chains: 2,
        n_warmup: 500,
        n_samples: 500,
        seed,
        ..SamplerConfig::default()
    }
}
