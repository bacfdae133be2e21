//! Behaviour of the Metropolis-within-Gibbs kernel.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use richness_core::oracle::{grid_posterior_moments, GridAxis, GridSpec, ReducedModel};
use richness_core::sampler::{split_r_hat, FixedParameters, Sampler};
use richness_core::{compute_diagnostics, Dataset, Hierarchy, HierarchySpec, Model, ParameterState};
use statrs::distribution::{ContinuousCDF, Normal};

fn canonical_model() -> Model {
    Model::new(&Dataset::canonical(), Hierarchy::canonical()).unwrap()
}

#[test]
fn identical_seed_gives_identical_draws() {
    let model = canonical_model();
    let cfg = common::short_config(11);
    let a = Sampler::new(&model, cfg.clone()).unwrap().run().unwrap();
    let b = Sampler::new(&model, cfg).unwrap().run().unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.draws, y.draws);
    }
}

#[test]
fn chains_are_independent_of_scheduling() {
    let model = canonical_model();
    let sampler = Sampler::new(&model, common::short_config(5)).unwrap();
    let parallel = sampler.run().unwrap();
    let second = sampler.run_chain(1).unwrap();
    assert_eq!(parallel[1].draws, second.draws);
}

#[test]
fn every_draw_respects_support_and_adaptation_is_frozen() {
    let model = canonical_model();
    let chains = Sampler::new(&model, common::short_config(3)).unwrap().run().unwrap();
    for c in &chains {
        assert_eq!(c.draws.len(), 2500);
        for d in &c.draws {
            model.check_state(d).unwrap();
        }
        assert_eq!(c.warmup_log_scales, c.log_scales);
        let (w, last) = c.block_log_scale.expect("joint move enabled");
        assert_eq!(w, last);
        for (name, rate) in &c.accept_rates {
            assert!(*rate > 0.1 && *rate < 0.8, "{name}: {rate}");
        }
    }
}

#[test]
fn thinning_keeps_every_kth_draw() {
    let model = canonical_model();
    let mut cfg = common::short_config(8);
    let full = Sampler::new(&model, cfg.clone()).unwrap().run_chain(0).unwrap();
    cfg.thin = 5;
    let thin = Sampler::new(&model, cfg).unwrap().run_chain(0).unwrap();
    assert_eq!(thin.draws.len(), 500);
    for (k, d) in thin.draws.iter().enumerate() {
        assert_eq!(d, &full.draws[5 * k + 4]);
    }
}

#[test]
fn latent_draws_follow_the_exact_conditional() {
    let model = canonical_model();
    let sampler = Sampler::new(&model, common::short_config(1)).unwrap();
    let mut state = ParameterState {
        leaf_mu_m: vec![2.0, 3.0, 2.5, 2.0, 5.0, 8.0],
        leaf_mu_r: vec![-0.5, 0.0, 0.2, -1.0, 0.5, 1.0],
        sigma_m: vec![1.0, 1.5, 2.0, 3.0, 5.0, 10.0],
        sigma_r: vec![0.5, 0.8, 1.0, 1.2, 0.9, 1.5],
        rho: 0.6,
        latent_log_r: vec![0.0; model.n_latent()],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10_000;
    for slot in [0, model.n_latent() - 1] {
        let (mean, sd) = model.conditional_latent(&state, slot);
        let draws: Vec<f64> = (0..n)
            .map(|_| {
                sampler.draw_latents(&mut state, &mut rng);
                state.latent_log_r[slot]
            })
            .collect();
        let normal = Normal::new(mean, sd).unwrap();
        let d = common::ks_statistic(&draws, |x| normal.cdf(x));
        assert!(d < common::ks_critical_01(n), "slot {slot}: D = {d}");
    }
}

#[test]
fn reduced_model_matches_grid_oracle() {
    let ds = common::intervals("insects", &[(2.0, 4.0), (3.0, 6.0), (2.5, 5.0)]);
    let (sm, sr, rho) = (1.0, 0.5, 0.4);
    let grid = GridSpec::new(vec![GridAxis::new("mu_m", 0.5, 8.0, 400), GridAxis::new("mu_r", -2.0, 3.0, 400)]);
    let oracle = grid_posterior_moments(
        &ReducedModel::SingleCategory {
            sigma_m: sm,
            sigma_r: sr,
            rho,
        },
        &ds,
        &grid,
    )
    .unwrap();

    let model = Model::new(&ds, Hierarchy::new(&HierarchySpec::single("insects")).unwrap()).unwrap();
    let chains = Sampler::new(&model, common::short_config(21))
        .unwrap()
        .with_fixed(FixedParameters {
            sigma_m: vec![sm],
            sigma_r: vec![sr],
            rho,
        })
        .unwrap()
        .run()
        .unwrap();
    for (param, axis) in [("mu_m.insects", "mu_m"), ("mu_r.insects", "mu_r")] {
        let (mean, mcse) = common::mean_and_mcse(&common::per_chain(&chains, param));
        let truth = oracle[axis].mean;
        assert!((mean - truth).abs() < 3.0 * mcse, "{param}: {mean} vs {truth} (mcse {mcse})");
    }
}

#[test]
fn different_seeds_agree() {
    let model = canonical_model();
    let a = Sampler::new(&model, common::short_config(100)).unwrap().run().unwrap();
    let b = Sampler::new(&model, common::short_config(200)).unwrap().run().unwrap();
    let merged: Vec<_> = a.into_iter().chain(b).collect();
    let diag = compute_diagnostics(&merged).unwrap();
    for p in &diag.parameters {
        assert!(p.r_hat < 1.05, "{}: {}", p.name, p.r_hat);
    }
    let col = common::per_chain(&merged, "rho");
    let refs: Vec<&[f64]> = col.iter().map(Vec::as_slice).collect();
    assert!(split_r_hat(&refs) < 1.05);
}

#[test]
fn rejects_single_chain_configuration() {
    let model = canonical_model();
    let cfg = richness_core::SamplerConfig {
        n_chains: 1,
        ..common::short_config(1)
    };
    assert!(Sampler::new(&model, cfg).is_err());
}
