//! Summaries of fitted chains and the nested year-slice refits.

mod common;

use std::sync::OnceLock;

use richness_core::oracle::{grid_posterior_moments, GridAxis, GridSpec, ReducedModel};
use richness_core::posterior::{equal_tailed_interval, fit_single_category_full};
use richness_core::timeslice::slice_seed;
use richness_core::{fit, fit_single_category, hpd_interval, run_timeslices, Dataset, Error, Fit, HierarchySpec};

fn canonical_fit() -> &'static Fit {
    static FIT: OnceLock<Fit> = OnceLock::new();
    FIT.get_or_init(|| fit(&Dataset::canonical(), &HierarchySpec::canonical(), &common::short_config(42), 0.95).unwrap())
}

const PARENTS: [(&str, &[&str]); 4] = [
    ("insects", &["beetles", "other_insects"]),
    ("arthropods", &["insects", "other_arthropods"]),
    ("marine", &["coral_reefs", "other_marine"]),
    ("global", &["marine", "arthropods", "other_global"]),
];

#[test]
fn reported_means_are_additive() {
    let s = &canonical_fit().summary;
    for (parent, children) in PARENTS {
        let p = s.category(parent).unwrap();
        let kids: Vec<_> = children.iter().map(|c| s.category(c).unwrap()).collect();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
        assert!(close(p.mu_m.mean, kids.iter().map(|k| k.mu_m.mean).sum()), "{parent} midpoint");
        assert!(close(p.mu_a.mean, kids.iter().map(|k| k.mu_a.mean).sum()), "{parent} lower");
        assert!(close(p.mu_b.mean, kids.iter().map(|k| k.mu_b.mean).sum()), "{parent} upper");
    }
}

#[test]
fn interval_endpoints_bracket_midpoints_per_draw() {
    let f = canonical_fit();
    let h = f.model.hierarchy();
    for chain in &f.chains {
        for d in &chain.draws {
            let means = h.derive_means(&d.leaf_mu_m, &d.leaf_mu_r).unwrap();
            for c in 0..h.len() {
                let (a, b) = richness_core::from_symbolic(means.mu_m[c], means.mu_r[c]);
                assert!(a < means.mu_m[c] && means.mu_m[c] < b);
            }
        }
    }
    for c in &f.summary.categories {
        assert!(c.mu_a.mean <= c.mu_m.mean && c.mu_m.mean <= c.mu_b.mean, "{}", c.category);
    }
}

#[test]
fn predicted_intervals_are_centred_on_their_points() {
    let s = &canonical_fit().summary;
    assert_eq!(s.predicted_intervals.len(), 16);
    // Heavy right tails can make the half-width dwarf the point, so the
    // symmetry check is relative to the width.
    for p in &s.predicted_intervals {
        let below = p.point - p.mean_lower;
        let above = p.mean_upper - p.point;
        assert!(below > 0.0 && (below - above).abs() <= 1e-9 * (below + above), "{}", p.source);
    }
    assert_eq!(s.predicted("erwin1982").unwrap().point, 30.0);
}

#[test]
fn hpd_of_reported_quantities_is_no_wider_than_equal_tailed() {
    let f = canonical_fit();
    let rho = common::pooled(&f.chains, "rho");
    let (lo, hi) = hpd_interval(&rho, 0.95).unwrap();
    let (elo, ehi) = equal_tailed_interval(&rho, 0.95);
    assert!(hi - lo <= ehi - elo);
    assert_eq!(f.summary.rho.hpd, (lo, hi));
}

#[test]
fn isolated_coral_fit_has_a_wider_interval_than_the_hierarchy() {
    let hier = canonical_fit().summary.category("coral_reefs").unwrap().clone();
    let alone = fit_single_category(&Dataset::canonical(), "coral_reefs", &common::short_config(42)).unwrap();
    let alone = alone.category("coral_reefs").unwrap();
    let width = |c: &richness_core::posterior::CategorySummary| c.mu_b.mean - c.mu_a.mean;
    assert!(width(alone) > width(&hier), "{} vs {}", width(alone), width(&hier));
}

#[test]
fn single_category_errors() {
    let cfg = common::short_config(1);
    assert!(matches!(
        fit_single_category(&Dataset::canonical(), "fungi", &cfg),
        Err(Error::UnmodelledCategory(_))
    ));
    assert!(matches!(
        fit_single_category(&Dataset::canonical(), "terrestrial", &cfg),
        Err(Error::NoCategoryData(_))
    ));
}

#[test]
fn zero_weight_single_category_recovers_prior() {
    let ds = Dataset::canonical().with_weight(0.0);
    let f = fit_single_category_full(&ds, "insects", &common::short_config(9), 0.95).unwrap();
    let grid = GridSpec::new(vec![
        GridAxis::new("mu_m", 0.0, 600.0, 6001).with_support_edge_at_lo(),
        GridAxis::new("mu_r", -10.0, 7.2, 1600),
    ]);
    let prior = grid_posterior_moments(&ReducedModel::LeafPrior, &Dataset::from_symbolic_data(vec![]), &grid).unwrap();
    for (param, axis) in [("mu_m.insects", "mu_m"), ("mu_r.insects", "mu_r")] {
        let (mean, mcse) = common::mean_and_mcse(&common::per_chain(&f.chains, param));
        let truth = prior[axis].mean;
        assert!((mean - truth).abs() < 3.0 * mcse, "{param}: {mean} vs {truth} (mcse {mcse})");
    }
    // Uniform correlation prior: mean 0.
    let (mean, mcse) = common::mean_and_mcse(&common::per_chain(&f.chains, "rho"));
    assert!(mean.abs() < 3.0 * mcse, "rho {mean} (mcse {mcse})");
}

#[test]
fn timeslices_are_nested_and_final_period_matches_plain_fit() {
    let ds = Dataset::canonical();
    let spec = HierarchySpec::canonical();
    let cfg = common::short_config(42);
    let ts = run_timeslices(&ds, &spec, &cfg, &[1991, 1998, 2007, 2015]).unwrap();
    let sizes: Vec<usize> = ts.periods.iter().map(|p| p.n_obs).collect();
    assert_eq!(sizes, vec![9, 19, 31, 44]);
    for w in ts.periods.windows(2) {
        for (cat, n) in &w[0].counts {
            assert!(w[1].counts[cat] >= *n);
        }
    }
    for p in &ts.periods[..3] {
        assert_eq!(p.counts["beetles"], 0);
        assert!(p.warnings.iter().any(|w| w.contains("beetles")));
    }

    let plain = fit(
        &ds,
        &spec,
        &richness_core::SamplerConfig {
            seed: slice_seed(42, 2015),
            ..cfg
        },
        0.95,
    )
    .unwrap();
    assert_eq!(ts.period(2015).unwrap().summary, plain.summary);

    let rows = ts.evolution.iter().filter(|r| r.parameter == "rho").count();
    assert_eq!(rows, 4);
    let panels = ts.panels().unwrap();
    assert!(panels.iter().any(|(n, _)| n == "panel_rho"));
    assert!(panels.iter().any(|(n, _)| n == "panel_predicted_erwin1982"));
}

#[test]
fn unidentified_leaves_are_exchangeable_before_beetle_data() {
    let slice = Dataset::canonical().slice_by_year(2007).unwrap();
    let f = fit(&slice, &HierarchySpec::canonical(), &common::short_config(4), 0.95).unwrap();
    let b = common::per_chain(&f.chains, "mu_m.beetles");
    let o = common::per_chain(&f.chains, "mu_m.other_insects");
    let diff: Vec<Vec<f64>> = b
        .iter()
        .zip(&o)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    let (mean, mcse) = common::mean_and_mcse(&diff);
    assert!(mean.abs() < 3.0 * mcse, "difference {mean} (mcse {mcse})");
}
