//! Posterior summaries: means, highest posterior density intervals and
//! back-transformed category intervals.

use std::io::Write;

use serde::Serialize;

use crate::dataset::{from_symbolic, Dataset};
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, HierarchySpec, MeanParams};
use crate::model::Model;
use crate::sampler::{compute_diagnostics, Chain, Diagnostics, Sampler, SamplerConfig};

pub const MIN_HPD_SAMPLES: usize = 100;

/// Shortest window of sorted samples holding `ceil(level * n)` of them.
/// Ties go to the leftmost window.
pub fn hpd_interval(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Level(level));
    }
    let n = samples.len();
    if n < MIN_HPD_SAMPLES {
        return Err(Error::InsufficientDraws {
            needed: MIN_HPD_SAMPLES,
            got: n,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // guard against 0.95 * 100 = 95.00000000000001
    let k = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut best = (sorted[0], sorted[k - 1]);
    for i in 1..=(n - k) {
        let (lo, hi) = (sorted[i], sorted[i + k - 1]);
        if hi - lo < best.1 - best.0 {
            best = (lo, hi);
        }
    }
    Ok(best)
}

/// Equal-tailed interval from empirical quantiles of sorted samples.
pub fn equal_tailed_interval(samples: &[f64], level: f64) -> (f64, f64) {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((level * n as f64) - 1e-9).ceil() as usize;
    let lo = (n - k) / 2;
    (sorted[lo], sorted[lo + k - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub hpd: (f64, f64),
}

impl ScalarSummary {
    pub fn from_samples(samples: &[f64], level: f64) -> Result<Self> {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(ScalarSummary {
            mean,
            sd: var.sqrt(),
            hpd: hpd_interval(samples, level)?,
        })
    }

    pub fn hpd_width(&self) -> f64 {
        self.hpd.1 - self.hpd.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: String,
    pub observed: bool,
    pub mu_m: ScalarSummary,
    pub mu_r: ScalarSummary,
    /// Lower endpoint `mu_m - exp(mu_r)/2`, back-transformed per draw.
    pub mu_a: ScalarSummary,
    /// Upper endpoint `mu_m + exp(mu_r)/2`, back-transformed per draw.
    pub mu_b: ScalarSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedInterval {
    pub source: String,
    pub category: String,
    pub point: f64,
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub hpd_lower: (f64, f64),
    pub hpd_upper: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub level: f64,
    pub n_draws: usize,
    pub categories: Vec<CategorySummary>,
    pub rho: ScalarSummary,
    pub predicted_intervals: Vec<PredictedInterval>,
}

impl PosteriorSummary {
    pub fn category(&self, name: &str) -> Option<&CategorySummary> {
        self.categories.iter().find(|c| c.category == name)
    }

    pub fn predicted(&self, source: &str) -> Option<&PredictedInterval> {
        self.predicted_intervals.iter().find(|p| p.source == source)
    }

    /// Table-style CSV: category, mean_lower, mean_upper, mean_midpoint, hpd_lo, hpd_hi.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["category", "mean_lower", "mean_upper", "mean_midpoint", "hpd_lo", "hpd_hi"])?;
        for c in &self.categories {
            w.write_record([
                c.category.clone(),
                c.mu_a.mean.to_string(),
                c.mu_b.mean.to_string(),
                c.mu_m.mean.to_string(),
                c.mu_m.hpd.0.to_string(),
                c.mu_m.hpd.1.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<summary csv>", e))?;
        Ok(())
    }

    pub fn write_predicted_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["source", "category", "point", "mean_lower", "mean_upper"])?;
        for p in &self.predicted_intervals {
            w.write_record([
                p.source.clone(),
                p.category.clone(),
                p.point.to_string(),
                p.mean_lower.to_string(),
                p.mean_upper.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<predicted csv>", e))?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }
}

/// Pools the stored (post-warmup) draws of every chain and summarises every
/// category, the correlation and each point-only datum's predicted interval.
pub fn summarize(chains: &[Chain], model: &Model, level: f64) -> Result<PosteriorSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Level(level));
    }
    let draws: Vec<_> = chains.iter().flat_map(|c| c.draws.iter()).collect();
    if draws.is_empty() {
        return Err(Error::InsufficientDraws {
            needed: MIN_HPD_SAMPLES,
            got: 0,
        });
    }
    let h = model.hierarchy();
    let n_cat = h.len();
    let mut mu_m = vec![Vec::with_capacity(draws.len()); n_cat];
    let mut mu_r = vec![Vec::with_capacity(draws.len()); n_cat];
    let mut mu_a = vec![Vec::with_capacity(draws.len()); n_cat];
    let mut mu_b = vec![Vec::with_capacity(draws.len()); n_cat];
    let mut rho = Vec::with_capacity(draws.len());
    let n_latent = model.n_latent();
    let mut pred_lo = vec![Vec::with_capacity(draws.len()); n_latent];
    let mut pred_hi = vec![Vec::with_capacity(draws.len()); n_latent];
    let points: Vec<f64> = model.latent_data().map(|d| d.m).collect();

    let mut means = MeanParams {
        mu_m: Vec::new(),
        mu_r: Vec::new(),
    };
    for d in &draws {
        h.derive_into(&d.leaf_mu_m, &d.leaf_mu_r, &mut means);
        for c in 0..n_cat {
            let (a, b) = from_symbolic(means.mu_m[c], means.mu_r[c]);
            mu_m[c].push(means.mu_m[c]);
            mu_r[c].push(means.mu_r[c]);
            mu_a[c].push(a);
            mu_b[c].push(b);
        }
        rho.push(d.rho);
        for (slot, &x) in points.iter().enumerate() {
            let (a, b) = from_symbolic(x, d.latent_log_r[slot]);
            pred_lo[slot].push(a);
            pred_hi[slot].push(b);
        }
    }

    let categories = (0..n_cat)
        .map(|c| {
            Ok(CategorySummary {
                category: h.name(c).to_string(),
                observed: h.observed_slot(c).is_some(),
                mu_m: ScalarSummary::from_samples(&mu_m[c], level)?,
                mu_r: ScalarSummary::from_samples(&mu_r[c], level)?,
                mu_a: ScalarSummary::from_samples(&mu_a[c], level)?,
                mu_b: ScalarSummary::from_samples(&mu_b[c], level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let predicted_intervals = model
        .latent_data()
        .enumerate()
        .map(|(slot, d)| {
            let n = draws.len() as f64;
            // midpoint of the mean interval is the point estimate by construction
            let half = pred_hi[slot].iter().map(|b| b - d.m).sum::<f64>() / n;
            Ok(PredictedInterval {
                source: d.source.clone(),
                category: d.category.clone(),
                point: d.m,
                mean_lower: d.m - half,
                mean_upper: d.m + half,
                hpd_lower: hpd_interval(&pred_lo[slot], level)?,
                hpd_upper: hpd_interval(&pred_hi[slot], level)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PosteriorSummary {
        level,
        n_draws: draws.len(),
        categories,
        rho: ScalarSummary::from_samples(&rho, level)?,
        predicted_intervals,
    })
}

/// Everything produced by one model fit.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: Model,
    pub chains: Vec<Chain>,
    pub diagnostics: Diagnostics,
    pub summary: PosteriorSummary,
}

pub fn fit(ds: &Dataset, spec: &HierarchySpec, cfg: &SamplerConfig, level: f64) -> Result<Fit> {
    let model = Model::new(ds, Hierarchy::new(spec)?)?;
    fit_model(model, cfg, level)
}

pub(crate) fn fit_model(model: Model, cfg: &SamplerConfig, level: f64) -> Result<Fit> {
    let chains = Sampler::new(&model, cfg.clone())?.run()?;
    let diagnostics = compute_diagnostics(&chains)?;
    let summary = summarize(&chains, &model, level)?;
    Ok(Fit {
        model,
        chains,
        diagnostics,
        summary,
    })
}

/// Fits one category on its own data with no hierarchy (one free
/// `mu_m, mu_r, sigma_m, sigma_r, rho`), under the same priors.
pub fn fit_single_category(ds: &Dataset, category: &str, cfg: &SamplerConfig) -> Result<PosteriorSummary> {
    Ok(fit_single_category_full(ds, category, cfg, 0.95)?.summary)
}

pub fn fit_single_category_full(ds: &Dataset, category: &str, cfg: &SamplerConfig, level: f64) -> Result<Fit> {
    if !crate::dataset::CATEGORY_LABELS.contains(&category) {
        return Err(Error::UnmodelledCategory(category.to_string()));
    }
    let sub = ds.restricted_to(category);
    if sub.is_empty() {
        return Err(Error::NoCategoryData(category.to_string()));
    }
    let model = Model::new(&sub, Hierarchy::new(&HierarchySpec::single(category))?)?;
    fit_model(model, cfg, level)
}
