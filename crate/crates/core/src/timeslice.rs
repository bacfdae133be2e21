//! Independent refits on nested, year-bounded subsets of the data.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, HierarchySpec};
use crate::math::splitmix64;
use crate::model::Model;
use crate::posterior::{fit_model, Fit, PosteriorSummary, ScalarSummary};
use crate::sampler::{Diagnostics, SamplerConfig};

pub const DEFAULT_CUTS: [i32; 4] = [1991, 1998, 2007, 2015];
pub const TRACKED_CATEGORIES: [&str; 6] = [
    "arthropods",
    "other_arthropods",
    "beetles",
    "insects",
    "other_insects",
    "global",
];
pub const TRACKED_POINT_SOURCE: &str = "erwin1982";

/// Seed used for the slice ending in `cut_year`.
pub fn slice_seed(master: u64, cut_year: i32) -> u64 {
    splitmix64(master ^ splitmix64(cut_year as u64))
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodResult {
    pub end_year: i32,
    pub seed: u64,
    pub n_obs: usize,
    pub counts: BTreeMap<String, usize>,
    pub summary: PosteriorSummary,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolutionRow {
    pub period: i32,
    pub parameter: String,
    pub mean: f64,
    pub hpd_lo: f64,
    pub hpd_hi: f64,
    pub n_obs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimesliceResult {
    pub periods: Vec<PeriodResult>,
    pub evolution: Vec<EvolutionRow>,
}

/// Fits every slice at the default 95% HPD level.
pub fn run_timeslices(
    ds: &Dataset,
    spec: &HierarchySpec,
    cfg: &SamplerConfig,
    cut_years: &[i32],
) -> Result<TimesliceResult> {
    run_timeslices_at_level(ds, spec, cfg, cut_years, 0.95)
}

/// Fits the data published up to each cut year (inclusive), each slice from
/// scratch with its own seed derived from the master seed and the year.
pub fn run_timeslices_at_level(
    ds: &Dataset,
    spec: &HierarchySpec,
    cfg: &SamplerConfig,
    cut_years: &[i32],
    level: f64,
) -> Result<TimesliceResult> {
    if cut_years.is_empty() {
        return Err(Error::Timeslice("no cut years".into()));
    }
    if cut_years.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Timeslice(format!(
            "cut years must be strictly increasing, got {cut_years:?}"
        )));
    }
    let hierarchy = Hierarchy::new(spec)?;
    let slices = cut_years
        .iter()
        .map(|&y| ds.slice_by_year(y).map(|s| (y, s)))
        .collect::<Result<Vec<_>>>()?;

    let fits: Vec<(i32, Dataset, Fit)> = slices
        .into_par_iter()
        .map(|(year, slice)| {
            let slice_cfg = SamplerConfig {
                seed: slice_seed(cfg.seed, year),
                ..cfg.clone()
            };
            let model = Model::new(&slice, hierarchy.clone())?;
            let fit = fit_model(model, &slice_cfg, level)?;
            Ok((year, slice, fit))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut periods = Vec::with_capacity(fits.len());
    for (year, slice, fit) in fits {
        let mut counts = BTreeMap::new();
        let mut warnings = Vec::new();
        for &c in hierarchy.observed() {
            let name = hierarchy.name(c);
            let n = slice.count_in(name);
            if n == 0 {
                warnings.push(format!(
                    "{year}: no data for `{name}`; its scales are informed by the prior only"
                ));
            }
            counts.insert(name.to_string(), n);
        }
        periods.push(PeriodResult {
            end_year: year,
            seed: slice_seed(cfg.seed, year),
            n_obs: slice.len(),
            counts,
            summary: fit.summary,
            diagnostics: fit.diagnostics,
            warnings,
        });
    }
    let evolution = evolution_table(&periods);
    Ok(TimesliceResult { periods, evolution })
}

fn evolution_table(periods: &[PeriodResult]) -> Vec<EvolutionRow> {
    let mut rows = Vec::new();
    for p in periods {
        let mut push = |parameter: String, s: &ScalarSummary, n_obs: usize| {
            rows.push(EvolutionRow {
                period: p.end_year,
                parameter,
                mean: s.mean,
                hpd_lo: s.hpd.0,
                hpd_hi: s.hpd.1,
                n_obs,
            })
        };
        for name in TRACKED_CATEGORIES {
            if let Some(c) = p.summary.category(name) {
                let n = p.counts.get(name).copied().unwrap_or(0);
                push(format!("mu_m.{name}"), &c.mu_m, n);
                push(format!("mu_r.{name}"), &c.mu_r, n);
            }
        }
        push("rho".into(), &p.summary.rho, p.n_obs);
        if let Some(pi) = p.summary.predicted(TRACKED_POINT_SOURCE) {
            let n = p.counts.get(&pi.category).copied().unwrap_or(0);
            rows.push(EvolutionRow {
                period: p.end_year,
                parameter: format!("predicted_lower.{TRACKED_POINT_SOURCE}"),
                mean: pi.mean_lower,
                hpd_lo: pi.hpd_lower.0,
                hpd_hi: pi.hpd_lower.1,
                n_obs: n,
            });
            rows.push(EvolutionRow {
                period: p.end_year,
                parameter: format!("predicted_upper.{TRACKED_POINT_SOURCE}"),
                mean: pi.mean_upper,
                hpd_lo: pi.hpd_upper.0,
                hpd_hi: pi.hpd_upper.1,
                n_obs: n,
            });
        }
    }
    rows
}

impl TimesliceResult {
    pub fn period(&self, end_year: i32) -> Option<&PeriodResult> {
        self.periods.iter().find(|p| p.end_year == end_year)
    }

    /// `timeslice.csv`: period, parameter, mean, hpd_lo, hpd_hi, n_obs.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["period", "parameter", "mean", "hpd_lo", "hpd_hi", "n_obs"])?;
        for r in &self.evolution {
            w.write_record([
                r.period.to_string(),
                r.parameter.clone(),
                r.mean.to_string(),
                r.hpd_lo.to_string(),
                r.hpd_hi.to_string(),
                r.n_obs.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<timeslice csv>", e))?;
        Ok(())
    }

    /// One plot-data table per panel, keyed by file stem: a midpoint/range
    /// panel per tracked category, plus `panel_rho` and the predicted
    /// interval of the tracked point estimate.
    pub fn panels(&self) -> Result<Vec<(String, Vec<u8>)>> {
        let mut out = Vec::new();
        for name in TRACKED_CATEGORIES {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "period", "n_obs", "mu_m_mean", "mu_m_hpd_lo", "mu_m_hpd_hi", "mu_r_mean", "mu_r_hpd_lo",
                "mu_r_hpd_hi",
            ])?;
            for p in &self.periods {
                if let Some(c) = p.summary.category(name) {
                    w.write_record([
                        p.end_year.to_string(),
                        p.counts.get(name).copied().unwrap_or(0).to_string(),
                        c.mu_m.mean.to_string(),
                        c.mu_m.hpd.0.to_string(),
                        c.mu_m.hpd.1.to_string(),
                        c.mu_r.mean.to_string(),
                        c.mu_r.hpd.0.to_string(),
                        c.mu_r.hpd.1.to_string(),
                    ])?;
                }
            }
            out.push((format!("panel_{name}"), into_bytes(w)?));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["period", "n_obs", "mean", "hpd_lo", "hpd_hi"])?;
        for p in &self.periods {
            let r = &p.summary.rho;
            w.write_record([
                p.end_year.to_string(),
                p.n_obs.to_string(),
                r.mean.to_string(),
                r.hpd.0.to_string(),
                r.hpd.1.to_string(),
            ])?;
        }
        out.push(("panel_rho".into(), into_bytes(w)?));

        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["period", "point", "mean_lower", "mean_upper"])?;
        for p in &self.periods {
            if let Some(pi) = p.summary.predicted(TRACKED_POINT_SOURCE) {
                w.write_record([
                    p.end_year.to_string(),
                    pi.point.to_string(),
                    pi.mean_lower.to_string(),
                    pi.mean_upper.to_string(),
                ])?;
            }
        }
        out.push((format!("panel_predicted_{TRACKED_POINT_SOURCE}"), into_bytes(w)?));
        Ok(out)
    }
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::io("<panel csv>", e.into_error()))
}
