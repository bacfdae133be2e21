//! Brute-force references for validating the density code and the sampler.
//!
//! Everything here is written separately from [`crate::model`]: parent
//! means come from explicit interval-endpoint sums, bivariate densities from
//! an explicit 2x2 covariance inverse, and the truncation constant of the
//! `mu_r` prior from Simpson quadrature rather than `erfc`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dataset::{Dataset, SymbolicDatum};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::model::ParameterState;

pub const MAX_CELLS: usize = 10_000_000;
pub const MIN_POINTS: usize = 20;
/// Largest mass fraction allowed in the outer band of an open grid edge.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-3;

const MU_M_SD: f64 = 100.0;
const MU_R_MEAN: f64 = -1.0;
const MU_R_SD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    /// The density's support ends at `lo`; mass there is expected.
    pub lo_is_support_edge: bool,
    pub hi_is_support_edge: bool,
}

impl GridAxis {
    pub fn new(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        GridAxis {
            name: name.to_string(),
            lo,
            hi,
            n,
            lo_is_support_edge: false,
            hi_is_support_edge: false,
        }
    }

    pub fn with_support_edge_at_lo(mut self) -> Self {
        self.lo_is_support_edge = true;
        self
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    fn weight(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i == self.n - 1 {
            0.5 * h
        } else {
            h
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn new(axes: Vec<GridAxis>) -> Self {
        GridSpec { axes }
    }

    pub fn validate(&self) -> Result<usize> {
        let mut cells: usize = 1;
        for a in &self.axes {
            #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
            if !(a.lo < a.hi) {
                return Err(Error::Grid(format!("axis `{}`: lo must be below hi", a.name)));
            }
            if a.n < MIN_POINTS {
                return Err(Error::Grid(format!("axis `{}`: need at least {MIN_POINTS} points", a.name)));
            }
            cells = cells
                .checked_mul(a.n)
                .filter(|&c| c <= MAX_CELLS)
                .ok_or_else(|| Error::Grid(format!("more than {MAX_CELLS} cells")))?;
        }
        Ok(cells)
    }

    /// Same ranges with twice as many intervals per axis.
    pub fn refined(&self) -> GridSpec {
        GridSpec {
            axes: self
                .axes
                .iter()
                .map(|a| GridAxis {
                    n: 2 * a.n - 1,
                    ..a.clone()
                })
                .collect(),
        }
    }
}

/// Small models the grid can integrate.
#[derive(Debug, Clone, PartialEq)]
pub enum ReducedModel {
    /// `m_i ~ N(mu, noise_sd^2)`, `mu ~ N(prior_mean, prior_sd^2)`; axis `mu`.
    ConjugateNormal {
        prior_mean: f64,
        prior_sd: f64,
        noise_sd: f64,
    },
    /// One category, no hierarchy, scales and correlation fixed; axes
    /// `mu_m`, `mu_r`. Every datum must have an observed log range.
    SingleCategory { sigma_m: f64, sigma_r: f64, rho: f64 },
    /// The joint truncated prior of one leaf's `(mu_m, mu_r)`; no data.
    LeafPrior,
}

impl ReducedModel {
    fn axis_names(&self) -> &'static [&'static str] {
        match self {
            ReducedModel::ConjugateNormal { .. } => &["mu"],
            ReducedModel::SingleCategory { .. } | ReducedModel::LeafPrior => &["mu_m", "mu_r"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

fn gauss_log(x: f64, mean: f64, sd: f64) -> f64 {
    let d = (x - mean) / sd;
    -0.5 * d * d - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `log ∫_{-∞}^{upper} N(x; mean, sd) dx` by composite Simpson.
pub fn log_normal_mass_below(upper: f64, mean: f64, sd: f64) -> f64 {
    let lo = mean - 12.0 * sd;
    if upper <= lo {
        return f64::NEG_INFINITY;
    }
    let n = 8000;
    let h = (upper - lo) / n as f64;
    let f = |x: f64| gauss_log(x, mean, sd).exp();
    let mut s = f(lo) + f(upper);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    (s * h / 3.0).ln()
}

/// Bivariate normal log density via the explicit covariance inverse.
pub fn reference_bivariate_logpdf(x: [f64; 2], mu: [f64; 2], sm: f64, sr: f64, rho: f64) -> f64 {
    let cov = [[sm * sm, rho * sm * sr], [rho * sm * sr, sr * sr]];
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let inv = [
        [cov[1][1] / det, -cov[0][1] / det],
        [-cov[1][0] / det, cov[0][0] / det],
    ];
    let d = [x[0] - mu[0], x[1] - mu[1]];
    let quad = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1]) + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
    -(2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad
}

fn single_category_loglik(data: &[SymbolicDatum], mu_m: f64, mu_r: f64, sm: f64, sr: f64, rho: f64) -> f64 {
    data.iter()
        .map(|d| {
            d.weight * reference_bivariate_logpdf([d.m, d.log_r.unwrap()], [mu_m, mu_r], sm, sr, rho)
        })
        .sum()
}

/// Trapezoidal quadrature of the unnormalised posterior over `grid`,
/// returning the normalised mean and standard deviation of every axis.
pub fn grid_posterior_moments(
    model: &ReducedModel,
    ds: &Dataset,
    grid: &GridSpec,
) -> Result<BTreeMap<String, Moments>> {
    let cells = grid.validate()?;
    let names = model.axis_names();
    if grid.axes.len() != names.len() || grid.axes.iter().zip(names).any(|(a, n)| a.name != *n) {
        return Err(Error::Grid(format!("model expects axes {names:?}")));
    }
    if matches!(model, ReducedModel::SingleCategory { .. }) && ds.symbolic.iter().any(|d| d.log_r.is_none()) {
        return Err(Error::Oracle("single-category oracle needs fully observed data".into()));
    }

    // The truncation constant depends only on mu_m, so tabulate it per row.
    let log_trunc: Vec<f64> = match model {
        ReducedModel::ConjugateNormal { .. } => Vec::new(),
        _ => (0..grid.axes[0].n)
            .map(|i| {
                let m = grid.axes[0].point(i);
                if m > 0.0 {
                    log_normal_mass_below((2.0 * m).ln(), MU_R_MEAN, MU_R_SD)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect(),
    };

    let log_density = |idx: &[usize]| -> f64 {
        match *model {
            ReducedModel::ConjugateNormal {
                prior_mean,
                prior_sd,
                noise_sd,
            } => {
                let mu = grid.axes[0].point(idx[0]);
                gauss_log(mu, prior_mean, prior_sd)
                    + ds.symbolic
                        .iter()
                        .map(|d| d.weight * gauss_log(d.m, mu, noise_sd))
                        .sum::<f64>()
            }
            ReducedModel::SingleCategory { .. } | ReducedModel::LeafPrior => {
                let m = grid.axes[0].point(idx[0]);
                let r = grid.axes[1].point(idx[1]);
                if m <= 0.0 || r >= (2.0 * m).ln() {
                    return f64::NEG_INFINITY;
                }
                let prior = gauss_log(m, 0.0, MU_M_SD) + gauss_log(r, MU_R_MEAN, MU_R_SD) - log_trunc[idx[0]];
                match *model {
                    ReducedModel::SingleCategory { sigma_m, sigma_r, rho } => {
                        prior + single_category_loglik(&ds.symbolic, m, r, sigma_m, sigma_r, rho)
                    }
                    _ => prior,
                }
            }
        }
    };

    let dims = grid.axes.len();
    let mut idx = vec![0usize; dims];
    let mut logp = Vec::with_capacity(cells);
    for _ in 0..cells {
        logp.push(log_density(&idx));
        for d in (0..dims).rev() {
            idx[d] += 1;
            if idx[d] < grid.axes[d].n {
                break;
            }
            idx[d] = 0;
        }
    }
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Oracle("density vanishes on the whole grid".into()));
    }

    let bands: Vec<usize> = grid.axes.iter().map(|a| (a.n / 100).max(1)).collect();
    let mut total = 0.0;
    let mut boundary = 0.0;
    let mut s1 = vec![0.0; dims];
    let mut s2 = vec![0.0; dims];
    idx.iter_mut().for_each(|i| *i = 0);
    for &lp in &logp {
        let mut w = (lp - max).exp();
        for (d, a) in grid.axes.iter().enumerate() {
            w *= a.weight(idx[d]);
        }
        total += w;
        let on_edge = grid.axes.iter().enumerate().any(|(d, a)| {
            (!a.lo_is_support_edge && idx[d] < bands[d]) || (!a.hi_is_support_edge && idx[d] >= a.n - bands[d])
        });
        if on_edge {
            boundary += w;
        }
        for (d, a) in grid.axes.iter().enumerate() {
            let x = a.point(idx[d]);
            s1[d] += w * x;
            s2[d] += w * x * x;
        }
        for d in (0..dims).rev() {
            idx[d] += 1;
            if idx[d] < grid.axes[d].n {
                break;
            }
            idx[d] = 0;
        }
    }
    if boundary / total > BOUNDARY_MASS_LIMIT {
        return Err(Error::Grid(format!(
            "{:.3}% of the mass lies on the grid boundary; widen the grid",
            100.0 * boundary / total
        )));
    }
    Ok(grid
        .axes
        .iter()
        .enumerate()
        .map(|(d, a)| {
            let mean = s1[d] / total;
            let var = (s2[d] / total - mean * mean).max(0.0);
            (a.name.clone(), Moments { mean, sd: var.sqrt() })
        })
        .collect())
}

/// Full-model log likelihood computed along an independent route: parent
/// intervals as endpoint sums, then explicit 2x2 inversion per datum.
/// Latent values follow the model's order of point-only data.
pub fn reference_log_likelihood(state: &ParameterState, ds: &Dataset, hierarchy: &Hierarchy) -> f64 {
    fn endpoints(h: &Hierarchy, c: usize, s: &ParameterState) -> (f64, f64) {
        match h.leaf_slot(c) {
            Some(slot) => {
                let half = s.leaf_mu_r[slot].exp() / 2.0;
                (s.leaf_mu_m[slot] - half, s.leaf_mu_m[slot] + half)
            }
            None => h.children(c).iter().fold((0.0, 0.0), |acc, &k| {
                let (a, b) = endpoints(h, k, s);
                (acc.0 + a, acc.1 + b)
            }),
        }
    }
    let mut latent = state.latent_log_r.iter();
    let mut total = 0.0;
    for d in &ds.symbolic {
        let c = hierarchy.index_of(&d.category).expect("category in hierarchy");
        let slot = hierarchy.observed_slot(c).expect("observed category");
        let (a, b) = endpoints(hierarchy, c, state);
        let mu = [(a + b) / 2.0, (b - a).ln()];
        let (sm, sr, rho) = (state.sigma_m[slot], state.sigma_r[slot], state.rho);
        match d.log_r {
            Some(lr) => total += d.weight * reference_bivariate_logpdf([d.m, lr], mu, sm, sr, rho),
            None => {
                let l = *latent.next().expect("one latent per point-only datum");
                let joint = reference_bivariate_logpdf([d.m, l], mu, sm, sr, rho);
                let marginal = gauss_log(d.m, mu[0], sm);
                total += joint + (d.weight - 1.0) * marginal;
            }
        }
    }
    total
}
