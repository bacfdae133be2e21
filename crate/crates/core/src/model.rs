//! Joint log posterior of the constrained hierarchical model.
//!
//! Free parameters are the leaf means `(mu_m, mu_r)`, a scale pair
//! `(sigma_m, sigma_r)` for every observed category and one correlation
//! `rho` shared by all categories. Point-only estimates contribute a latent
//! log range each.
//!
//! Priors:
//!
//! * `mu_m ~ N(0, 100^2)` truncated to `mu_m > 0` (variance 10000),
//! * `mu_r ~ N(-1, 1.5^2)` truncated to `mu_r < log(2 mu_m)`, with the
//!   parameter-dependent normalising constant included,
//! * `sigma_m, sigma_r ~ Half-Cauchy(0, 2.5)`,
//! * `rho ~ Uniform(-1, 1)`, the LKJ(1) density on a 2x2 correlation matrix.
//!
//! A datum `(m, log r)` in category `j` is bivariate normal around
//! `(mu_m(j), mu_r(j))`. A point-only datum with weight `w` contributes
//! `w * log N(m) + log N(latent | m)`, which equals the bivariate density
//! when `w = 1` and keeps the latent's conditional proper when `w = 0`.

use std::ops::Add;

use serde::Serialize;

use crate::dataset::{Dataset, SymbolicDatum};
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, MeanParams};
use crate::math::{half_cauchy_logpdf, log_std_normal_cdf, normal_logpdf, std_normal_inverse_mills, LN_2PI};

pub const MU_M_PRIOR_SD: f64 = 100.0;
pub const MU_R_PRIOR_MEAN: f64 = -1.0;
pub const MU_R_PRIOR_SD: f64 = 1.5;
pub const SIGMA_PRIOR_SCALE: f64 = 2.5;

/// A log density on the natural-log scale. Never NaN; `-inf` marks a point
/// outside the support.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LogDensity(f64);

impl LogDensity {
    pub const NEG_INFINITY: LogDensity = LogDensity(f64::NEG_INFINITY);

    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            Self::NEG_INFINITY
        } else {
            LogDensity(value)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl Add for LogDensity {
    type Output = LogDensity;
    fn add(self, rhs: LogDensity) -> LogDensity {
        LogDensity::new(self.0 + rhs.0)
    }
}

/// One point in parameter space. Leaf vectors follow [`Hierarchy::leaves`],
/// scale vectors follow [`Hierarchy::observed`], latents follow
/// [`Model::latent_sources`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterState {
    pub leaf_mu_m: Vec<f64>,
    pub leaf_mu_r: Vec<f64>,
    pub sigma_m: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub rho: f64,
    pub latent_log_r: Vec<f64>,
}

impl ParameterState {
    /// Free scalars followed by latents, in [`Model::parameter_names`] order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_values());
        for (m, r) in self.leaf_mu_m.iter().zip(&self.leaf_mu_r) {
            out.push(*m);
            out.push(*r);
        }
        for (m, r) in self.sigma_m.iter().zip(&self.sigma_r) {
            out.push(*m);
            out.push(*r);
        }
        out.push(self.rho);
        out.extend_from_slice(&self.latent_log_r);
        out
    }

    fn n_values(&self) -> usize {
        2 * self.leaf_mu_m.len() + 2 * self.sigma_m.len() + 1 + self.latent_log_r.len()
    }
}

#[derive(Debug, Clone)]
struct ModelDatum {
    category: usize,
    scale_slot: usize,
    m: f64,
    log_r: Option<f64>,
    weight: f64,
    latent: Option<usize>,
}

/// The hierarchy plus the data, ready for density evaluation.
#[derive(Debug, Clone)]
pub struct Model {
    hierarchy: Hierarchy,
    data: Vec<ModelDatum>,
    symbolic: Vec<SymbolicDatum>,
    latent_data: Vec<usize>,
}

impl Model {
    pub fn new(ds: &Dataset, hierarchy: Hierarchy) -> Result<Self> {
        let mut data = Vec::with_capacity(ds.symbolic.len());
        let mut latent_data = Vec::new();
        for (i, d) in ds.symbolic.iter().enumerate() {
            let category = hierarchy
                .index_of(&d.category)
                .ok_or_else(|| Error::UnmodelledCategory(d.category.clone()))?;
            let scale_slot = hierarchy
                .observed_slot(category)
                .ok_or_else(|| Error::UnmodelledCategory(d.category.clone()))?;
            let latent = if d.log_r.is_none() {
                latent_data.push(i);
                Some(latent_data.len() - 1)
            } else {
                None
            };
            data.push(ModelDatum {
                category,
                scale_slot,
                m: d.m,
                log_r: d.log_r,
                weight: d.weight,
                latent,
            });
        }
        Ok(Model {
            hierarchy,
            data,
            symbolic: ds.symbolic.clone(),
            latent_data,
        })
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn symbolic(&self) -> &[SymbolicDatum] {
        &self.symbolic
    }

    pub fn n_leaves(&self) -> usize {
        self.hierarchy.leaves().len()
    }

    pub fn n_observed(&self) -> usize {
        self.hierarchy.observed().len()
    }

    /// Number of free scalars (excluding latents).
    pub fn n_free(&self) -> usize {
        2 * self.n_leaves() + 2 * self.n_observed() + 1
    }

    pub fn n_latent(&self) -> usize {
        self.latent_data.len()
    }

    /// Point-only data that carry a latent log range, in latent order.
    pub fn latent_data(&self) -> impl Iterator<Item = &SymbolicDatum> {
        self.latent_data.iter().map(|&i| &self.symbolic[i])
    }

    pub fn latent_sources(&self) -> Vec<&str> {
        self.latent_data().map(|d| d.source.as_str()).collect()
    }

    /// Stable names: `mu_m.<leaf>`, `mu_r.<leaf>`, `sigma_m.<cat>`,
    /// `sigma_r.<cat>`, `rho`, then `latent_log_r.<source>`.
    pub fn parameter_names(&self) -> Vec<String> {
        let h = &self.hierarchy;
        let mut names = Vec::with_capacity(self.n_free() + self.n_latent());
        for &c in h.leaves() {
            names.push(format!("mu_m.{}", h.name(c)));
            names.push(format!("mu_r.{}", h.name(c)));
        }
        for &c in h.observed() {
            names.push(format!("sigma_m.{}", h.name(c)));
            names.push(format!("sigma_r.{}", h.name(c)));
        }
        names.push("rho".to_string());
        for s in self.latent_sources() {
            names.push(format!("latent_log_r.{s}"));
        }
        names
    }

    /// Rebuilds a state from values in [`Model::parameter_names`] order.
    pub fn unflatten(&self, values: &[f64]) -> Result<ParameterState> {
        let expected = self.n_free() + self.n_latent();
        if values.len() != expected {
            return Err(Error::ChainFile(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        let l = self.n_leaves();
        let k = self.n_observed();
        let leaf = &values[..2 * l];
        let scale = &values[2 * l..2 * l + 2 * k];
        Ok(ParameterState {
            leaf_mu_m: leaf.iter().step_by(2).copied().collect(),
            leaf_mu_r: leaf.iter().skip(1).step_by(2).copied().collect(),
            sigma_m: scale.iter().step_by(2).copied().collect(),
            sigma_r: scale.iter().skip(1).step_by(2).copied().collect(),
            rho: values[2 * l + 2 * k],
            latent_log_r: values[2 * l + 2 * k + 1..].to_vec(),
        })
    }

    pub fn means(&self, state: &ParameterState) -> MeanParams {
        let mut out = MeanParams {
            mu_m: Vec::new(),
            mu_r: Vec::new(),
        };
        self.hierarchy
            .derive_into(&state.leaf_mu_m, &state.leaf_mu_r, &mut out);
        out
    }

    /// Describes the first violated state invariant, if any.
    pub fn check_state(&self, state: &ParameterState) -> std::result::Result<(), String> {
        let l = self.n_leaves();
        let k = self.n_observed();
        if state.leaf_mu_m.len() != l
            || state.leaf_mu_r.len() != l
            || state.sigma_m.len() != k
            || state.sigma_r.len() != k
            || state.latent_log_r.len() != self.n_latent()
        {
            return Err("state has the wrong shape".into());
        }
        for (i, (&m, &r)) in state.leaf_mu_m.iter().zip(&state.leaf_mu_r).enumerate() {
            let name = self.hierarchy.name(self.hierarchy.leaves()[i]);
            if !(m.is_finite() && m > 0.0) {
                return Err(format!("mu_m.{name} = {m} is not positive"));
            }
            if !(r.is_finite() && r < (2.0 * m).ln()) {
                return Err(format!("mu_r.{name} = {r} is not below log(2 mu_m)"));
            }
        }
        for &s in state.sigma_m.iter().chain(&state.sigma_r) {
            if !(s.is_finite() && s > 0.0) {
                return Err(format!("scale {s} is not positive"));
            }
        }
        if !(state.rho > -1.0 && state.rho < 1.0) {
            return Err(format!("rho = {} outside (-1, 1)", state.rho));
        }
        if let Some(x) = state.latent_log_r.iter().find(|x| !x.is_finite()) {
            return Err(format!("latent log range {x} is not finite"));
        }
        Ok(())
    }

    pub fn log_prior(&self, state: &ParameterState) -> LogDensity {
        if self.check_state(state).is_err() {
            return LogDensity::NEG_INFINITY;
        }
        let mut lp = 0.0;
        for (&m, &r) in state.leaf_mu_m.iter().zip(&state.leaf_mu_r) {
            lp += leaf_mu_m_logpdf(m) + leaf_mu_r_logpdf(r, m);
        }
        for &s in state.sigma_m.iter().chain(&state.sigma_r) {
            lp += half_cauchy_logpdf(s, SIGMA_PRIOR_SCALE);
        }
        lp += rho_logpdf(state.rho);
        LogDensity::new(lp)
    }

    pub fn log_likelihood(&self, state: &ParameterState) -> LogDensity {
        if self.check_state(state).is_err() {
            return LogDensity::NEG_INFINITY;
        }
        let means = self.means(state);
        LogDensity::new(self.log_likelihood_with(state, &means, false))
    }

    /// `collapsed` drops the latent conditional terms, which integrates the
    /// latent log ranges out exactly.
    fn log_likelihood_with(&self, state: &ParameterState, means: &MeanParams, collapsed: bool) -> f64 {
        let rho = state.rho;
        let mut ll = 0.0;
        for d in &self.data {
            let mu_m = means.mu_m[d.category];
            let mu_r = means.mu_r[d.category];
            let sm = state.sigma_m[d.scale_slot];
            let sr = state.sigma_r[d.scale_slot];
            match (d.log_r, d.latent) {
                (Some(lr), _) => ll += d.weight * bivariate_logpdf(d.m, lr, mu_m, mu_r, sm, sr, rho),
                (None, Some(slot)) => {
                    ll += d.weight * normal_logpdf(d.m, mu_m, sm);
                    if !collapsed {
                        let (cm, csd) = conditional_log_r(d.m, mu_m, mu_r, sm, sr, rho);
                        ll += normal_logpdf(state.latent_log_r[slot], cm, csd);
                    }
                }
                (None, None) => unreachable!("point-only datum without latent slot"),
            }
        }
        ll
    }

    pub fn log_posterior(&self, state: &ParameterState) -> LogDensity {
        let prior = self.log_prior(state);
        if !prior.is_finite() {
            return prior;
        }
        prior + LogDensity::new(self.log_likelihood_with(state, &self.means(state), false))
    }

    /// Posterior of the free parameters with every latent integrated out.
    /// Ignores `state.latent_log_r`.
    pub fn log_marginal_posterior(&self, state: &ParameterState) -> LogDensity {
        let prior = self.log_prior(state);
        if !prior.is_finite() {
            return prior;
        }
        prior + LogDensity::new(self.log_likelihood_with(state, &self.means(state), true))
    }

    /// Exact Gaussian conditional of the latent log range for latent `slot`.
    pub fn conditional_latent(&self, state: &ParameterState, slot: usize) -> (f64, f64) {
        let d = &self.data[self.latent_data[slot]];
        let means = self.means(state);
        conditional_log_r(
            d.m,
            means.mu_m[d.category],
            means.mu_r[d.category],
            state.sigma_m[d.scale_slot],
            state.sigma_r[d.scale_slot],
            state.rho,
        )
    }

    /// Conditional of `log r` given `m` for a point-only datum.
    pub fn conditional_latent_distribution(
        &self,
        state: &ParameterState,
        datum: &SymbolicDatum,
    ) -> Result<(f64, f64)> {
        if datum.log_r.is_some() {
            return Err(Error::ObservedLogRange(datum.source.clone()));
        }
        let c = self
            .hierarchy
            .index_of(&datum.category)
            .ok_or_else(|| Error::UnmodelledCategory(datum.category.clone()))?;
        let slot = self
            .hierarchy
            .observed_slot(c)
            .ok_or_else(|| Error::UnmodelledCategory(datum.category.clone()))?;
        let means = self.means(state);
        Ok(conditional_log_r(
            datum.m,
            means.mu_m[c],
            means.mu_r[c],
            state.sigma_m[slot],
            state.sigma_r[slot],
            state.rho,
        ))
    }

    // Unconstrained coordinates:
    //   per leaf   u = log mu_m,  v = log(log(2 mu_m) - mu_r)
    //   per scale  log sigma_m, log sigma_r
    //   rho        atanh rho

    pub fn to_unconstrained(&self, state: &ParameterState) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_free());
        for (&m, &r) in state.leaf_mu_m.iter().zip(&state.leaf_mu_r) {
            theta.push(m.ln());
            theta.push(((2.0 * m).ln() - r).ln());
        }
        for (&sm, &sr) in state.sigma_m.iter().zip(&state.sigma_r) {
            theta.push(sm.ln());
            theta.push(sr.ln());
        }
        theta.push(state.rho.atanh());
        theta
    }

    /// Writes the constrained values that depend on coordinate `i` of `theta`.
    pub fn write_coordinate(&self, theta: &[f64], i: usize, state: &mut ParameterState) {
        let l = self.n_leaves();
        let k = self.n_observed();
        if i < 2 * l {
            let slot = i / 2;
            let u = theta[2 * slot];
            let v = theta[2 * slot + 1];
            let m = u.exp();
            state.leaf_mu_m[slot] = m;
            state.leaf_mu_r[slot] = std::f64::consts::LN_2 + u - v.exp();
        } else if i < 2 * l + 2 * k {
            let j = i - 2 * l;
            if j.is_multiple_of(2) {
                state.sigma_m[j / 2] = theta[i].exp();
            } else {
                state.sigma_r[j / 2] = theta[i].exp();
            }
        } else {
            state.rho = theta[i].tanh();
        }
    }

    pub fn from_unconstrained(&self, theta: &[f64], latent_log_r: Vec<f64>) -> ParameterState {
        let l = self.n_leaves();
        let k = self.n_observed();
        let mut state = ParameterState {
            leaf_mu_m: vec![0.0; l],
            leaf_mu_r: vec![0.0; l],
            sigma_m: vec![0.0; k],
            sigma_r: vec![0.0; k],
            rho: 0.0,
            latent_log_r,
        };
        for i in 0..theta.len() {
            self.write_coordinate(theta, i, &mut state);
        }
        state
    }

    /// Log absolute Jacobian determinant of the unconstrained-to-constrained map.
    pub fn log_jacobian(&self, theta: &[f64], state: &ParameterState) -> f64 {
        let l = self.n_leaves();
        let leaf: f64 = theta[..2 * l].iter().sum();
        let scale: f64 = theta[2 * l..theta.len() - 1].iter().sum();
        let rho = state.rho;
        leaf + scale + (1.0 - rho * rho).ln()
    }

    /// Log posterior plus log Jacobian; the density the sampler targets.
    pub fn log_target(&self, theta: &[f64], state: &ParameterState) -> LogDensity {
        let lp = self.log_posterior(state);
        if !lp.is_finite() {
            return lp;
        }
        lp + LogDensity::new(self.log_jacobian(theta, state))
    }

    /// [`Model::log_marginal_posterior`] plus log Jacobian.
    pub fn log_marginal_target(&self, theta: &[f64], state: &ParameterState) -> LogDensity {
        let lp = self.log_marginal_posterior(state);
        if !lp.is_finite() {
            return lp;
        }
        lp + LogDensity::new(self.log_jacobian(theta, state))
    }

    /// Analytic gradient of [`Model::log_target`] with respect to the
    /// unconstrained coordinates, latents held fixed.
    pub fn gradient_unconstrained(&self, state: &ParameterState) -> Vec<f64> {
        let h = &self.hierarchy;
        let means = self.means(state);
        let n = h.len();
        let k = self.n_observed();
        let mut g_mu_m = vec![0.0; n];
        let mut g_mu_r = vec![0.0; n];
        let mut g_sm = vec![0.0; k];
        let mut g_sr = vec![0.0; k];
        let mut g_rho = 0.0;
        let rho = state.rho;

        for d in &self.data {
            let (mu_m, mu_r) = (means.mu_m[d.category], means.mu_r[d.category]);
            let (sm, sr) = (state.sigma_m[d.scale_slot], state.sigma_r[d.scale_slot]);
            let (lr, w_joint, w_marg) = match (d.log_r, d.latent) {
                (Some(lr), _) => (lr, d.weight, 0.0),
                // joint density plus (w - 1) times the midpoint marginal
                (None, Some(slot)) => (state.latent_log_r[slot], 1.0, d.weight - 1.0),
                (None, None) => unreachable!(),
            };
            let b = bivariate_grad(d.m, lr, mu_m, mu_r, sm, sr, rho);
            g_mu_m[d.category] += w_joint * b[0];
            g_mu_r[d.category] += w_joint * b[1];
            g_sm[d.scale_slot] += w_joint * b[2];
            g_sr[d.scale_slot] += w_joint * b[3];
            g_rho += w_joint * b[4];
            if w_marg != 0.0 {
                let z = (d.m - mu_m) / sm;
                g_mu_m[d.category] += w_marg * z / sm;
                g_sm[d.scale_slot] += w_marg * (z * z - 1.0) / sm;
            }
        }

        let mut grad = Vec::with_capacity(self.n_free());
        for (slot, &leaf) in h.leaves().iter().enumerate() {
            let m = state.leaf_mu_m[slot];
            let r = state.leaf_mu_r[slot];
            let mut dm = 0.0;
            let mut dr = 0.0;
            for c in h.ancestors_inclusive(leaf) {
                dm += g_mu_m[c];
                dr += g_mu_r[c] * (r - means.mu_r[c]).exp();
            }
            // priors
            dm += -m / (MU_M_PRIOR_SD * MU_M_PRIOR_SD);
            dr += -(r - MU_R_PRIOR_MEAN) / (MU_R_PRIOR_SD * MU_R_PRIOR_SD);
            let zb = ((2.0 * m).ln() - MU_R_PRIOR_MEAN) / MU_R_PRIOR_SD;
            dm -= std_normal_inverse_mills(zb) / (MU_R_PRIOR_SD * m);
            let gap = (2.0 * m).ln() - r;
            // u moves mu_m multiplicatively and mu_r additively; +1 from the Jacobian
            grad.push(dm * m + dr + 1.0);
            grad.push(-dr * gap + 1.0);
        }
        for j in 0..k {
            let (sm, sr) = (state.sigma_m[j], state.sigma_r[j]);
            let hc = |s: f64| -2.0 * s / (SIGMA_PRIOR_SCALE * SIGMA_PRIOR_SCALE + s * s);
            grad.push((g_sm[j] + hc(sm)) * sm + 1.0);
            grad.push((g_sr[j] + hc(sr)) * sr + 1.0);
        }
        grad.push(g_rho * (1.0 - rho * rho) - 2.0 * rho);
        grad
    }
}

pub fn leaf_mu_m_logpdf(m: f64) -> f64 {
    // half-normal: the factor 2 restores mass lost to truncation at zero
    std::f64::consts::LN_2 + normal_logpdf(m, 0.0, MU_M_PRIOR_SD)
}

pub fn leaf_mu_r_logpdf(r: f64, mu_m: f64) -> f64 {
    let bound = (2.0 * mu_m).ln();
    normal_logpdf(r, MU_R_PRIOR_MEAN, MU_R_PRIOR_SD)
        - log_std_normal_cdf((bound - MU_R_PRIOR_MEAN) / MU_R_PRIOR_SD)
}

pub fn rho_logpdf(rho: f64) -> f64 {
    if rho > -1.0 && rho < 1.0 {
        -std::f64::consts::LN_2
    } else {
        f64::NEG_INFINITY
    }
}

/// Bivariate normal log density of `(m, lr)` with marginal scales
/// `(sm, sr)` and correlation `rho`.
pub fn bivariate_logpdf(m: f64, lr: f64, mu_m: f64, mu_r: f64, sm: f64, sr: f64, rho: f64) -> f64 {
    let zm = (m - mu_m) / sm;
    let zr = (lr - mu_r) / sr;
    let s = 1.0 - rho * rho;
    let q = (zm * zm - 2.0 * rho * zm * zr + zr * zr) / s;
    -LN_2PI - sm.ln() - sr.ln() - 0.5 * s.ln() - 0.5 * q
}

/// Mean and standard deviation of `log r` given `m`.
pub fn conditional_log_r(m: f64, mu_m: f64, mu_r: f64, sm: f64, sr: f64, rho: f64) -> (f64, f64) {
    (
        mu_r + rho * (sr / sm) * (m - mu_m),
        sr * (1.0 - rho * rho).sqrt(),
    )
}

/// Partial derivatives of [`bivariate_logpdf`] in
/// `(mu_m, mu_r, sigma_m, sigma_r, rho)`.
fn bivariate_grad(m: f64, lr: f64, mu_m: f64, mu_r: f64, sm: f64, sr: f64, rho: f64) -> [f64; 5] {
    let zm = (m - mu_m) / sm;
    let zr = (lr - mu_r) / sr;
    let s = 1.0 - rho * rho;
    let a = zm * zm - 2.0 * rho * zm * zr + zr * zr;
    [
        (zm - rho * zr) / (s * sm),
        (zr - rho * zm) / (s * sr),
        -1.0 / sm + zm * (zm - rho * zr) / (s * sm),
        -1.0 / sr + zr * (zr - rho * zm) / (s * sr),
        rho / s + zm * zr / s - a * rho / (s * s),
    ]
}
