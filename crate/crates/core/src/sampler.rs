//! Adaptive component-wise random-walk Metropolis with exact Gibbs updates
//! for the latent log ranges, plus split-R̂ and ESS diagnostics.
//!
//! Each sweep proposes every free scalar in turn on its unconstrained scale
//! (see [`Model::to_unconstrained`]); the Jacobian is part of the target so
//! the sampler never proposes across the `mu_r < log(2 mu_m)` boundary.
//! Metropolis ratios use the posterior with the latents integrated out
//! ([`Model::log_marginal_target`]), after which every latent is redrawn from
//! its exact conditional. The pair is a blocked Gibbs step on the joint
//! posterior and avoids the slow scale/latent coupling of plain augmentation.
//!
//! From the middle of warmup a joint Gaussian move over all free coordinates
//! follows each sweep, with covariance estimated from the second quarter of
//! warmup. Proposal scales follow a Robbins-Monro recursion on the log scale
//! during warmup and are frozen afterwards, as is the joint covariance.
//! Chains are independent and run in parallel; chain `k` uses the ChaCha8
//! stream `k` seeded by the master seed, so output does not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hierarchy::{Hierarchy, HierarchySpec};
use crate::model::{Model, ParameterState};

const INIT_ATTEMPTS: usize = 100;
const INITIAL_LOG_SCALE: f64 = -1.2;
/// Acceptance target for the joint move (multivariate optimal-scaling value).
const BLOCK_TARGET_ACCEPT: f64 = 0.234;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_samples: usize,
    pub thin: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub adapt_window: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            n_warmup: 5000,
            n_samples: 10_000,
            thin: 1,
            seed: 42,
            target_accept: 0.40,
            adapt_window: 50,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_chains < 2 {
            return fail("n_chains must be at least 2 (diagnostics need several chains)");
        }
        if self.n_samples == 0 || self.thin == 0 || self.adapt_window == 0 {
            return fail("n_samples, thin and adapt_window must be positive");
        }
        if self.n_samples < self.thin {
            return fail("thin exceeds n_samples");
        }
        if !(self.target_accept > 0.1 && self.target_accept < 0.9) {
            return fail("target_accept must lie in (0.1, 0.9)");
        }
        Ok(())
    }
}

/// Values for scale and correlation parameters held constant during sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedParameters {
    pub sigma_m: Vec<f64>,
    pub sigma_r: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub names: Vec<String>,
    pub draws: Vec<ParameterState>,
    /// Post-warmup acceptance rate of every sampled free scalar.
    pub accept_rates: BTreeMap<String, f64>,
    /// Proposal log scales when warmup ended.
    pub warmup_log_scales: Vec<f64>,
    /// Proposal log scales after the last iteration.
    pub log_scales: Vec<f64>,
    /// Post-warmup acceptance rate of the joint move, if it ran.
    pub block_accept_rate: Option<f64>,
    /// Log scale of the joint move when warmup ended and after the last iteration.
    pub block_log_scale: Option<(f64, f64)>,
    pub rng_state: ChaCha8Rng,
}

impl Chain {
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d.flatten()[idx]).collect()
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        let n = self.names.len();
        let mut cols = vec![Vec::with_capacity(self.draws.len()); n];
        for d in &self.draws {
            for (c, v) in cols.iter_mut().zip(d.flatten()) {
                c.push(v);
            }
        }
        cols
    }
}

pub fn run_mcmc(ds: &Dataset, spec: &HierarchySpec, cfg: &SamplerConfig) -> Result<Vec<Chain>> {
    let model = Model::new(ds, Hierarchy::new(spec)?)?;
    Sampler::new(&model, cfg.clone())?.run()
}

pub struct Sampler<'a> {
    model: &'a Model,
    cfg: SamplerConfig,
    fixed: Option<FixedParameters>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a Model, cfg: SamplerConfig) -> Result<Self> {
        cfg.validate()?;
        if model.symbolic().is_empty() {
            return Err(Error::Config("empty dataset".into()));
        }
        Ok(Sampler {
            model,
            cfg,
            fixed: None,
        })
    }

    /// Holds every scale and the correlation at the given values.
    pub fn with_fixed(mut self, fixed: FixedParameters) -> Result<Self> {
        let k = self.model.n_observed();
        if fixed.sigma_m.len() != k || fixed.sigma_r.len() != k {
            return Err(Error::Config(format!("fixed scales need {k} entries")));
        }
        self.fixed = Some(fixed);
        Ok(self)
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Indices of the unconstrained coordinates that are updated.
    fn active_coordinates(&self) -> Vec<usize> {
        let n = self.model.n_free();
        match self.fixed {
            None => (0..n).collect(),
            Some(_) => (0..2 * self.model.n_leaves()).collect(),
        }
    }

    pub fn run(&self) -> Result<Vec<Chain>> {
        (0..self.cfg.n_chains)
            .into_par_iter()
            .map(|k| self.run_chain(k))
            .collect()
    }

    pub fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(chain as u64);
        rng
    }

    /// Redraws every latent log range from its exact conditional.
    pub fn draw_latents<R: Rng>(&self, state: &mut ParameterState, rng: &mut R) {
        for slot in 0..self.model.n_latent() {
            let (mean, sd) = self.model.conditional_latent(state, slot);
            let z: f64 = rng.sample(StandardNormal);
            state.latent_log_r[slot] = mean + sd * z;
        }
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> ParameterState {
        let l = self.model.n_leaves();
        let k = self.model.n_observed();
        let leaf_mu_m: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..10.0)).collect();
        let leaf_mu_r = leaf_mu_m
            .iter()
            .map(|&m| rng.random_range(-1.0..f64::min(1.0, (2.0 * m).ln() - 0.1)))
            .collect();
        let mut state = ParameterState {
            leaf_mu_m,
            leaf_mu_r,
            sigma_m: (0..k).map(|_| rng.random_range(0.5..3.0)).collect(),
            sigma_r: (0..k).map(|_| rng.random_range(0.5..3.0)).collect(),
            rho: rng.random_range(-0.3..0.8),
            latent_log_r: vec![0.0; self.model.n_latent()],
        };
        if let Some(f) = &self.fixed {
            state.sigma_m.clone_from(&f.sigma_m);
            state.sigma_r.clone_from(&f.sigma_r);
            state.rho = f.rho;
        }
        self.draw_latents(&mut state, rng);
        state
    }

    /// Warmup iterations over which the joint-move covariance is estimated.
    /// `None` disables the joint move (too little warmup or a single coordinate).
    fn block_schedule(&self, n_active: usize) -> Option<(usize, usize)> {
        let w = self.cfg.n_warmup;
        if n_active < 2 || w < 8 * self.cfg.adapt_window {
            return None;
        }
        Some((w / 4, w / 2))
    }

    pub fn run_chain(&self, chain: usize) -> Result<Chain> {
        let model = self.model;
        let cfg = &self.cfg;
        let mut rng = self.chain_rng(chain);

        let mut start = None;
        for _ in 0..INIT_ATTEMPTS {
            let s = self.initial_state(&mut rng);
            let theta = model.to_unconstrained(&s);
            let s = model.from_unconstrained(&theta, s.latent_log_r);
            let lt = model.log_marginal_target(&theta, &s);
            if lt.is_finite() && model.log_target(&theta, &s).is_finite() {
                start = Some((theta, s, lt.value()));
                break;
            }
        }
        let (mut theta, mut state, mut current) = start.ok_or(Error::Initialisation {
            chain,
            attempts: INIT_ATTEMPTS,
        })?;

        let active = self.active_coordinates();
        let n_coord = model.n_free();
        let mut log_scale = vec![INITIAL_LOG_SCALE; n_coord];
        let mut window_accepts = vec![0usize; n_coord];
        let mut sampling_accepts = vec![0usize; n_coord];
        let mut batch = 0usize;
        let mut warmup_log_scales = log_scale.clone();
        let total = cfg.n_warmup + cfg.n_samples;
        let mut draws = Vec::with_capacity(cfg.n_samples / cfg.thin);

        let schedule = self.block_schedule(active.len());
        let mut moments = RunningMoments::new(active.len());
        let mut block: Option<Vec<Vec<f64>>> = None;
        let mut block_log_scale = 0.0_f64;
        let mut block_warmup_scale = None;
        let mut block_window = 0usize;
        let mut block_sampling = 0usize;
        let mut proposal = theta.clone();

        for it in 0..total {
            let warming = it < cfg.n_warmup;
            for &i in &active {
                let old = theta[i];
                let z: f64 = rng.sample(StandardNormal);
                theta[i] = old + log_scale[i].exp() * z;
                model.write_coordinate(&theta, i, &mut state);
                let proposed = model.log_marginal_target(&theta, &state);
                let u: f64 = rng.random();
                if proposed.is_finite() && u.ln() < proposed.value() - current {
                    current = proposed.value();
                    if warming {
                        window_accepts[i] += 1;
                    } else {
                        sampling_accepts[i] += 1;
                    }
                } else {
                    theta[i] = old;
                    model.write_coordinate(&theta, i, &mut state);
                }
            }
            if let Some(chol) = &block {
                let d = active.len();
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let scale = block_log_scale.exp();
                proposal.clone_from(&theta);
                for (r, &i) in active.iter().enumerate() {
                    let step: f64 = (0..=r).map(|c| chol[r][c] * z[c]).sum();
                    proposal[i] += scale * step;
                }
                let mut trial = state.clone();
                for &i in &active {
                    model.write_coordinate(&proposal, i, &mut trial);
                }
                let proposed = model.log_marginal_target(&proposal, &trial);
                let u: f64 = rng.random();
                if proposed.is_finite() && u.ln() < proposed.value() - current {
                    current = proposed.value();
                    std::mem::swap(&mut theta, &mut proposal);
                    state = trial;
                    if warming {
                        block_window += 1;
                    } else {
                        block_sampling += 1;
                    }
                }
            }
            if let Some((from, to)) = schedule {
                if it >= from && it < to {
                    moments.push(&active.iter().map(|&i| theta[i]).collect::<Vec<_>>());
                }
                if it + 1 == to {
                    block = moments.scaled_cholesky();
                    block_log_scale = 0.0;
                    block_window = 0;
                }
            }
            if model.n_latent() > 0 {
                self.draw_latents(&mut state, &mut rng);
                if !model.log_target(&theta, &state).is_finite() {
                    return Err(Error::NonFiniteAccepted { chain, iteration: it });
                }
            }

            if warming && (it + 1) % cfg.adapt_window == 0 {
                batch += 1;
                let step = 3.0 / (batch as f64).sqrt();
                for &i in &active {
                    let rate = window_accepts[i] as f64 / cfg.adapt_window as f64;
                    log_scale[i] += step * (rate - cfg.target_accept);
                    window_accepts[i] = 0;
                }
                if block.is_some() {
                    let rate = block_window as f64 / cfg.adapt_window as f64;
                    block_log_scale += step * (rate - BLOCK_TARGET_ACCEPT);
                    block_window = 0;
                }
            }
            if it + 1 == cfg.n_warmup {
                warmup_log_scales.clone_from(&log_scale);
                block_warmup_scale = Some(block_log_scale);
            }
            if !warming && (it - cfg.n_warmup + 1).is_multiple_of(cfg.thin) {
                draws.push(state.clone());
            }
        }
        if cfg.n_warmup == 0 {
            warmup_log_scales.clone_from(&log_scale);
        }

        let names = model.parameter_names();
        let accept_rates = active
            .iter()
            .map(|&i| {
                (
                    names[i].clone(),
                    sampling_accepts[i] as f64 / cfg.n_samples as f64,
                )
            })
            .collect();
        Ok(Chain {
            names,
            draws,
            accept_rates,
            warmup_log_scales,
            log_scales: log_scale,
            block_accept_rate: block
                .as_ref()
                .map(|_| block_sampling as f64 / cfg.n_samples as f64),
            block_log_scale: match (&block, block_warmup_scale) {
                (Some(_), Some(w)) => Some((w, block_log_scale)),
                _ => None,
            },
            rng_state: rng,
        })
    }
}

/// Welford accumulator for the mean and covariance of warmup positions.
struct RunningMoments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<Vec<f64>>,
}

#[allow(clippy::needless_range_loop)]
impl RunningMoments {
    fn new(d: usize) -> Self {
        RunningMoments {
            n: 0,
            mean: vec![0.0; d],
            m2: vec![vec![0.0; d]; d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let d = self.mean.len();
        let delta: Vec<f64> = (0..d).map(|i| x[i] - self.mean[i]).collect();
        for i in 0..d {
            self.mean[i] += delta[i] / self.n as f64;
        }
        for i in 0..d {
            for j in 0..=i {
                self.m2[i][j] += delta[i] * (x[j] - self.mean[j]);
            }
        }
    }

    /// Lower Cholesky factor of `2.38² / d` times the regularised covariance.
    fn scaled_cholesky(&self) -> Option<Vec<Vec<f64>>> {
        let d = self.mean.len();
        if self.n < 2 * d {
            return None;
        }
        let f = 2.38 * 2.38 / d as f64;
        let mut a = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..=i {
                let c = self.m2[i][j] / (self.n - 1) as f64;
                a[i][j] = f * if i == j { c + 1e-6 } else { c };
            }
        }
        cholesky_lower(&a)
    }
}

/// Cholesky factor of a symmetric positive definite matrix given by its
/// lower triangle; `None` if a pivot is not positive.
fn cholesky_lower(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let d = a.len();
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDiagnostic {
    pub name: String,
    pub r_hat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub n_chains: usize,
    pub n_draws: usize,
    pub parameters: Vec<ParameterDiagnostic>,
    pub warnings: Vec<String>,
}

impl Diagnostics {
    pub fn r_hat(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.r_hat)
    }

    pub fn ess(&self, name: &str) -> Option<f64> {
        self.parameters.iter().find(|p| p.name == name).map(|p| p.ess)
    }

    pub fn max_r_hat(&self) -> f64 {
        self.parameters.iter().map(|p| p.r_hat).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.parameters.iter().map(|p| p.ess).fold(f64::INFINITY, f64::min)
    }

    pub fn healthy(&self) -> bool {
        self.warnings.is_empty()
    }
}

pub const R_HAT_WARN: f64 = 1.05;
pub const ESS_WARN: f64 = 400.0;

pub fn compute_diagnostics(chains: &[Chain]) -> Result<Diagnostics> {
    if chains.len() < 2 {
        return Err(Error::Config("diagnostics need at least 2 chains".into()));
    }
    let n = chains[0].draws.len();
    for c in chains {
        if c.draws.len() != n {
            return Err(Error::UnequalChains(n, c.draws.len()));
        }
    }
    if n < 100 {
        return Err(Error::InsufficientDraws { needed: 100, got: n });
    }
    let per_chain: Vec<Vec<Vec<f64>>> = chains.iter().map(Chain::columns).collect();
    let names = &chains[0].names;
    let mut parameters = Vec::with_capacity(names.len());
    let mut warnings = Vec::new();
    for (p, name) in names.iter().enumerate() {
        let cols: Vec<&[f64]> = per_chain.iter().map(|c| c[p].as_slice()).collect();
        let (r_hat, ess) = if cols.iter().all(|c| has_zero_variance(c)) && all_equal_means(&cols) {
            warnings.push(format!("{name}: zero variance"));
            (1.0, (chains.len() * n) as f64)
        } else {
            let r = split_r_hat(&cols);
            let e = effective_sample_size(&split_halves(&cols));
            if !r.is_finite() {
                warnings.push(format!("{name}: zero within-chain variance"));
            }
            (r, e)
        };
        if r_hat > R_HAT_WARN {
            warnings.push(format!("{name}: R-hat {r_hat:.3} > {R_HAT_WARN}"));
        }
        if ess < ESS_WARN {
            warnings.push(format!("{name}: ESS {ess:.0} < {ESS_WARN}"));
        }
        parameters.push(ParameterDiagnostic {
            name: name.clone(),
            r_hat,
            ess,
        });
    }
    Ok(Diagnostics {
        n_chains: chains.len(),
        n_draws: n,
        parameters,
        warnings,
    })
}

fn has_zero_variance(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn all_equal_means(cols: &[&[f64]]) -> bool {
    cols.iter().all(|c| c[0] == cols[0][0])
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn split_halves<'b>(chains: &[&'b [f64]]) -> Vec<&'b [f64]> {
    let half = chains[0].len() / 2;
    chains
        .iter()
        .flat_map(|c| [&c[..half], &c[c.len() - half..]])
        .collect()
}

/// Plain split-R̂: each chain is halved, then the classic between/within
/// variance ratio is taken over the halves.
pub fn split_r_hat(chains: &[&[f64]]) -> f64 {
    let halves = split_halves(chains);
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| sample_variance(h)).sum::<f64>() / halves.len() as f64;
    let b = n * sample_variance(&means);
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Biased autocovariance at every lag, computed with an FFT.
pub fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .map(|&v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter()
        .take(n)
        .map(|c| c.re / (len as f64 * n as f64))
        .collect()
}

/// Multi-chain ESS with Geyer's initial monotone sequence truncation,
/// capped at the total number of draws.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let total = (m * n) as f64;
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let chain_means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    let mean_var = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).sum::<f64>() / m as f64;
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_variance(&chain_means);
    }
    if var_plus <= 0.0 {
        return total;
    }
    let rho_at = |t: usize| -> f64 {
        let avg = acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
        1.0 - (mean_var - avg) / var_plus
    };
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho_at(1);
    rho[1] = odd;
    let mut t = 1;
    while t + 4 < n && even + odd > 0.0 {
        even = rho_at(t + 1);
        odd = rho_at(t + 2);
        if even + odd >= 0.0 {
            rho[t + 1] = even;
            rho[t + 2] = odd;
        }
        t += 2;
    }
    let max_t = t;
    if even > 0.0 && max_t + 1 < n {
        rho[max_t + 1] = even;
    }
    let mut t = 1;
    while t + 4 <= max_t {
        let prev = rho[t - 1] + rho[t];
        if rho[t + 1] + rho[t + 2] > prev {
            rho[t + 1] = prev / 2.0;
            rho[t + 2] = prev / 2.0;
        }
        t += 2;
    }
    let tail = if max_t + 1 < n { rho[max_t + 1] } else { 0.0 };
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + tail).max(1.0 / total.log10());
    (total / tau).min(total)
}

/// Writes one chain as CSV: a header of parameter names, one row per draw.
pub fn write_chain_csv<W: Write>(writer: W, chain: &Chain) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&chain.names)?;
    for d in &chain.draws {
        w.write_record(d.flatten().iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<chain csv>", e))?;
    Ok(())
}

/// Reads draws written by [`write_chain_csv`]; the header must match the
/// model's parameter names.
pub fn read_chain_csv<R: Read>(reader: R, model: &Model) -> Result<Chain> {
    let mut rdr = csv::Reader::from_reader(reader);
    let names = model.parameter_names();
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != names {
        return Err(Error::ChainFile("header does not match the model parameters".into()));
    }
    let mut draws = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let values = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::ChainFile(format!("row {}: {e}", i + 1)))?;
        draws.push(model.unflatten(&values)?);
    }
    Ok(Chain {
        names,
        draws,
        accept_rates: BTreeMap::new(),
        warmup_log_scales: Vec::new(),
        log_scales: Vec::new(),
        block_accept_rate: None,
        block_log_scale: None,
        rng_state: ChaCha8Rng::seed_from_u64(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn synthetic_chain(values: Vec<f64>) -> Chain {
        Chain {
            names: vec!["rho".into()],
            draws: values
                .into_iter()
                .map(|v| ParameterState {
                    leaf_mu_m: vec![],
                    leaf_mu_r: vec![],
                    sigma_m: vec![],
                    sigma_r: vec![],
                    rho: v,
                    latent_log_r: vec![],
                })
                .collect(),
            accept_rates: BTreeMap::new(),
            warmup_log_scales: vec![],
            log_scales: vec![],
            block_accept_rate: None,
            block_log_scale: None,
            rng_state: ChaCha8Rng::seed_from_u64(0),
        }
    }

    fn iid_chains(n_chains: usize, n: usize, seed: u64) -> Vec<Chain> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n_chains)
            .map(|_| synthetic_chain((0..n).map(|_| normal.sample(&mut rng)).collect()))
            .collect()
    }

    #[test]
    fn cholesky_reproduces_matrix() {
        let a = vec![vec![4.0, 0.0, 0.0], vec![2.0, 5.0, 0.0], vec![-1.0, 1.5, 3.0]];
        let l = cholesky_lower(&a).unwrap();
        for i in 0..3 {
            for j in 0..=i {
                let v: f64 = (0..=j).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-12);
            }
        }
        assert!(cholesky_lower(&[vec![1.0, 0.0], vec![2.0, 1.0]]).is_none());
    }

    #[test]
    fn iid_draws_are_healthy() {
        let chains = iid_chains(4, 2500, 9);
        let d = compute_diagnostics(&chains).unwrap();
        let r = d.r_hat("rho").unwrap();
        assert!((1.0 - 1e-3..=1.01).contains(&r), "R-hat {r}");
        let ess = d.ess("rho").unwrap();
        assert!((ess - 10_000.0).abs() <= 2000.0, "ESS {ess}");
    }

    #[test]
    fn offset_chain_inflates_r_hat() {
        let mut chains = iid_chains(4, 1000, 10);
        for d in &mut chains[3].draws {
            d.rho += 10.0;
        }
        let d = compute_diagnostics(&chains).unwrap();
        assert!(d.r_hat("rho").unwrap() > 2.0);
        assert!(!d.healthy());
    }

    #[test]
    fn constant_chains_warn_instead_of_nan() {
        let chains = vec![synthetic_chain(vec![0.5; 200]), synthetic_chain(vec![0.5; 200])];
        let d = compute_diagnostics(&chains).unwrap();
        assert!(d.warnings.iter().any(|w| w.contains("zero variance")));
        assert!(!d.r_hat("rho").unwrap().is_nan());
        assert!(!d.ess("rho").unwrap().is_nan());
    }

    #[test]
    fn unequal_or_short_chains_are_rejected() {
        let chains = vec![synthetic_chain(vec![0.1; 200]), synthetic_chain(vec![0.1; 150])];
        assert!(matches!(compute_diagnostics(&chains), Err(Error::UnequalChains(200, 150))));
        let chains = vec![synthetic_chain(vec![0.1; 50]), synthetic_chain(vec![0.1; 50])];
        assert!(matches!(compute_diagnostics(&chains), Err(Error::InsufficientDraws { .. })));
    }

    #[test]
    fn autocorrelated_draws_have_reduced_ess() {
        // AR(1) with phi = 0.9: integrated autocorrelation time 19
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..20_000)
                    .map(|_| {
                        x = 0.9 * x + normal.sample(&mut rng);
                        x
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = chains.iter().map(Vec::as_slice).collect();
        let ess = effective_sample_size(&refs);
        let expected = 80_000.0 / 19.0;
        assert!((ess / expected - 1.0).abs() < 0.2, "ESS {ess} vs {expected}");
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = [1.0, 3.0, -2.0, 0.5, 4.0, 2.0];
        let m = mean(&x);
        let ac = autocovariance(&x);
        for lag in 0..x.len() {
            let direct: f64 = (0..x.len() - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / x.len() as f64;
            assert!((ac[lag] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_chains = 1;
        assert!(cfg.validate().is_err());
        let cfg = SamplerConfig {
            target_accept: 0.95,
            ..SamplerConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
