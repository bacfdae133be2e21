//! Constrained Bayesian hierarchical meta-analysis of published species
//! richness estimates.
//!
//! Published estimates come as intervals `(a, b)`, point estimates `x`, or
//! both. Every estimate is mapped to the symbolic vector `(m, log r)` with
//! `m = (a + b) / 2` and `r = b - a`; point estimates carry a missing log
//! range that is sampled as a latent variable. The per-category means are
//! tied together by a category tree in which every parent is the exact sum
//! of its children, and the joint posterior is explored with an adaptive
//! component-wise Metropolis-within-Gibbs sampler.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] ingests and transforms the estimates,
//! * [`hierarchy`] encodes the category tree and derives parent means,
//! * [`model`] evaluates priors, likelihood and latent conditionals,
//! * [`sampler`] runs chains and convergence diagnostics,
//! * [`posterior`] turns draws into reported summaries,
//! * [`timeslice`] refits nested year-bounded datasets,
//! * [`oracle`] holds brute-force quadrature references for validation.

pub mod dataset;
pub mod error;
pub mod hierarchy;
pub mod math;
pub mod model;
pub mod oracle;
pub mod posterior;
pub mod sampler;
pub mod timeslice;

pub use dataset::{from_symbolic, to_symbolic, Dataset, Observation, SymbolicDatum};
pub use error::{Error, Result};
pub use hierarchy::{validate_hierarchy, Hierarchy, HierarchyReport, HierarchySpec, MeanParams};
pub use model::{LogDensity, Model, ParameterState};
pub use posterior::{fit, fit_single_category, hpd_interval, summarize, Fit, PosteriorSummary};
pub use sampler::{compute_diagnostics, run_mcmc, Chain, Diagnostics, SamplerConfig};
pub use timeslice::{run_timeslices, TimesliceResult};
