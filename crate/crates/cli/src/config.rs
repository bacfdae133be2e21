use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use richness_core::timeslice::DEFAULT_CUTS;
use richness_core::SamplerConfig;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "richness", version, about = "Hierarchical interval meta-analysis of species richness estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the full model and write chains, diagnostics and summaries.
    Fit(RunArgs),
    /// Refit on nested year-bounded subsets of the data.
    Timeslice(RunArgs),
    /// Check the dataset and hierarchy without fitting.
    Validate(RunArgs),
    /// Recompute summaries from chain files left by `fit` in the output directory.
    Summarize(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Timeslice(_) => "timeslice",
            Command::Validate(_) => "validate",
            Command::Summarize(_) => "summarize",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Fit(a) | Command::Timeslice(a) | Command::Validate(a) | Command::Summarize(a) => a,
        }
    }
}

/// Every flag is optional so that a config file can fill it in.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Observation CSV; the bundled dataset is used when omitted.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Hierarchy description; the bundled tree is used when omitted.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// Output directory (input directory for `summarize`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Stored draws per chain.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Comma-separated cut years for `timeslice`.
    #[arg(long, value_delimiter = ',')]
    pub cuts: Option<Vec<i32>>,
    #[arg(long = "hpd-level")]
    pub hpd_level: Option<f64>,
    /// key=value file supplying any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub hierarchy: Option<PathBuf>,
    pub out: PathBuf,
    /// Whether `out` was given explicitly.
    pub out_given: bool,
    pub sampler: SamplerConfig,
    pub cuts: Vec<i32>,
    pub hpd_level: f64,
}

pub const DEFAULT_OUT: &str = "richness-out";

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Failure::config(format!("config key `{key}`: cannot parse `{value}`: {e}")))
}

fn parse_cuts(value: &str) -> Result<Vec<i32>, Failure> {
    value
        .split(',')
        .map(|s| parse_value("cuts", s.trim()))
        .collect()
}

/// Reads `key=value` lines; blank lines and `#` comments are ignored.
pub fn read_config_file(path: &Path) -> Result<RunArgs, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read config file {}: {e}", path.display())))?;
    let mut seen = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Failure::config(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        seen.insert(key.trim().replace('_', "-"), value.trim().to_string());
    }
    let mut args = RunArgs::default();
    for (key, value) in &seen {
        match key.as_str() {
            "data" => args.data = Some(PathBuf::from(value)),
            "hierarchy" => args.hierarchy = Some(PathBuf::from(value)),
            "out" => args.out = Some(PathBuf::from(value)),
            "seed" => args.seed = Some(parse_value(key, value)?),
            "chains" => args.chains = Some(parse_value(key, value)?),
            "warmup" => args.warmup = Some(parse_value(key, value)?),
            "samples" => args.samples = Some(parse_value(key, value)?),
            "thin" => args.thin = Some(parse_value(key, value)?),
            "cuts" => args.cuts = Some(parse_cuts(value)?),
            "hpd-level" => args.hpd_level = Some(parse_value(key, value)?),
            other => return Err(Failure::config(format!("{}: unknown key `{other}`", path.display()))),
        }
    }
    Ok(args)
}

impl RunArgs {
    /// Command-line values win over config-file values, which win over defaults.
    pub fn resolve(&self) -> Result<RunConfig, Failure> {
        let file = match &self.config {
            Some(p) => read_config_file(p)?,
            None => RunArgs::default(),
        };
        let defaults = SamplerConfig::default();
        let out = self.out.clone().or(file.out);
        let sampler = SamplerConfig {
            n_chains: self.chains.or(file.chains).unwrap_or(defaults.n_chains),
            n_warmup: self.warmup.or(file.warmup).unwrap_or(defaults.n_warmup),
            n_samples: self.samples.or(file.samples).unwrap_or(defaults.n_samples),
            thin: self.thin.or(file.thin).unwrap_or(defaults.thin),
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            ..defaults
        };
        sampler.validate().map_err(|e| Failure::config(e.to_string()))?;
        let hpd_level = self.hpd_level.or(file.hpd_level).unwrap_or(0.95);
        if !(hpd_level > 0.0 && hpd_level < 1.0) {
            return Err(Failure::config(format!("--hpd-level must lie in (0, 1), got {hpd_level}")));
        }
        let cuts = self
            .cuts
            .clone()
            .or(file.cuts)
            .unwrap_or_else(|| DEFAULT_CUTS.to_vec());
        if cuts.is_empty() || cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Failure::config(format!("--cuts must be strictly increasing, got {cuts:?}")));
        }
        Ok(RunConfig {
            data: self.data.clone().or(file.data),
            hierarchy: self.hierarchy.clone().or(file.hierarchy),
            out_given: out.is_some(),
            out: out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            sampler,
            cuts,
            hpd_level,
        })
    }
}
