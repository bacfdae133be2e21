use std::fs;
use std::path::{Path, PathBuf};

use richness_core::dataset::CANONICAL_CSV;
use richness_core::hierarchy::{parse_hierarchy, CANONICAL_HIERARCHY};
use richness_core::sampler::{read_chain_csv, write_chain_csv};
use richness_core::timeslice::run_timeslices_at_level;
use richness_core::{
    compute_diagnostics, summarize, validate_hierarchy, Dataset, Diagnostics, Hierarchy, HierarchySpec, Model,
    PosteriorSummary,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Failure;

/// Completed run; `healthy` is false when convergence diagnostics warn.
pub struct Completed {
    pub healthy: bool,
}

struct Inputs {
    dataset: Dataset,
    spec: HierarchySpec,
    data_sha256: String,
    hierarchy_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_input(path: &Option<PathBuf>, bundled: &str, what: &str) -> Result<Vec<u8>, Failure> {
    match path {
        None => Ok(bundled.as_bytes().to_vec()),
        Some(p) => fs::read(p).map_err(|e| Failure::config(format!("cannot read {what} file {}: {e}", p.display()))),
    }
}

fn load_text_inputs(cfg: &RunConfig) -> Result<(Vec<u8>, Vec<u8>), Failure> {
    Ok((
        read_input(&cfg.data, CANONICAL_CSV, "data")?,
        read_input(&cfg.hierarchy, CANONICAL_HIERARCHY, "hierarchy")?,
    ))
}

fn parse_spec(bytes: &[u8]) -> Result<HierarchySpec, Failure> {
    let text = std::str::from_utf8(bytes).map_err(|e| Failure::validation(format!("hierarchy file: {e}")))?;
    parse_hierarchy(text).map_err(|e| Failure::validation(e.to_string()))
}

/// Problems that stop a fit: hierarchy violations and data in categories
/// the hierarchy does not observe.
fn consistency_violations(ds: &Dataset, spec: &HierarchySpec) -> Vec<String> {
    let mut v = validate_hierarchy(spec).violations;
    let mut seen = std::collections::BTreeSet::new();
    for d in &ds.symbolic {
        if !spec.observed.contains(&d.category) && seen.insert(d.category.clone()) {
            v.push(format!("category `{}` has data but is not an observed category", d.category));
        }
    }
    v
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs, Failure> {
    let (data, tree) = load_text_inputs(cfg)?;
    let dataset = Dataset::from_csv_reader(&data[..]).map_err(|e| Failure::validation(e.to_string()))?;
    let spec = parse_spec(&tree)?;
    let violations = consistency_violations(&dataset, &spec);
    if !violations.is_empty() {
        return Err(Failure::validation(violations.join("\n")));
    }
    Ok(Inputs {
        dataset,
        spec,
        data_sha256: sha256_hex(&data),
        hierarchy_sha256: sha256_hex(&tree),
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("cannot create output directory {}: {e}", dir.display())))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Failure::hard(format!("cannot write {}: {e}", path.display())))
}

fn render<F>(f: F) -> Result<Vec<u8>, Failure>
where
    F: FnOnce(&mut Vec<u8>) -> richness_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(Failure::from_core)?;
    Ok(buf)
}

fn json_bytes(value: &impl serde::Serialize) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Failure::hard(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_manifest(cfg: &RunConfig, command: &str, inputs: Option<&Inputs>, outputs: &[String]) -> Result<(), Failure> {
    let path_label = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "<bundled>".into());
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.sampler.seed,
        "config": {
            "data": path_label(&cfg.data),
            "hierarchy": path_label(&cfg.hierarchy),
            "out": cfg.out.display().to_string(),
            "sampler": cfg.sampler,
            "cuts": cfg.cuts,
            "hpd_level": cfg.hpd_level,
        },
        "dataset_sha256": inputs.map(|i| Value::from(i.data_sha256.clone())).unwrap_or(Value::Null),
        "hierarchy_sha256": inputs.map(|i| Value::from(i.hierarchy_sha256.clone())).unwrap_or(Value::Null),
        "outputs": outputs,
        "created_unix": created,
    });
    write_file(&cfg.out, "manifest.json", &json_bytes(&manifest)?)
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

/// Writes the summary tables and diagnostics shared by `fit` and `summarize`.
fn write_summary_files(
    dir: &Path,
    summary: &PosteriorSummary,
    diagnostics: &Diagnostics,
    outputs: &mut Vec<String>,
) -> Result<(), Failure> {
    let files = [
        ("summary.csv", render(|b| summary.write_csv(b))?),
        ("summary.json", render(|b| summary.write_json(&mut *b))?),
        ("predicted_intervals.csv", render(|b| summary.write_predicted_csv(b))?),
        ("diagnostics.json", json_bytes(diagnostics)?),
    ];
    for (name, bytes) in files {
        write_file(dir, name, &bytes)?;
        outputs.push(name.to_string());
    }
    Ok(())
}

pub fn fit(cfg: &RunConfig) -> Result<Completed, Failure> {
    let inputs = load_inputs(cfg)?;
    ensure_dir(&cfg.out)?;
    let fit = richness_core::fit(&inputs.dataset, &inputs.spec, &cfg.sampler, cfg.hpd_level).map_err(Failure::from_core)?;

    let mut outputs = Vec::new();
    for (k, chain) in fit.chains.iter().enumerate() {
        let name = format!("chain_{k}.csv");
        write_file(&cfg.out, &name, &render(|b| write_chain_csv(b, chain))?)?;
        outputs.push(name);
    }
    write_summary_files(&cfg.out, &fit.summary, &fit.diagnostics, &mut outputs)?;
    write_manifest(cfg, "fit", Some(&inputs), &outputs)?;

    report_warnings(&fit.diagnostics.warnings);
    println!(
        "fitted {} observations with {} chains x {} draws; max R-hat {:.4}, min ESS {:.0}; outputs in {}",
        inputs.dataset.symbolic.len(),
        cfg.sampler.n_chains,
        fit.diagnostics.n_draws,
        fit.diagnostics.max_r_hat(),
        fit.diagnostics.min_ess(),
        cfg.out.display()
    );
    Ok(Completed {
        healthy: fit.diagnostics.healthy(),
    })
}

pub fn timeslice(cfg: &RunConfig) -> Result<Completed, Failure> {
    let inputs = load_inputs(cfg)?;
    ensure_dir(&cfg.out)?;
    let result = run_timeslices_at_level(&inputs.dataset, &inputs.spec, &cfg.sampler, &cfg.cuts, cfg.hpd_level)
        .map_err(Failure::from_core)?;

    let mut outputs = Vec::new();
    write_file(&cfg.out, "timeslice.csv", &render(|b| result.write_csv(b))?)?;
    outputs.push("timeslice.csv".to_string());
    for (stem, bytes) in result.panels().map_err(Failure::from_core)? {
        let name = format!("{stem}.csv");
        write_file(&cfg.out, &name, &bytes)?;
        outputs.push(name);
    }
    let per_period: serde_json::Map<String, Value> = result
        .periods
        .iter()
        .map(|p| {
            let value = json!({
                "seed": p.seed,
                "n_obs": p.n_obs,
                "counts": p.counts,
                "warnings": p.warnings,
                "diagnostics": p.diagnostics,
            });
            (p.end_year.to_string(), value)
        })
        .collect();
    write_file(&cfg.out, "diagnostics.json", &json_bytes(&per_period)?)?;
    outputs.push("diagnostics.json".to_string());
    write_manifest(cfg, "timeslice", Some(&inputs), &outputs)?;

    let mut healthy = true;
    for p in &result.periods {
        report_warnings(&p.warnings);
        let tagged: Vec<String> = p.diagnostics.warnings.iter().map(|w| format!("{}: {w}", p.end_year)).collect();
        report_warnings(&tagged);
        healthy &= p.diagnostics.healthy();
        println!("period ending {}: {} observations", p.end_year, p.n_obs);
    }
    Ok(Completed { healthy })
}

pub fn validate(cfg: &RunConfig) -> Result<Completed, Failure> {
    let (data, tree) = load_text_inputs(cfg)?;
    let dataset = Dataset::from_csv_reader(&data[..]).map_err(|e| Failure::validation(e.to_string()))?;
    let spec = parse_spec(&tree)?;
    let modelled = dataset.len();
    println!(
        "{} rows, {} excluded, {} modelled, {} missing ranges",
        dataset.observations.len(),
        dataset.n_excluded(),
        modelled,
        dataset.n_missing_log_r()
    );
    println!(
        "hierarchy: {} categories, {} leaves, {} observed",
        spec.categories.len(),
        spec.leaf_set().len(),
        spec.observed.len()
    );
    let violations = consistency_violations(&dataset, &spec);
    if cfg.out_given {
        ensure_dir(&cfg.out)?;
        let inputs = Inputs {
            dataset,
            spec,
            data_sha256: sha256_hex(&data),
            hierarchy_sha256: sha256_hex(&tree),
        };
        write_manifest(cfg, "validate", Some(&inputs), &[])?;
    }
    if violations.is_empty() {
        println!("no violations");
        Ok(Completed { healthy: true })
    } else {
        Err(Failure::validation(violations.join("\n")))
    }
}

pub fn summarize_chains(cfg: &RunConfig) -> Result<Completed, Failure> {
    let inputs = load_inputs(cfg)?;
    let model = Model::new(
        &inputs.dataset,
        Hierarchy::new(&inputs.spec).map_err(|e| Failure::validation(e.to_string()))?,
    )
    .map_err(|e| Failure::validation(e.to_string()))?;
    let mut chains = Vec::new();
    loop {
        let path = cfg.out.join(format!("chain_{}.csv", chains.len()));
        if !path.exists() {
            break;
        }
        let file = fs::File::open(&path).map_err(|e| Failure::hard(format!("cannot open {}: {e}", path.display())))?;
        let chain = read_chain_csv(file, &model).map_err(|e| Failure::hard(format!("{}: {e}", path.display())))?;
        chains.push(chain);
    }
    if chains.len() < 2 {
        return Err(Failure::config(format!(
            "{} holds {} chain file(s); at least chain_0.csv and chain_1.csv are needed",
            cfg.out.display(),
            chains.len()
        )));
    }
    let diagnostics = compute_diagnostics(&chains).map_err(Failure::from_core)?;
    let summary = summarize(&chains, &model, cfg.hpd_level).map_err(Failure::from_core)?;
    let mut outputs = Vec::new();
    write_summary_files(&cfg.out, &summary, &diagnostics, &mut outputs)?;
    write_manifest(cfg, "summarize", Some(&inputs), &outputs)?;
    report_warnings(&diagnostics.warnings);
    println!("summarised {} chains x {} draws", chains.len(), diagnostics.n_draws);
    Ok(Completed {
        healthy: diagnostics.healthy(),
    })
}
