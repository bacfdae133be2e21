//! The category tree and the deterministic map from free leaf means to the
//! means of every category.
//!
//! Only leaves carry free mean parameters. A parent's midpoint mean is the
//! sum of its children's, and its range is the sum of its children's ranges,
//! so `mu_r(parent) = log Σ exp(mu_r(child))`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// The canonical tree as shipped in `data/hierarchy.txt`.
pub const CANONICAL_HIERARCHY: &str = include_str!("../../../data/hierarchy.txt");

/// Raw, possibly invalid, description of a category tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HierarchySpec {
    pub categories: Vec<String>,
    pub children: BTreeMap<String, Vec<String>>,
    pub observed: BTreeSet<String>,
}

impl HierarchySpec {
    pub fn canonical() -> Self {
        parse_hierarchy(CANONICAL_HIERARCHY).expect("bundled hierarchy parses")
    }

    /// A one-node tree: the category is both the only leaf and observed.
    pub fn single(category: &str) -> Self {
        HierarchySpec {
            categories: vec![category.to_string()],
            children: BTreeMap::new(),
            observed: [category.to_string()].into_iter().collect(),
        }
    }

    pub fn leaf_set(&self) -> BTreeSet<&str> {
        self.categories
            .iter()
            .filter(|c| !self.children.contains_key(*c))
            .map(String::as_str)
            .collect()
    }

    pub fn parent_set(&self) -> BTreeSet<&str> {
        self.children.keys().map(String::as_str).collect()
    }
}

/// Parses the line-oriented hierarchy format:
///
/// ```text
/// category <name> [observed]
/// children <parent>: <child> <child> ...
/// ```
///
/// `#` starts a comment.
pub fn parse_hierarchy(text: &str) -> Result<HierarchySpec> {
    let mut spec = HierarchySpec {
        categories: Vec::new(),
        children: BTreeMap::new(),
        observed: BTreeSet::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| Error::HierarchyParse {
            line: line_no,
            message: message.to_string(),
        };
        let (keyword, rest) = line.split_once(char::is_whitespace).ok_or_else(|| err("missing arguments"))?;
        match keyword {
            "category" => {
                let mut words = rest.split_whitespace();
                let name = words.next().ok_or_else(|| err("missing category name"))?;
                match words.next() {
                    None => {}
                    Some("observed") => {
                        spec.observed.insert(name.to_string());
                    }
                    Some(other) => return Err(err(&format!("unexpected `{other}`"))),
                }
                if words.next().is_some() {
                    return Err(err("trailing tokens"));
                }
                spec.categories.push(name.to_string());
            }
            "children" => {
                let (parent, kids) = rest.split_once(':').ok_or_else(|| err("expected `parent: children`"))?;
                let parent = parent.trim();
                if parent.is_empty() {
                    return Err(err("missing parent name"));
                }
                let kids: Vec<String> = kids.split_whitespace().map(str::to_string).collect();
                if spec.children.insert(parent.to_string(), kids).is_some() {
                    return Err(err(&format!("children of `{parent}` listed twice")));
                }
            }
            other => return Err(err(&format!("unknown keyword `{other}`"))),
        }
    }
    Ok(spec)
}

pub fn load_hierarchy(path: impl AsRef<Path>) -> Result<HierarchySpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hierarchy(&text)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HierarchyReport {
    pub violations: Vec<String>,
}

impl HierarchyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks tree shape, residual "other" children, and the leaf/observed
/// partitions; collects every violation rather than stopping at the first.
pub fn validate_hierarchy(spec: &HierarchySpec) -> HierarchyReport {
    let mut v = Vec::new();
    let declared: BTreeSet<&str> = spec.categories.iter().map(String::as_str).collect();
    if declared.len() != spec.categories.len() {
        v.push("duplicate category declaration".to_string());
    }
    if spec.categories.is_empty() {
        v.push("no categories".to_string());
    }

    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for (parent, kids) in &spec.children {
        if !declared.contains(parent.as_str()) {
            v.push(format!("unknown category `{parent}`"));
        }
        if kids.len() < 2 {
            v.push(format!("`{parent}` has fewer than 2 children"));
        }
        for kid in kids {
            if !declared.contains(kid.as_str()) {
                v.push(format!("unknown category `{kid}`"));
            }
            if let Some(prev) = parent_of.insert(kid.as_str(), parent.as_str()) {
                v.push(format!("`{kid}` has multiple parents (`{prev}`, `{parent}`)"));
            }
        }
        let residual = format!("other_{parent}");
        if !kids.contains(&residual) {
            v.push(format!("{parent} children do not cover (missing `{residual}`)"));
        } else if spec.observed.contains(&residual) {
            v.push(format!("residual `{residual}` must not be observed"));
        }
    }

    let roots: Vec<&str> = spec
        .categories
        .iter()
        .map(String::as_str)
        .filter(|c| !parent_of.contains_key(c))
        .collect();
    if roots.len() != 1 {
        v.push(format!("not a tree: {} roots {:?}", roots.len(), roots));
    }
    // Anything not reachable by walking up to a root sits on a cycle.
    for c in &spec.categories {
        let mut cur = c.as_str();
        let mut steps = 0;
        while let Some(p) = parent_of.get(cur) {
            cur = p;
            steps += 1;
            if steps > spec.categories.len() {
                v.push(format!("not a tree: cycle through `{c}`"));
                break;
            }
        }
    }

    if spec.observed.is_empty() {
        v.push("no observed categories".to_string());
    }
    for o in &spec.observed {
        if !declared.contains(o.as_str()) {
            v.push(format!("observed category `{o}` is not declared"));
        }
    }
    v.dedup();
    HierarchyReport { violations: v }
}

/// A validated hierarchy in index form.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    leaves: Vec<usize>,
    /// Parents ordered so every child precedes its parent.
    parents_bottom_up: Vec<usize>,
    observed: Vec<usize>,
    /// Position of each category in `leaves`, if it is a leaf.
    leaf_slot: Vec<Option<usize>>,
    /// Position of each category in `observed`, if it is observed.
    observed_slot: Vec<Option<usize>>,
}

impl Hierarchy {
    pub fn new(spec: &HierarchySpec) -> Result<Self> {
        let report = validate_hierarchy(spec);
        if !report.is_ok() {
            return Err(Error::InvalidHierarchy(report.violations));
        }
        let names = spec.categories.clone();
        let index: HashMap<String, usize> =
            names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let n = names.len();
        let mut children = vec![Vec::new(); n];
        let mut parent = vec![None; n];
        for (p, kids) in &spec.children {
            let pi = index[p];
            for k in kids {
                let ki = index[k];
                children[pi].push(ki);
                parent[ki] = Some(pi);
            }
        }
        let leaves: Vec<usize> = (0..n).filter(|&i| children[i].is_empty()).collect();
        let root = (0..n).find(|&i| parent[i].is_none()).expect("validated tree has a root");
        let mut parents_bottom_up = Vec::new();
        post_order(root, &children, &mut parents_bottom_up);
        let observed: Vec<usize> = names
            .iter()
            .enumerate()
            .filter(|(_, name)| spec.observed.contains(*name))
            .map(|(i, _)| i)
            .collect();
        let mut leaf_slot = vec![None; n];
        for (slot, &c) in leaves.iter().enumerate() {
            leaf_slot[c] = Some(slot);
        }
        let mut observed_slot = vec![None; n];
        for (slot, &c) in observed.iter().enumerate() {
            observed_slot[c] = Some(slot);
        }
        Ok(Hierarchy {
            names,
            index,
            children,
            parent,
            leaves,
            parents_bottom_up,
            observed,
            leaf_slot,
            observed_slot,
        })
    }

    pub fn canonical() -> Self {
        Self::new(&HierarchySpec::canonical()).expect("bundled hierarchy is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn parents_bottom_up(&self) -> &[usize] {
        &self.parents_bottom_up
    }

    pub fn leaf_slot(&self, idx: usize) -> Option<usize> {
        self.leaf_slot[idx]
    }

    pub fn observed_slot(&self, idx: usize) -> Option<usize> {
        self.observed_slot[idx]
    }

    /// The category itself followed by its ancestors up to the root.
    pub fn ancestors_inclusive(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        std::iter::successors(Some(idx), move |&c| self.parent[c])
    }

    /// Derives the mean parameters of every category from leaf values given
    /// in [`Hierarchy::leaves`] order.
    pub fn derive_means(&self, leaf_mu_m: &[f64], leaf_mu_r: &[f64]) -> Result<MeanParams> {
        if leaf_mu_m.len() != self.leaves.len() || leaf_mu_r.len() != self.leaves.len() {
            return Err(Error::NonFinite(format!(
                "expected {} leaf values",
                self.leaves.len()
            )));
        }
        if let Some(x) = leaf_mu_m.iter().chain(leaf_mu_r).find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("leaf mean {x}")));
        }
        let mut out = MeanParams {
            mu_m: vec![0.0; self.len()],
            mu_r: vec![0.0; self.len()],
        };
        self.derive_into(leaf_mu_m, leaf_mu_r, &mut out);
        Ok(out)
    }

    /// Unchecked variant of [`Hierarchy::derive_means`] writing into `out`.
    pub fn derive_into(&self, leaf_mu_m: &[f64], leaf_mu_r: &[f64], out: &mut MeanParams) {
        out.mu_m.resize(self.len(), 0.0);
        out.mu_r.resize(self.len(), 0.0);
        for (slot, &c) in self.leaves.iter().enumerate() {
            out.mu_m[c] = leaf_mu_m[slot];
            out.mu_r[c] = leaf_mu_r[slot];
        }
        for &p in &self.parents_bottom_up {
            let kids = &self.children[p];
            out.mu_m[p] = kids.iter().map(|&k| out.mu_m[k]).sum();
            let mu_r = &out.mu_r;
            out.mu_r[p] = log_sum_exp(kids.iter().map(|&k| mu_r[k]));
        }
    }
}

fn post_order(node: usize, children: &[Vec<usize>], out: &mut Vec<usize>) {
    for &k in &children[node] {
        post_order(k, children, out);
    }
    if !children[node].is_empty() {
        out.push(node);
    }
}

/// Midpoint and log-range means of every category, indexed like
/// [`Hierarchy::names`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeanParams {
    pub mu_m: Vec<f64>,
    pub mu_r: Vec<f64>,
}

impl MeanParams {
    pub fn get(&self, h: &Hierarchy, name: &str) -> Option<(f64, f64)> {
        h.index_of(name).map(|i| (self.mu_m[i], self.mu_r[i]))
    }
}
