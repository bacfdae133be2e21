//! Published richness estimates and their symbolic `(m, log r)` form.
//!
//! All quantities are in millions of species. The canonical data set lives
//! in `data/richness.csv` and is also compiled into the crate, see
//! [`Dataset::canonical`].

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category labels accepted in the CSV.
pub const CATEGORY_LABELS: [&str; 7] = [
    "coral_reefs",
    "marine",
    "arthropods",
    "insects",
    "beetles",
    "global",
    "terrestrial",
];

pub const CSV_HEADER: [&str; 8] = [
    "category", "lower", "point", "upper", "year", "source", "weight", "excluded",
];

/// The canonical dataset as shipped in `data/richness.csv`.
pub const CANONICAL_CSV: &str = include_str!("../../../data/richness.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
}

/// One published estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub category: String,
    pub lower: Option<f64>,
    pub point: Option<f64>,
    pub upper: Option<f64>,
    pub year: i32,
    pub source: String,
    pub weight: f64,
    pub excluded: bool,
}

impl Observation {
    pub fn interval(category: &str, lower: f64, upper: f64, year: i32, source: &str) -> Self {
        Observation {
            category: category.to_string(),
            lower: Some(lower),
            point: None,
            upper: Some(upper),
            year,
            source: source.to_string(),
            weight: 1.0,
            excluded: false,
        }
    }

    pub fn point(category: &str, point: f64, year: i32, source: &str) -> Self {
        Observation {
            category: category.to_string(),
            lower: None,
            point: Some(point),
            upper: None,
            year,
            source: source.to_string(),
            weight: 1.0,
            excluded: false,
        }
    }

    /// Checks the field invariants, returning a message for the first failure.
    pub fn check(&self) -> std::result::Result<(), String> {
        match (self.lower, self.upper) {
            (Some(a), Some(b)) => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err("non-finite interval endpoint".into());
                }
                if a <= 0.0 {
                    return Err("lower bound not positive".into());
                }
                if a >= b {
                    return Err("lower exceeds upper".into());
                }
            }
            (None, None) => {
                if self.point.is_none() {
                    return Err("neither interval nor point estimate present".into());
                }
            }
            _ => return Err("interval needs both lower and upper".into()),
        }
        if let Some(x) = self.point {
            if !(x.is_finite() && x > 0.0) {
                return Err("point estimate not positive".into());
            }
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err("weight outside [0, 1]".into());
        }
        Ok(())
    }
}

/// The `(m, log r)` vector for one estimate; `log_r` is `None` for point-only
/// estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicDatum {
    pub category: String,
    pub source: String,
    pub m: f64,
    pub log_r: Option<f64>,
    pub weight: f64,
    pub year: i32,
}

/// Maps an estimate to its symbolic form. When an interval is present the
/// point estimate is ignored, even if it is off-centre.
pub fn to_symbolic(obs: &Observation) -> SymbolicDatum {
    let (m, log_r) = match (obs.lower, obs.upper) {
        (Some(a), Some(b)) => (0.5 * (a + b), Some((b - a).ln())),
        _ => (
            obs.point.expect("observation without interval has a point estimate"),
            None,
        ),
    };
    SymbolicDatum {
        category: obs.category.clone(),
        source: obs.source.clone(),
        m,
        log_r,
        weight: obs.weight,
        year: obs.year,
    }
}

/// Inverse transform: `(m - exp(log_r)/2, m + exp(log_r)/2)`. Negative lower
/// endpoints are returned unchanged.
pub fn from_symbolic(m: f64, log_r: f64) -> (f64, f64) {
    let half = 0.5 * log_r.exp();
    (m - half, m + half)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub observations: Vec<Observation>,
    pub symbolic: Vec<SymbolicDatum>,
}

impl Dataset {
    /// Builds a data set from validated observations. Excluded rows are kept
    /// in `observations` and dropped from `symbolic`.
    pub fn from_observations(observations: Vec<Observation>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, obs) in observations.iter().enumerate() {
            let row = i + 1;
            if !CATEGORY_LABELS.contains(&obs.category.as_str()) {
                return Err(Error::UnknownCategory {
                    row,
                    label: obs.category.clone(),
                });
            }
            obs.check()
                .map_err(|message| Error::InvalidObservation { row, message })?;
            if !seen.insert(obs.source.as_str()) {
                return Err(Error::InvalidObservation {
                    row,
                    message: format!("duplicate source `{}`", obs.source),
                });
            }
        }
        let symbolic = observations
            .iter()
            .filter(|o| !o.excluded)
            .map(to_symbolic)
            .collect();
        Ok(Dataset {
            observations,
            symbolic,
        })
    }

    /// Builds a data set directly from symbolic data, e.g. synthetic test data.
    pub fn from_symbolic_data(symbolic: Vec<SymbolicDatum>) -> Self {
        Dataset {
            observations: Vec::new(),
            symbolic,
        }
    }

    /// The bundled set of 45 published estimates.
    pub fn canonical() -> Self {
        Self::from_csv_reader(CANONICAL_CSV.as_bytes()).expect("bundled data set is valid")
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::MalformedRow {
                row: 0,
                field: "header",
                message: format!("expected `{}`", CSV_HEADER.join(",")),
            });
        }
        let mut observations = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record?;
            if record.len() != CSV_HEADER.len() {
                return Err(Error::MalformedRow {
                    row,
                    field: "row",
                    message: format!("expected {} fields, got {}", CSV_HEADER.len(), record.len()),
                });
            }
            observations.push(parse_row(row, &record)?);
        }
        Self::from_observations(observations)
    }

    pub fn len(&self) -> usize {
        self.symbolic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbolic.is_empty()
    }

    pub fn n_excluded(&self) -> usize {
        self.observations.iter().filter(|o| o.excluded).count()
    }

    pub fn n_missing_log_r(&self) -> usize {
        self.symbolic.iter().filter(|d| d.log_r.is_none()).count()
    }

    pub fn count_in(&self, category: &str) -> usize {
        self.symbolic.iter().filter(|d| d.category == category).count()
    }

    /// Non-excluded data published in or before `end_year`.
    pub fn slice_by_year(&self, end_year: i32) -> Result<Dataset> {
        let observations: Vec<Observation> = self
            .observations
            .iter()
            .filter(|o| !o.excluded && o.year <= end_year)
            .cloned()
            .collect();
        let symbolic: Vec<SymbolicDatum> = self
            .symbolic
            .iter()
            .filter(|d| d.year <= end_year)
            .cloned()
            .collect();
        if symbolic.is_empty() {
            return Err(Error::EmptySlice { end_year });
        }
        Ok(Dataset {
            observations,
            symbolic,
        })
    }

    /// Copy with every likelihood weight replaced.
    pub fn with_weight(&self, weight: f64) -> Dataset {
        let mut out = self.clone();
        for o in &mut out.observations {
            o.weight = weight;
        }
        for d in &mut out.symbolic {
            d.weight = weight;
        }
        out
    }

    pub fn restricted_to(&self, category: &str) -> Dataset {
        Dataset {
            observations: self
                .observations
                .iter()
                .filter(|o| o.category == category)
                .cloned()
                .collect(),
            symbolic: self
                .symbolic
                .iter()
                .filter(|d| d.category == category)
                .cloned()
                .collect(),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let path = path.as_ref();
    match format {
        DataFormat::Csv => {
            let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
            Dataset::from_csv_reader(file)
        }
    }
}

fn parse_row(row: usize, record: &csv::StringRecord) -> Result<Observation> {
    let opt_f64 = |idx: usize, field: &'static str| -> Result<Option<f64>> {
        let s = &record[idx];
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>().map(Some).map_err(|e| Error::MalformedRow {
            row,
            field,
            message: e.to_string(),
        })
    };
    let category = record[0].to_string();
    if !CATEGORY_LABELS.contains(&category.as_str()) {
        return Err(Error::UnknownCategory {
            row,
            label: category,
        });
    }
    let year = record[4].parse::<i32>().map_err(|e| Error::MalformedRow {
        row,
        field: "year",
        message: e.to_string(),
    })?;
    let source = record[5].to_string();
    if source.is_empty() {
        return Err(Error::MalformedRow {
            row,
            field: "source",
            message: "empty".into(),
        });
    }
    let weight = opt_f64(6, "weight")?.unwrap_or(1.0);
    let excluded = match &record[7] {
        "" | "false" | "0" => false,
        "true" | "1" => true,
        other => {
            return Err(Error::MalformedRow {
                row,
                field: "excluded",
                message: format!("expected true/false, got `{other}`"),
            })
        }
    };
    let obs = Observation {
        category,
        lower: opt_f64(1, "lower")?,
        point: opt_f64(2, "point")?,
        upper: opt_f64(3, "upper")?,
        year,
        source,
        weight,
        excluded,
    };
    obs.check()
        .map_err(|message| Error::InvalidObservation { row, message })?;
    Ok(obs)
}
