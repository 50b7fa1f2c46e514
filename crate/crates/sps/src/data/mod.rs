//! Dataset ingestion: CSV loading, validation against the benchmark
//! registry, intercept assembly, and the saturated-design supplement used
//! for prior construction.
//!
//! The CSV layout is one observation per row, outcome label first (an
//! integer in `1..=C`), covariates following, no header unless requested.
//! Outcomes must be pre-encoded as integers; no factor encoding happens
//! here, which keeps ingestion bit-exact and auditable.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LogitData;

/// Expected shape and options for one dataset.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    /// Expected observation count; checked after loading when present.
    pub t: Option<usize>,
    /// Expected covariate count (including any auto-added intercept).
    pub k: Option<usize>,
    pub outcomes: usize,
    /// The g value with the highest marginal likelihood for this dataset,
    /// used as the default prior scale.
    pub modal_g: Option<f64>,
    /// Prepend a constant column to the covariates read from the file.
    pub add_intercept: bool,
    /// Supplement the design with indicator rows for empty cells when
    /// building the prior (the likelihood always uses the actual data).
    pub supplement_empty_cell: bool,
}

impl DatasetSpec {
    /// Spec for a user-supplied file with no registry entry: dimensions are
    /// taken from the file itself.
    pub fn ad_hoc(name: &str, outcomes: usize) -> Self {
        Self {
            name: name.to_string(),
            t: None,
            k: None,
            outcomes,
            modal_g: None,
            add_intercept: false,
            supplement_empty_cell: false,
        }
    }

    pub fn with_intercept(mut self) -> Self {
        self.add_intercept = true;
        self
    }
}

#[derive(Deserialize)]
struct RegistryDoc {
    datasets: Vec<RegistryRow>,
}

#[derive(Deserialize)]
struct RegistryRow {
    name: String,
    t: usize,
    k: usize,
    outcomes: usize,
    modal_g: f64,
    add_intercept: bool,
    supplement_empty_cell: bool,
}

/// The benchmark dataset registry: expected dimensions and modal g per
/// dataset name.
pub fn registry() -> Vec<DatasetSpec> {
    let doc: RegistryDoc =
        serde_json::from_str(include_str!("registry.json")).expect("embedded registry parses");
    doc.datasets
        .into_iter()
        .map(|r| DatasetSpec {
            name: r.name,
            t: Some(r.t),
            k: Some(r.k),
            outcomes: r.outcomes,
            modal_g: Some(r.modal_g),
            add_intercept: r.add_intercept,
            supplement_empty_cell: r.supplement_empty_cell,
        })
        .collect()
}

/// Look up a registry entry by name (case-sensitive).
pub fn registry_lookup(name: &str) -> Option<DatasetSpec> {
    registry().into_iter().find(|d| d.name == name)
}

/// CSV loading options.
#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Skip one header line.
    pub header: bool,
}

/// Load and validate a CSV file against a dataset spec.
///
/// Row format: `label, x_1, …, x_k` with the label an integer in
/// `1..=outcomes`. Errors carry the 1-based row number of the offending
/// line. Loading is deterministic and order-preserving.
pub fn load_csv(path: &Path, spec: &DatasetSpec, options: LoadOptions) -> Result<LogitData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.header)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;

    let mut labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut file_columns: Option<usize> = None;

    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Data(format!("row {row}: {e}")))?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue; // blank line
        }
        if record.len() < 2 {
            return Err(Error::Data(format!(
                "row {row}: need an outcome and at least one covariate, got {} fields",
                record.len()
            )));
        }
        match file_columns {
            None => file_columns = Some(record.len() - 1),
            Some(k) if k != record.len() - 1 => {
                return Err(Error::Data(format!(
                    "row {row}: ragged row with {} covariates, expected {k}",
                    record.len() - 1
                )));
            }
            _ => {}
        }

        let label_raw: f64 = record[0]
            .parse()
            .map_err(|_| Error::Data(format!("row {row}: outcome '{}' is not numeric", &record[0])))?;
        if label_raw.fract() != 0.0 {
            return Err(Error::Data(format!(
                "row {row}: outcome {label_raw} is not an integer label"
            )));
        }
        let label = label_raw as i64;
        if label < 1 || label as usize > spec.outcomes {
            return Err(Error::Data(format!(
                "row {row}: label {label} outside 1..={}",
                spec.outcomes
            )));
        }
        labels.push(label as usize);

        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Data(format!("row {row}: covariate '{field}' is not numeric")))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {row}: non-finite covariate {v}")));
            }
            values.push(v);
        }
    }

    let t = labels.len();
    if t == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let file_k = file_columns.unwrap();
    let k = file_k + usize::from(spec.add_intercept);

    let mut x = DMatrix::zeros(t, k);
    for r in 0..t {
        let mut c = 0;
        if spec.add_intercept {
            x[(r, 0)] = 1.0;
            c = 1;
        }
        for fc in 0..file_k {
            x[(r, c + fc)] = values[r * file_k + fc];
        }
    }

    if let Some(expected_t) = spec.t {
        if t != expected_t {
            return Err(Error::Data(format!(
                "{}: {t} observations but registry '{}' expects {expected_t}",
                path.display(),
                spec.name
            )));
        }
    }
    if let Some(expected_k) = spec.k {
        if k != expected_k {
            return Err(Error::Data(format!(
                "{}: {k} covariates but registry '{}' expects {expected_k}",
                path.display(),
                spec.name
            )));
        }
    }

    LogitData::new(labels, x, spec.outcomes)
}

/// Result of the design supplement.
pub struct SupplementedDesign {
    /// The matrix to use for prior construction.
    pub matrix: DMatrix<f64>,
    /// Number of rows appended (0 when nothing was added).
    pub added_rows: usize,
}

/// Covariate matrix for prior construction, with one indicator row appended
/// per empty cell (all-zero column) when the spec requests it.
///
/// The likelihood always uses the actual data; only the prior sees the
/// supplemented design. With no supplement requested, or no empty cell
/// found, the original matrix is returned (callers may warn on the latter).
pub fn design_supplement(x: &DMatrix<f64>, spec: &DatasetSpec) -> SupplementedDesign {
    if !spec.supplement_empty_cell {
        return SupplementedDesign {
            matrix: x.clone(),
            added_rows: 0,
        };
    }
    let empty_columns: Vec<usize> = (0..x.ncols())
        .filter(|&c| (0..x.nrows()).all(|r| x[(r, c)] == 0.0))
        .collect();
    if empty_columns.is_empty() {
        return SupplementedDesign {
            matrix: x.clone(),
            added_rows: 0,
        };
    }
    let extra = empty_columns.len();
    let mut out = DMatrix::zeros(x.nrows() + extra, x.ncols());
    out.view_mut((0, 0), (x.nrows(), x.ncols())).copy_from(x);
    for (i, &col) in empty_columns.iter().enumerate() {
        out[(x.nrows() + i, col)] = 1.0;
    }
    SupplementedDesign {
        matrix: out,
        added_rows: extra,
    }
}
