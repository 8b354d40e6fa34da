//! Factor schemas, datasets and CSV ingestion.
//!
//! A [`Dataset`] holds one response column and one column of level indices per
//! factor. It is the single source of truth for level counts; everything
//! downstream (designs, weights, folds) reads counts from here.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measurement scale of a categorical predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Nominal,
    Ordinal,
    Binary,
}

impl Scale {
    /// Binary factors are penalized exactly like nominal ones (with one free level).
    pub fn is_ordinal(self) -> bool {
        matches!(self, Scale::Ordinal)
    }
}

/// Metadata of one categorical predictor. Level 0 is the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSchema {
    pub name: String,
    pub scale: Scale,
    pub levels: Vec<String>,
    /// Distance of each level to a spatial center (km), used by spatial weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_coords: Option<Vec<f64>>,
}

impl FactorSchema {
    pub fn new(name: impl Into<String>, scale: Scale, levels: Vec<String>) -> Self {
        FactorSchema {
            name: name.into(),
            scale,
            levels,
            spatial_coords: None,
        }
    }

    /// Schema whose levels are labelled `0..num_levels`.
    pub fn numbered(name: impl Into<String>, scale: Scale, num_levels: usize) -> Self {
        Self::new(name, scale, (0..num_levels).map(|i| i.to_string()).collect())
    }

    /// Number of free (non-reference) levels, `k`.
    pub fn k(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidSchema("factor with empty name".into()));
        }
        if self.levels.len() < 2 {
            return Err(Error::DegenerateFactor(self.name.clone()));
        }
        if self.scale == Scale::Binary && self.levels.len() != 2 {
            return Err(Error::InvalidSchema(format!(
                "binary factor `{}` must have exactly 2 levels, has {}",
                self.name,
                self.levels.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &self.levels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "factor `{}` repeats level `{}`",
                    self.name, label
                )));
            }
        }
        if let Some(coords) = &self.spatial_coords {
            if coords.len() != self.levels.len() {
                return Err(Error::InvalidSchema(format!(
                    "factor `{}` has {} spatial coordinates for {} levels",
                    self.name,
                    coords.len(),
                    self.levels.len()
                )));
            }
            if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::InvalidSchema(format!(
                    "factor `{}` has a negative or non-finite spatial coordinate",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Parse a JSON schema document: an array of factor descriptions.
pub fn parse_schema(json: &str) -> Result<Vec<FactorSchema>> {
    let schemas: Vec<FactorSchema> = serde_json::from_str(json)?;
    validate_schemas(&schemas)?;
    Ok(schemas)
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<Vec<FactorSchema>> {
    parse_schema(&std::fs::read_to_string(path)?)
}

fn validate_schemas(schemas: &[FactorSchema]) -> Result<()> {
    let mut names = std::collections::HashSet::new();
    for s in schemas {
        s.validate()?;
        if !names.insert(s.name.as_str()) {
            return Err(Error::InvalidSchema(format!("duplicate factor `{}`", s.name)));
        }
    }
    Ok(())
}

/// Response plus per-observation factor levels. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schemas: Vec<FactorSchema>,
    y: Vec<f64>,
    /// `codes[l][obs]` is the level index of observation `obs` on factor `l`.
    codes: Vec<Vec<usize>>,
    counts: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(schemas: Vec<FactorSchema>, y: Vec<f64>, codes: Vec<Vec<usize>>) -> Result<Self> {
        validate_schemas(&schemas)?;
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumericResponse(i + 1));
        }
        if codes.len() != schemas.len() {
            return Err(Error::InvalidDataset(format!(
                "{} code columns for {} factors",
                codes.len(),
                schemas.len()
            )));
        }
        let mut counts = Vec::with_capacity(schemas.len());
        for (schema, col) in schemas.iter().zip(&codes) {
            if col.len() != y.len() {
                return Err(Error::InvalidDataset(format!(
                    "factor `{}` has {} observations, response has {}",
                    schema.name,
                    col.len(),
                    y.len()
                )));
            }
            let mut c = vec![0usize; schema.num_levels()];
            for &level in col {
                if level >= schema.num_levels() {
                    return Err(Error::InvalidDataset(format!(
                        "factor `{}` level index {} out of range",
                        schema.name, level
                    )));
                }
                c[level] += 1;
            }
            counts.push(c);
        }
        Ok(Dataset {
            schemas,
            y,
            codes,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn schemas(&self) -> &[FactorSchema] {
        &self.schemas
    }

    pub fn num_factors(&self) -> usize {
        self.schemas.len()
    }

    /// Level indices of factor `l`, one per observation.
    pub fn codes(&self, l: usize) -> &[usize] {
        &self.codes[l]
    }

    /// Per-level observation counts of factor `l`.
    pub fn counts(&self, l: usize) -> &[usize] {
        &self.counts[l]
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.schemas
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    /// Vector of length `k + 1` with the number of observations on each level.
    pub fn class_frequencies(&self, factor: &str) -> Result<Vec<usize>> {
        Ok(self.counts[self.factor_index(factor)?].clone())
    }

    /// New dataset made of the given rows, in the given order. Schemas are kept,
    /// so levels absent from the subset get count 0.
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let y = rows.iter().map(|&r| self.y[r]).collect();
        let codes = self
            .codes
            .iter()
            .map(|col| rows.iter().map(|&r| col[r]).collect())
            .collect();
        Dataset::new(self.schemas.clone(), y, codes)
    }

    /// Same observations with a different response vector.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.schemas.clone(), y, self.codes.clone())
    }
}

/// Read a comma-separated file with a header row. Factor cells must match a
/// declared level label exactly (after trimming); the response must parse as a
/// finite `f64`. Any bad row rejects the whole file.
pub fn ingest_csv(path: impl AsRef<Path>, schemas: &[FactorSchema], response_column: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, schemas, response_column)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, schemas: &[FactorSchema], response_column: &str) -> Result<Dataset> {
    validate_schemas(schemas)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let response_idx = find(response_column)?;
    let factor_idx = schemas.iter().map(|s| find(&s.name)).collect::<Result<Vec<_>>>()?;
    let lookups: Vec<HashMap<&str, usize>> = schemas
        .iter()
        .map(|s| s.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect())
        .collect();

    let mut y = Vec::new();
    let mut codes = vec![Vec::new(); schemas.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        // 1-based data row number, header excluded
        let row = i + 1;
        let value: f64 = record
            .get(response_idx)
            .and_then(|t| t.parse().ok())
            .filter(|v: &f64| v.is_finite())
            .ok_or(Error::NonNumericResponse(row))?;
        y.push(value);
        for (l, schema) in schemas.iter().enumerate() {
            let token = record.get(factor_idx[l]).unwrap_or("");
            let level = *lookups[l].get(token).ok_or_else(|| Error::UnknownLevel {
                row,
                factor: schema.name.clone(),
                token: token.to_string(),
            })?;
            codes[l].push(level);
        }
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(schemas.to_vec(), y, codes)
}
