//! Penalty weights for every penalized difference.
//!
//! Nominal pair `(i, j)`: `2 / (k + 1) * sqrt((n_i + n_j) / n)`, or `2 / (k + 1)`
//! without the frequency term. Ordinal adjacent difference `i`:
//! `sqrt((n_i + n_{i-1}) / n)`, or 1. Adaptive weights additionally divide by
//! the absolute least-squares difference; spatial weights multiply nominal
//! pairs by an Epanechnikov kernel of the distance gap.

use serde::{Deserialize, Serialize};

use crate::coding::{nominal_pairs, ThetaLayout};
use crate::data::{Dataset, FactorSchema, Scale};
use crate::error::{Error, Result};

/// Adaptive weights never exceed this value; a zero least-squares difference
/// maps to it.
pub const ADAPTIVE_CAP: f64 = 1e12;

/// Default lower clamp of spatial multipliers.
pub const DEFAULT_SPATIAL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorWeights {
    pub factor: String,
    pub scale: Scale,
    /// Penalized differences `(i, j)` in canonical layout order.
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub factors: Vec<FactorWeights>,
    pub use_frequency: bool,
    pub adaptive: bool,
    pub spatial: bool,
    /// Least-squares coefficients the adaptive terms were computed from.
    pub ols_reference: Option<Vec<Vec<f64>>>,
}

impl WeightSet {
    pub fn total_len(&self) -> usize {
        self.factors.iter().map(|f| f.values.len()).sum()
    }

    /// Weights flattened in layout order, after checking they fit the layout
    /// and are strictly positive.
    pub fn flat_for(&self, layout: &ThetaLayout, ds: &Dataset) -> Result<Vec<f64>> {
        if self.factors.len() != layout.blocks.len() || self.total_len() != layout.len {
            return Err(Error::LayoutMismatch(format!(
                "{} weights for {} parameters",
                self.total_len(),
                layout.len
            )));
        }
        let mut flat = Vec::with_capacity(layout.len);
        for ((fw, block), schema) in self.factors.iter().zip(&layout.blocks).zip(ds.schemas()) {
            if fw.factor != schema.name || fw.pairs != block.differences() {
                return Err(Error::LayoutMismatch(format!(
                    "weights for `{}` do not match factor `{}`",
                    fw.factor, schema.name
                )));
            }
            for &v in &fw.values {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::NonPositiveWeight {
                        factor: fw.factor.clone(),
                        value: v,
                    });
                }
                flat.push(v);
            }
        }
        Ok(flat)
    }

    pub fn factor(&self, name: &str) -> Option<&FactorWeights> {
        self.factors.iter().find(|f| f.factor == name)
    }
}

fn differences_for(schema: &FactorSchema) -> Vec<(usize, usize)> {
    if schema.scale.is_ordinal() {
        (1..=schema.k()).map(|i| (i, i - 1)).collect()
    } else {
        nominal_pairs(schema.k())
    }
}

pub fn standard_weights(ds: &Dataset, use_frequency: bool) -> Result<WeightSet> {
    let n = ds.n() as f64;
    let mut factors = Vec::with_capacity(ds.num_factors());
    for (l, schema) in ds.schemas().iter().enumerate() {
        let counts = ds.counts(l);
        if use_frequency {
            if let Some(level) = counts.iter().position(|&c| c == 0) {
                return Err(Error::UnobservedLevel {
                    factor: schema.name.clone(),
                    level,
                });
            }
        }
        let base = if schema.scale.is_ordinal() {
            1.0
        } else {
            2.0 / (schema.k() as f64 + 1.0)
        };
        let pairs = differences_for(schema);
        let values = pairs
            .iter()
            .map(|&(i, j)| {
                if use_frequency {
                    base * (((counts[i] + counts[j]) as f64) / n).sqrt()
                } else {
                    base
                }
            })
            .collect();
        factors.push(FactorWeights {
            factor: schema.name.clone(),
            scale: schema.scale,
            pairs,
            values,
        });
    }
    Ok(WeightSet {
        factors,
        use_frequency,
        adaptive: false,
        spatial: false,
        ols_reference: None,
    })
}

/// Multiply each weight by `1 / |ols_i - ols_j|`, capped at [`ADAPTIVE_CAP`].
/// `ols` holds one vector of length `k + 1` per factor (reference entry 0).
pub fn adaptive_weights(base: &WeightSet, ols: &[Vec<f64>]) -> Result<WeightSet> {
    if ols.len() != base.factors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} least-squares vectors for {} factors",
            ols.len(),
            base.factors.len()
        )));
    }
    let mut out = base.clone();
    for (fw, b) in out.factors.iter_mut().zip(ols) {
        let k = fw.pairs.iter().map(|p| p.0).max().unwrap_or(0);
        if b.len() != k + 1 || b.iter().any(|v| !v.is_finite()) {
            return Err(Error::OlsUnavailable);
        }
        for (w, &(i, j)) in fw.values.iter_mut().zip(&fw.pairs) {
            let level = |m: usize| if m == 0 { 0.0 } else { b[m] };
            *w = adaptive_factor(*w, (level(i) - level(j)).abs());
        }
    }
    out.adaptive = true;
    out.ols_reference = Some(ols.to_vec());
    Ok(out)
}

fn adaptive_factor(base: f64, abs_diff: f64) -> f64 {
    if abs_diff == 0.0 {
        ADAPTIVE_CAP
    } else {
        (base / abs_diff).min(ADAPTIVE_CAP)
    }
}

/// Epanechnikov kernel `0.75 (1 - u^2)` on `|u| <= 1`.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Spatial multipliers `max(K((s_i - s_j) / h), floor)` for every penalized
/// difference of the factor, in canonical order.
pub fn spatial_factors(schema: &FactorSchema, h: f64, floor: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "spatial floor must be positive, got {floor}"
        )));
    }
    let coords = schema
        .spatial_coords
        .as_ref()
        .ok_or_else(|| Error::MissingCoordinates(schema.name.clone()))?;
    Ok(differences_for(schema)
        .into_iter()
        .map(|(i, j)| epanechnikov((coords[i] - coords[j]) / h).max(floor))
        .collect())
}

/// Multiply the weights of every factor that carries spatial coordinates by its
/// spatial multipliers. Factors without coordinates are left untouched.
pub fn apply_spatial(weights: &WeightSet, schemas: &[FactorSchema], h: f64, floor: f64) -> Result<WeightSet> {
    let mut out = weights.clone();
    for schema in schemas.iter().filter(|s| s.spatial_coords.is_some()) {
        let zeta = spatial_factors(schema, h, floor)?;
        let fw = out
            .factors
            .iter_mut()
            .find(|f| f.factor == schema.name)
            .ok_or_else(|| Error::UnknownFactor(schema.name.clone()))?;
        for (w, z) in fw.values.iter_mut().zip(zeta) {
            *w *= z;
        }
        out.spatial = true;
    }
    Ok(out)
}

/// Every switch that shapes a weight set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub adaptive: bool,
    pub use_frequency: bool,
    /// Kernel bandwidth for factors with spatial coordinates.
    pub spatial_h: Option<f64>,
    pub spatial_floor: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            adaptive: false,
            use_frequency: true,
            spatial_h: None,
            spatial_floor: DEFAULT_SPATIAL_FLOOR,
        }
    }
}

/// Standard weights, then spatial multipliers, then adaptive terms from the
/// least-squares fit of `ds`.
pub fn build_weights(ds: &Dataset, config: &WeightConfig) -> Result<WeightSet> {
    let mut w = standard_weights(ds, config.use_frequency)?;
    if let Some(h) = config.spatial_h {
        w = apply_spatial(&w, ds.schemas(), h, config.spatial_floor)?;
    }
    if config.adaptive {
        let (ols, _) = crate::linalg::ols_coefficients(ds)?;
        w = adaptive_weights(&w, &ols)?;
    }
    Ok(w)
}
