//! Simulation scenarios, accuracy metrics and replicated studies.
//!
//! * `S1`: one nominal factor with nine levels, 20 observations per level,
//!   means in three groups, noise standard deviation 2.
//! * `S2`: four nominal (8, 8, 4, 4 levels) and four ordinal (8, 8, 4, 4)
//!   factors; the first factor of each pair is relevant, the second is noise.
//! * `S3`: `S2` plus four nominal and four ordinal six-level noise factors.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{build_augmented, DEFAULT_SQRT_GAMMA};
use crate::data::{Dataset, FactorSchema, Scale};
use crate::error::{Error, Result};
use crate::linalg::{mean_squared_error, ols_coefficients, predict};
use crate::selection::{CvConfig, CvPaths};
use crate::solver::{path_with, PathOptions};
use crate::structure::{degrees_of_freedom, extract_clusters, refit, ClusterPartition, DEFAULT_CLUSTER_TOL};
use crate::weights::{build_weights, WeightConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    S1,
    S2,
    S3,
    Custom,
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(ScenarioName::S1),
            "s2" => Ok(ScenarioName::S2),
            "s3" => Ok(ScenarioName::S3),
            _ => Err(Error::InvalidArgument(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub schemas: Vec<FactorSchema>,
    /// Per factor, one effect per level; entry 0 is the reference and is 0.
    pub truth: Vec<Vec<f64>>,
    pub intercept: f64,
    pub noise_sd: f64,
    /// Class probabilities per factor, aligned with the levels.
    pub probabilities: Vec<Vec<f64>>,
    /// Balanced design: levels assigned cyclically instead of drawn. Only
    /// valid for single-factor scenarios.
    pub balanced: bool,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

const P8: [f64; 8] = [0.1, 0.1, 0.2, 0.05, 0.2, 0.1, 0.2, 0.05];
const P4: [f64; 4] = [0.1, 0.4, 0.2, 0.3];

impl Scenario {
    pub fn s1(seed: u64) -> Self {
        Scenario {
            name: ScenarioName::S1,
            schemas: vec![FactorSchema::numbered("x", Scale::Nominal, 9)],
            truth: vec![vec![0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0]],
            intercept: 1.0,
            noise_sd: 2.0,
            probabilities: vec![vec![1.0 / 9.0; 9]],
            balanced: true,
            n_train: 180,
            n_test: 180,
            seed,
        }
    }

    pub fn s2(seed: u64) -> Self {
        let nom = |name: &str, k1| FactorSchema::numbered(name, Scale::Nominal, k1);
        let ord = |name: &str, k1| FactorSchema::numbered(name, Scale::Ordinal, k1);
        Scenario {
            name: ScenarioName::S2,
            schemas: vec![
                nom("nom8_rel", 8),
                nom("nom8_noise", 8),
                nom("nom4_rel", 4),
                nom("nom4_noise", 4),
                ord("ord8_rel", 8),
                ord("ord8_noise", 8),
                ord("ord4_rel", 4),
                ord("ord4_noise", 4),
            ],
            truth: vec![
                vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -2.0, -2.0],
                vec![0.0; 8],
                vec![0.0, 0.0, 2.0, 2.0],
                vec![0.0; 4],
                vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 4.0, 4.0],
                vec![0.0; 8],
                vec![0.0, 0.0, -2.0, -2.0],
                vec![0.0; 4],
            ],
            intercept: 1.0,
            noise_sd: 1.0,
            probabilities: [P8, P8]
                .iter()
                .map(|p| p.to_vec())
                .chain([P4, P4].iter().map(|p| p.to_vec()))
                .chain([P8, P8].iter().map(|p| p.to_vec()))
                .chain([P4, P4].iter().map(|p| p.to_vec()))
                .collect(),
            balanced: false,
            n_train: 500,
            n_test: 1000,
            seed,
        }
    }

    pub fn s3(seed: u64) -> Self {
        let mut sc = Scenario::s2(seed);
        sc.name = ScenarioName::S3;
        for (prefix, scale) in [("nom6_noise", Scale::Nominal), ("ord6_noise", Scale::Ordinal)] {
            for i in 1..=4 {
                sc.schemas
                    .push(FactorSchema::numbered(format!("{prefix}{i}"), scale, 6));
                sc.truth.push(vec![0.0; 6]);
                sc.probabilities.push(vec![1.0 / 6.0; 6]);
            }
        }
        sc
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        Ok(match name.parse::<ScenarioName>()? {
            ScenarioName::S1 => Self::s1(seed),
            ScenarioName::S2 => Self::s2(seed),
            _ => Self::s3(seed),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.schemas.len();
        if self.truth.len() != f || self.probabilities.len() != f {
            return Err(Error::ShapeMismatch("scenario vectors do not match its factors".into()));
        }
        for ((s, t), p) in self.schemas.iter().zip(&self.truth).zip(&self.probabilities) {
            s.validate()?;
            if t.len() != s.num_levels() || p.len() != s.num_levels() {
                return Err(Error::ShapeMismatch(format!("factor `{}`", s.name)));
            }
            if t[0] != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "factor `{}`: reference effect must be 0",
                    s.name
                )));
            }
            if p.iter().any(|v| !(*v >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "factor `{}`: probabilities must be nonnegative and sum to 1",
                    s.name
                )));
            }
        }
        if self.balanced && f != 1 {
            return Err(Error::InvalidArgument(
                "balanced designs need exactly one factor".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) || self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidArgument(
                "noise sd and sample sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Per-level mean response.
    pub fn mean_of(&self, levels: &[usize]) -> f64 {
        self.intercept + self.truth.iter().zip(levels).map(|(t, &l)| t[l]).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub train: Dataset,
    pub test: Dataset,
    pub truth: Vec<Vec<f64>>,
    pub true_partition: ClusterPartition,
}

/// Draw training and test data. Training rows come first from the stream
/// seeded with `scenario.seed`, test rows after them.
pub fn generate(scenario: &Scenario) -> Result<Generated> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let noise = Normal::new(0.0, scenario.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let samplers = scenario
        .probabilities
        .iter()
        .map(|p| WeightedIndex::new(p).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut draw = |n: usize| -> Result<Dataset> {
        let f = scenario.schemas.len();
        let mut codes = vec![Vec::with_capacity(n); f];
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let levels: Vec<usize> = if scenario.balanced {
                let k1 = scenario.schemas[0].num_levels();
                vec![(i * k1) / n]
            } else {
                samplers.iter().map(|s| s.sample(&mut rng)).collect()
            };
            let e = if scenario.noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            y.push(scenario.mean_of(&levels) + e);
            for (c, l) in codes.iter_mut().zip(levels) {
                c.push(l);
            }
        }
        Dataset::new(scenario.schemas.clone(), y, codes)
    };
    let train = draw(scenario.n_train)?;
    let test = draw(scenario.n_test)?;
    let true_partition = extract_clusters(&scenario.schemas, &scenario.truth, DEFAULT_CLUSTER_TOL);
    Ok(Generated {
        train,
        test,
        truth: scenario.truth.clone(),
        true_partition,
    })
}

/// Accuracy of one estimate. Rates are `None` when their denominator is 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub coef_mse: f64,
    pub selection_fp: usize,
    pub selection_fn: usize,
    pub selection_fpr: Option<f64>,
    pub selection_fnr: Option<f64>,
    pub clustering_fp: usize,
    pub clustering_fn: usize,
    pub clustering_fpr: Option<f64>,
    pub clustering_fnr: Option<f64>,
}

fn rate(count: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| count as f64 / total as f64)
}

/// Compare an estimate (coefficients and their partition) to the truth.
pub fn evaluate(
    schemas: &[FactorSchema],
    beta: &[Vec<f64>],
    partition: &ClusterPartition,
    truth: &[Vec<f64>],
) -> Result<Metrics> {
    let f = schemas.len();
    if beta.len() != f || truth.len() != f || partition.factors.len() != f {
        return Err(Error::ShapeMismatch(
            "estimate, partition and truth disagree in factors".into(),
        ));
    }
    let true_part = extract_clusters(schemas, truth, DEFAULT_CLUSTER_TOL);
    let (mut sq, mut count) = (0.0, 0usize);
    let (mut sel_fp, mut sel_fn, mut noise, mut relevant) = (0, 0, 0, 0);
    let (mut cl_fp, mut cl_fn, mut true_zero, mut true_nonzero) = (0, 0, 0, 0);
    for l in 0..f {
        let k1 = schemas[l].num_levels();
        if beta[l].len() != k1 || truth[l].len() != k1 || partition.factors[l].num_levels() != k1 {
            return Err(Error::ShapeMismatch(format!("factor `{}`", schemas[l].name)));
        }
        for i in 1..k1 {
            sq += (beta[l][i] - truth[l][i]).powi(2);
            count += 1;
        }
        let est = &partition.factors[l];
        let is_noise = true_part.factors[l].is_excluded();
        if is_noise {
            noise += 1;
            sel_fp += usize::from(!est.is_excluded());
            continue;
        }
        relevant += 1;
        sel_fn += usize::from(est.is_excluded());
        let (tl, el) = (true_part.factors[l].labels(), est.labels());
        let diffs: Vec<(usize, usize)> = if schemas[l].scale.is_ordinal() {
            (1..k1).map(|i| (i, i - 1)).collect()
        } else {
            (1..k1).flat_map(|i| (0..i).map(move |j| (i, j))).collect()
        };
        for (i, j) in diffs {
            let truly_zero = tl[i] == tl[j];
            let est_zero = el[i] == el[j];
            if truly_zero {
                true_zero += 1;
                cl_fp += usize::from(!est_zero);
            } else {
                true_nonzero += 1;
                cl_fn += usize::from(est_zero);
            }
        }
    }
    Ok(Metrics {
        coef_mse: if count > 0 { sq / count as f64 } else { 0.0 },
        selection_fp: sel_fp,
        selection_fn: sel_fn,
        selection_fpr: rate(sel_fp, noise),
        selection_fnr: rate(sel_fn, relevant),
        clustering_fp: cl_fp,
        clustering_fn: cl_fn,
        clustering_fpr: rate(cl_fp, true_zero),
        clustering_fnr: rate(cl_fn, true_nonzero),
    })
}

/// [`evaluate`] with the partition extracted from `beta`.
pub fn evaluate_coefficients(schemas: &[FactorSchema], beta: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Metrics> {
    let partition = extract_clusters(schemas, beta, DEFAULT_CLUSTER_TOL);
    evaluate(schemas, beta, &partition, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Ols,
    Standard,
    Adaptive,
}

/// Estimator configuration, written like `adapt+nij+rf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub weighting: Weighting,
    pub use_frequency: bool,
    pub refit: bool,
}

impl Variant {
    pub const OLS: Variant = Variant {
        weighting: Weighting::Ols,
        use_frequency: false,
        refit: false,
    };

    pub fn penalized(adaptive: bool, use_frequency: bool, refit: bool) -> Self {
        Variant {
            weighting: if adaptive {
                Weighting::Adaptive
            } else {
                Weighting::Standard
            },
            use_frequency,
            refit,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.weighting {
            Weighting::Ols => return write!(f, "ols"),
            Weighting::Standard => write!(f, "stdrd")?,
            Weighting::Adaptive => write!(f, "adapt")?,
        }
        if self.use_frequency {
            write!(f, "+nij")?;
        }
        if self.refit {
            write!(f, "+rf")?;
        }
        Ok(())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut weighting = None;
        let (mut use_frequency, mut refit) = (false, false);
        for token in s.split(['+', '.', '-']).map(str::trim).filter(|t| !t.is_empty()) {
            match token.to_ascii_lowercase().as_str() {
                "ols" => weighting = Some(Weighting::Ols),
                "stdrd" | "standard" => weighting = Some(Weighting::Standard),
                "adapt" | "adaptive" => weighting = Some(Weighting::Adaptive),
                "rf" | "refit" => refit = true,
                "nij" | "n(ij)" => use_frequency = true,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown variant token `{token}` in `{s}`"
                    )))
                }
            }
        }
        match weighting {
            Some(Weighting::Ols) if use_frequency || refit => {
                Err(Error::InvalidArgument(format!("`ols` takes no modifiers: `{s}`")))
            }
            Some(w) => Ok(Variant {
                weighting: w,
                use_frequency,
                refit,
            }),
            None => Err(Error::InvalidArgument(format!("variant `{s}` names no estimator"))),
        }
    }
}

/// Settings shared by every fit in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub k_folds: usize,
    pub grid_size: usize,
    pub gamma: f64,
    pub cluster_tol: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            k_folds: 5,
            grid_size: 100,
            gamma: DEFAULT_SQRT_GAMMA * DEFAULT_SQRT_GAMMA,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub replicate: usize,
    pub variant: String,
    pub coef_mse: f64,
    pub msep: f64,
    pub selection_fpr: Option<f64>,
    pub selection_fnr: Option<f64>,
    pub clustering_fpr: Option<f64>,
    pub clustering_fnr: Option<f64>,
    /// `None` for unpenalized fits.
    pub s_ratio: Option<f64>,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub replicates: usize,
    pub median_coef_mse: f64,
    pub mean_coef_mse: f64,
    pub median_msep: f64,
    pub mean_msep: f64,
    pub mean_selection_fpr: Option<f64>,
    pub mean_selection_fnr: Option<f64>,
    pub mean_clustering_fpr: Option<f64>,
    pub mean_clustering_fnr: Option<f64>,
    pub median_df: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub scenario: ScenarioName,
    pub seed: u64,
    pub records: Vec<Record>,
    pub summaries: Vec<VariantSummary>,
}

impl SimReport {
    pub fn summary(&self, variant: &str) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "replicate",
            "variant",
            "coef_mse",
            "msep",
            "selection_fpr",
            "selection_fnr",
            "clustering_fpr",
            "clustering_fnr",
            "s_ratio",
            "df",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:?}"));
        for r in &self.records {
            w.write_record([
                r.replicate.to_string(),
                r.variant.clone(),
                format!("{:?}", r.coef_mse),
                format!("{:?}", r.msep),
                opt(r.selection_fpr),
                opt(r.selection_fnr),
                opt(r.clustering_fpr),
                opt(r.clustering_fnr),
                opt(r.s_ratio),
                r.df.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn mean_defined(v: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = v.flatten().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn summarize(variant: &str, records: &[&Record]) -> VariantSummary {
    let n = records.len();
    let mse: Vec<f64> = records.iter().map(|r| r.coef_mse).collect();
    let msep: Vec<f64> = records.iter().map(|r| r.msep).collect();
    VariantSummary {
        variant: variant.to_string(),
        replicates: n,
        median_coef_mse: median(mse.clone()),
        mean_coef_mse: mse.iter().sum::<f64>() / n as f64,
        median_msep: median(msep.clone()),
        mean_msep: msep.iter().sum::<f64>() / n as f64,
        mean_selection_fpr: mean_defined(records.iter().map(|r| r.selection_fpr)),
        mean_selection_fnr: mean_defined(records.iter().map(|r| r.selection_fnr)),
        mean_clustering_fpr: mean_defined(records.iter().map(|r| r.clustering_fpr)),
        mean_clustering_fnr: mean_defined(records.iter().map(|r| r.clustering_fnr)),
        median_df: median(records.iter().map(|r| r.df as f64).collect()),
    }
}

/// Fit every variant on one generated data set. Variants sharing weights
/// share their cross-validation paths and full-data path.
pub fn fit_variants(
    data: &Generated,
    variants: &[Variant],
    config: &StudyConfig,
    seed: u64,
) -> Result<Vec<(Variant, Record)>> {
    let schemas = data.train.schemas();
    let mut out: Vec<Option<Record>> = vec![None; variants.len()];
    let record = |variant: &Variant, beta: Vec<Vec<f64>>, intercept: f64, s: Option<f64>| -> Result<Record> {
        let partition = extract_clusters(schemas, &beta, config.cluster_tol);
        let m = evaluate(schemas, &beta, &partition, &data.truth)?;
        let msep = mean_squared_error(data.test.y(), &predict(&data.test, &beta, intercept));
        Ok(Record {
            replicate: 0,
            variant: variant.to_string(),
            coef_mse: m.coef_mse,
            msep,
            selection_fpr: m.selection_fpr,
            selection_fnr: m.selection_fnr,
            clustering_fpr: m.clustering_fpr,
            clustering_fnr: m.clustering_fnr,
            s_ratio: s,
            df: degrees_of_freedom(&partition),
        })
    };
    // group penalized variants by their weight configuration
    let mut groups: Vec<(WeightConfig, Vec<usize>)> = Vec::new();
    for (idx, v) in variants.iter().enumerate() {
        let tag = |e: Error| Error::Study {
            replicate: 0,
            variant: v.to_string(),
            source: Box::new(e),
        };
        if v.weighting == Weighting::Ols {
            let (beta, b0) = ols_coefficients(&data.train).map_err(tag)?;
            out[idx] = Some(record(v, beta, b0, None).map_err(tag)?);
            continue;
        }
        let wc = WeightConfig {
            adaptive: v.weighting == Weighting::Adaptive,
            use_frequency: v.use_frequency,
            ..WeightConfig::default()
        };
        match groups.iter_mut().find(|(c, _)| *c == wc) {
            Some((_, members)) => members.push(idx),
            None => groups.push((wc, vec![idx])),
        }
    }
    for (wc, members) in groups {
        let first = variants[members[0]];
        let tag = |e: Error| Error::Study {
            replicate: 0,
            variant: first.to_string(),
            source: Box::new(e),
        };
        let cv_config = CvConfig {
            k_folds: config.k_folds,
            grid_size: config.grid_size,
            seed,
            weights: wc,
            refit_inside: false,
            gamma: config.gamma,
            cluster_tol: config.cluster_tol,
        };
        let cv_paths = CvPaths::compute(&data.train, &cv_config).map_err(tag)?;
        let weights = build_weights(&data.train, &wc).map_err(tag)?;
        let problem = build_augmented(&data.train, &weights, config.gamma).map_err(tag)?;
        let opts = PathOptions {
            grid_size: config.grid_size,
            precision: false,
            ..PathOptions::default()
        };
        let full = path_with(&problem, &opts).map_err(tag)?;
        for idx in members {
            let v = variants[idx];
            let tag = |e: Error| Error::Study {
                replicate: 0,
                variant: v.to_string(),
                source: Box::new(e),
            };
            let curve = cv_paths.curve(v.refit).map_err(tag)?;
            let s = curve.chosen_s_ratio;
            let (mut beta, mut b0) = full.coefficients_at(s).map_err(tag)?;
            if v.refit {
                let partition = extract_clusters(schemas, &beta, config.cluster_tol);
                let fit = refit(&data.train, &partition).map_err(tag)?;
                beta = fit.beta;
                b0 = fit.intercept;
            }
            out[idx] = Some(record(&v, beta, b0, Some(s)).map_err(tag)?);
        }
    }
    Ok(variants
        .iter()
        .copied()
        .zip(out.into_iter().map(|r| r.expect("every variant fitted")))
        .collect())
}

/// Replicate `r` uses data seed `seed + r` and fold seed `seed + r` as well.
pub fn run_study(
    scenario: &Scenario,
    variants: &[Variant],
    replicates: usize,
    seed: u64,
    config: &StudyConfig,
) -> Result<SimReport> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    if variants.is_empty() {
        return Err(Error::InvalidArgument("need at least one variant".into()));
    }
    let per_rep = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed.wrapping_add(r as u64);
            let mut sc = scenario.clone();
            sc.seed = rep_seed;
            let data = generate(&sc)?;
            let fits = fit_variants(&data, variants, config, rep_seed).map_err(|e| match e {
                Error::Study { variant, source, .. } => Error::Study {
                    replicate: r,
                    variant,
                    source,
                },
                other => other,
            })?;
            Ok(fits
                .into_iter()
                .map(|(_, mut rec)| {
                    rec.replicate = r;
                    rec
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<Record> = per_rep.into_iter().flatten().collect();
    let summaries = variants
        .iter()
        .map(|v| {
            let name = v.to_string();
            let rs: Vec<&Record> = records.iter().filter(|r| r.variant == name).collect();
            summarize(&name, &rs)
        })
        .collect();
    Ok(SimReport {
        scenario: scenario.name,
        seed,
        records,
        summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn s1_noise_free_means() {
        let mut sc = Scenario::s1(3);
        sc.noise_sd = 0.0;
        let g = generate(&sc).unwrap();
        assert_eq!(g.train.n(), 180);
        assert_eq!(g.train.counts(0), &[20; 9]);
        for (i, &level) in g.train.codes(0).iter().enumerate() {
            assert_eq!(g.train.y()[i], 1.0 + sc.truth[0][level]);
        }
        assert_eq!(
            g.true_partition.factors[0].clusters,
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]]
        );
    }

    #[test]
    fn s2_shapes_and_truth() {
        let sc = Scenario::s2(1);
        sc.validate().unwrap();
        assert_eq!((sc.n_train, sc.n_test), (500, 1000));
        assert_eq!(sc.probabilities[2], vec![0.1, 0.4, 0.2, 0.3]);
        // non-reference dummy effects of the first nominal factor
        assert_eq!(sc.truth[0][1..], [0.0, 1.0, 1.0, 1.0, 1.0, -2.0, -2.0]);
        assert_eq!(sc.truth[4][1..], [0.0, 1.0, 1.0, 2.0, 2.0, 4.0, 4.0]);
        let g = generate(&sc).unwrap();
        assert_eq!((g.train.n(), g.test.n()), (500, 1000));
        assert_eq!(
            g.true_partition.factors[0].clusters,
            vec![vec![0, 1], vec![2, 3, 4, 5], vec![6, 7]]
        );
        let s3 = Scenario::s3(1);
        s3.validate().unwrap();
        assert_eq!(s3.schemas.len(), 16);
    }

    #[test]
    fn truth_scores_perfectly() {
        let sc = Scenario::s2(1);
        let m = evaluate_coefficients(&sc.schemas, &sc.truth, &sc.truth).unwrap();
        assert_eq!(m.coef_mse, 0.0);
        assert_eq!(m.selection_fpr, Some(0.0));
        assert_eq!(m.selection_fnr, Some(0.0));
        assert_eq!(m.clustering_fpr, Some(0.0));
        assert_eq!(m.clustering_fnr, Some(0.0));
    }

    #[test]
    fn all_zero_estimate() {
        let sc = Scenario::s2(1);
        let zero: Vec<Vec<f64>> = sc.truth.iter().map(|t| vec![0.0; t.len()]).collect();
        let m = evaluate_coefficients(&sc.schemas, &zero, &sc.truth).unwrap();
        assert_eq!(m.selection_fnr, Some(1.0));
        assert_eq!(m.selection_fpr, Some(0.0));
        assert_eq!(m.clustering_fnr, Some(1.0));
    }

    #[test]
    fn variant_parsing() {
        let v: Variant = "adapt+rf".parse().unwrap();
        assert_eq!(v, Variant::penalized(true, false, true));
        let v: Variant = "stdrd.n(ij)".parse().unwrap();
        assert_eq!(v, Variant::penalized(false, true, false));
        assert_eq!(v.to_string(), "stdrd+nij");
        assert_eq!("ols".parse::<Variant>().unwrap(), Variant::OLS);
        assert!("ols+rf".parse::<Variant>().is_err());
        assert!("fancy".parse::<Variant>().is_err());
        assert!("rf".parse::<Variant>().is_err());
    }

    #[test]
    fn unknown_scenario() {
        assert!(Scenario::by_name("s9", 0).is_err());
        assert_eq!(Scenario::by_name("S3", 0).unwrap().name, ScenarioName::S3);
    }

    #[test]
    fn shape_mismatch() {
        let sc = Scenario::s1(0);
        assert!(matches!(
            evaluate_coefficients(&sc.schemas, &[vec![0.0; 3]], &sc.truth),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
