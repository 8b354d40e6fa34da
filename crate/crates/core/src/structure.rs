//! Cluster extraction, refitting on the fused design, and degrees of freedom.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FactorSchema, Scale};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, predict, residual_sum_of_squares};

/// Default relative tolerance for declaring two coefficients equal.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorClusters {
    pub factor: String,
    pub scale: Scale,
    /// Sorted clusters, each sorted; the first holds the reference level 0.
    pub clusters: Vec<Vec<usize>>,
    /// One coefficient per cluster; the first is always 0.
    pub coefficients: Vec<f64>,
}

impl FactorClusters {
    pub fn num_levels(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Cluster index of every level.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.num_levels()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &level in members {
                labels[level] = c;
            }
        }
        labels
    }

    /// Per-level coefficients.
    pub fn expand(&self) -> Vec<f64> {
        self.labels().into_iter().map(|c| self.coefficients[c]).collect()
    }

    /// All levels share the reference effect.
    pub fn is_excluded(&self) -> bool {
        self.clusters.len() == 1
    }

    pub fn zero_cluster(&self) -> &[usize] {
        &self.clusters[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub factors: Vec<FactorClusters>,
}

impl ClusterPartition {
    /// Every level its own cluster, with the given per-level coefficients.
    pub fn singletons(schemas: &[FactorSchema], beta: &[Vec<f64>]) -> Self {
        ClusterPartition {
            factors: schemas
                .iter()
                .zip(beta)
                .map(|(s, b)| FactorClusters {
                    factor: s.name.clone(),
                    scale: s.scale,
                    clusters: (0..s.num_levels()).map(|l| vec![l]).collect(),
                    coefficients: b.clone(),
                })
                .collect(),
        }
    }

    /// Build from per-level cluster labels (any integers); clusters are
    /// renumbered by smallest member and coefficients averaged from `beta`.
    pub fn from_labels(schemas: &[FactorSchema], labels: &[Vec<usize>], beta: Option<&[Vec<f64>]>) -> Self {
        let factors = schemas
            .iter()
            .enumerate()
            .map(|(l, s)| {
                let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
                for (level, &lab) in labels[l].iter().enumerate() {
                    groups.entry(lab).or_default().push(level);
                }
                let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
                clusters.sort_by_key(|c| c[0]);
                let coefficients = clusters
                    .iter()
                    .enumerate()
                    .map(|(c, members)| match beta {
                        Some(b) if c > 0 => members.iter().map(|&m| b[l][m]).sum::<f64>() / members.len() as f64,
                        _ => 0.0,
                    })
                    .collect();
                FactorClusters {
                    factor: s.name.clone(),
                    scale: s.scale,
                    clusters,
                    coefficients,
                }
            })
            .collect();
        ClusterPartition { factors }
    }

    pub fn expand(&self) -> Vec<Vec<f64>> {
        self.factors.iter().map(FactorClusters::expand).collect()
    }

    /// Check disjointness, coverage, reference placement and ordinal
    /// contiguity.
    pub fn validate(&self) -> Result<()> {
        for f in &self.factors {
            let n = f.num_levels();
            let mut seen = vec![false; n];
            for c in &f.clusters {
                if c.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty cluster in `{}`", f.factor)));
                }
                for &level in c {
                    if level >= n || seen[level] {
                        return Err(Error::InvalidArgument(format!(
                            "factor `{}`: clusters are not a partition",
                            f.factor
                        )));
                    }
                    seen[level] = true;
                }
                if f.scale.is_ordinal() && c.windows(2).any(|w| w[1] != w[0] + 1) {
                    return Err(Error::InvalidArgument(format!(
                        "ordinal factor `{}` has a non-contiguous cluster",
                        f.factor
                    )));
                }
            }
            if f.clusters.first().and_then(|c| c.first()) != Some(&0) {
                return Err(Error::InvalidArgument(format!(
                    "factor `{}`: first cluster must contain the reference",
                    f.factor
                )));
            }
            if f.coefficients.len() != f.clusters.len() {
                return Err(Error::ShapeMismatch(format!(
                    "factor `{}`: coefficient count",
                    f.factor
                )));
            }
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    parent[x] = r;
    r
}

/// Group levels whose coefficients agree within `tol * max(1, max |beta|)`.
/// Nominal factors merge any pair (transitively); ordinal factors merge only
/// adjacent levels.
pub fn extract_clusters(schemas: &[FactorSchema], beta: &[Vec<f64>], tol: f64) -> ClusterPartition {
    let labels: Vec<Vec<usize>> = schemas
        .iter()
        .zip(beta)
        .map(|(s, b)| {
            let thr = tol * b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let mut parent: Vec<usize> = (0..b.len()).collect();
            if s.scale.is_ordinal() {
                for i in 1..b.len() {
                    if (b[i] - b[i - 1]).abs() <= thr {
                        parent[i] = find(&mut parent, i - 1);
                    }
                }
            } else {
                for i in 1..b.len() {
                    for j in 0..i {
                        if (b[i] - b[j]).abs() <= thr {
                            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                            if ri != rj {
                                parent[ri.max(rj)] = ri.min(rj);
                            }
                        }
                    }
                }
            }
            (0..b.len()).map(|i| find(&mut parent, i)).collect()
        })
        .collect();
    ClusterPartition::from_labels(schemas, &labels, Some(beta))
}

/// `1 + sum over factors of (number of clusters - 1)`.
pub fn degrees_of_freedom(partition: &ClusterPartition) -> usize {
    1 + partition.factors.iter().map(|f| f.clusters.len() - 1).sum::<usize>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefitResult {
    /// Partition with refitted cluster coefficients.
    pub partition: ClusterPartition,
    pub beta: Vec<Vec<f64>>,
    pub intercept: f64,
    pub rss: f64,
}

/// Least squares on the design with one indicator per nonzero cluster.
pub fn refit(ds: &Dataset, partition: &ClusterPartition) -> Result<RefitResult> {
    if partition.factors.len() != ds.num_factors() {
        return Err(Error::ShapeMismatch(format!(
            "partition has {} factors, dataset {}",
            partition.factors.len(),
            ds.num_factors()
        )));
    }
    let n = ds.n();
    let mut labels = Vec::with_capacity(ds.num_factors());
    let mut offsets = Vec::with_capacity(ds.num_factors());
    let mut p = 0;
    for (l, f) in partition.factors.iter().enumerate() {
        if f.num_levels() != ds.schemas()[l].num_levels() {
            return Err(Error::ShapeMismatch(format!("factor `{}` level count", f.factor)));
        }
        offsets.push(p);
        p += f.clusters.len() - 1;
        labels.push(f.labels());
    }
    let mut x = DMatrix::zeros(n, p);
    for l in 0..ds.num_factors() {
        for (obs, &level) in ds.codes(l).iter().enumerate() {
            let c = labels[l][level];
            if c > 0 {
                x[(obs, offsets[l] + c - 1)] = 1.0;
            }
        }
    }
    let y = DVector::from_column_slice(ds.y());
    let y_mean = y.mean();
    let means: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    for (j, m) in means.iter().enumerate() {
        x.column_mut(j).add_scalar_mut(-m);
    }
    let coef = least_squares(&x, &y.add_scalar(-y_mean)).ok_or(Error::RankDeficient)?;
    let intercept = y_mean - means.iter().zip(coef.iter()).map(|(m, c)| m * c).sum::<f64>();

    let mut refitted = partition.clone();
    for (l, f) in refitted.factors.iter_mut().enumerate() {
        f.coefficients = (0..f.clusters.len())
            .map(|c| if c == 0 { 0.0 } else { coef[offsets[l] + c - 1] })
            .collect();
    }
    let beta = refitted.expand();
    let rss = residual_sum_of_squares(ds.y(), &predict(ds, &beta, intercept));
    Ok(RefitResult {
        partition: refitted,
        beta,
        intercept,
        rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nominal(k1: usize) -> Vec<FactorSchema> {
        vec![FactorSchema::numbered("f", Scale::Nominal, k1)]
    }

    #[test]
    fn example_partition() {
        let p = extract_clusters(&nominal(4), &[vec![0.0, 1.0, 1.0, -2.0]], 1e-8);
        assert_eq!(p.factors[0].clusters, vec![vec![0], vec![1, 2], vec![3]]);
        assert_eq!(p.factors[0].coefficients, vec![0.0, 1.0, -2.0]);
        assert_eq!(degrees_of_freedom(&p), 3);
        p.validate().unwrap();
    }

    #[test]
    fn all_zero_is_excluded() {
        let p = extract_clusters(&nominal(4), &[vec![0.0; 4]], 1e-8);
        assert!(p.factors[0].is_excluded());
        assert_eq!(degrees_of_freedom(&p), 1);
    }

    #[test]
    fn ordinal_merges_only_neighbours() {
        let schemas = vec![FactorSchema::numbered("o", Scale::Ordinal, 4)];
        let p = extract_clusters(&schemas, &[vec![0.0, 1.0, 0.0, 0.0]], 1e-8);
        assert_eq!(p.factors[0].clusters, vec![vec![0], vec![1], vec![2, 3]]);
        p.validate().unwrap();
    }

    #[test]
    fn tolerance_is_relative() {
        let p = extract_clusters(&nominal(3), &[vec![0.0, 1e6, 1e6 + 1e-3]], 1e-8);
        assert_eq!(p.factors[0].clusters.len(), 2);
        let p = extract_clusters(&nominal(3), &[vec![0.0, 1.0, 1.0 + 1e-7]], 1e-8);
        assert_eq!(p.factors[0].clusters.len(), 3);
    }

    #[test]
    fn validate_rejects_bad_partitions() {
        let mut p = extract_clusters(&nominal(3), &[vec![0.0, 1.0, 2.0]], 1e-8);
        p.factors[0].clusters = vec![vec![0, 1], vec![1, 2]];
        p.factors[0].coefficients = vec![0.0, 1.0];
        assert!(p.validate().is_err());
    }

    #[test]
    fn refit_group_means() {
        let codes = vec![0, 0, 1, 1, 2, 2];
        let y = vec![1.0, 3.0, 5.0, 7.0, 9.0, 13.0];
        let ds = Dataset::new(nominal(3), y, vec![codes]).unwrap();
        let part = ClusterPartition::from_labels(ds.schemas(), &[vec![0, 1, 1]], None);
        let fit = refit(&ds, &part).unwrap();
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.beta[0][1] - 6.5).abs() < 1e-12);
        assert_eq!(fit.beta[0][1], fit.beta[0][2]);
        let all = ClusterPartition::from_labels(ds.schemas(), &[vec![0, 0, 0]], None);
        let fit = refit(&ds, &all).unwrap();
        assert!((fit.intercept - 38.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn refit_rank_deficient() {
        let ds = Dataset::new(nominal(3), vec![1.0, 2.0], vec![vec![0, 1]]).unwrap();
        let part = ClusterPartition::singletons(ds.schemas(), &[vec![0.0; 3]]);
        assert!(matches!(refit(&ds, &part), Err(Error::RankDeficient)));
    }

    #[test]
    fn json_round_trip() {
        let p = extract_clusters(&nominal(4), &[vec![0.0, 1.0, 1.0, -2.0]], 1e-8);
        let s = serde_json::to_string(&p).unwrap();
        let back: ClusterPartition = serde_json::from_str(&s).unwrap();
        assert_eq!(p, back);
    }
}
