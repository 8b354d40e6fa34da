//! Cross-validation over the `s / s_max` axis and information criteria.
//!
//! Every fold computes its own weights and its own path; scores are compared
//! on a common equally spaced `s_ratio` grid, each fold mapping the grid onto
//! its path by interpolation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding::{build_augmented, DEFAULT_SQRT_GAMMA};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{mean_squared_error, ols_coefficients, predict, residual_sum_of_squares};
use crate::solver::{path_with, PathOptions, PathResult};
use crate::structure::{degrees_of_freedom, extract_clusters, refit, DEFAULT_CLUSTER_TOL};
use crate::weights::{build_weights, WeightConfig};

/// Relative gap below which two mean scores count as tied.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k_folds: usize,
    pub grid_size: usize,
    pub seed: u64,
    pub weights: WeightConfig,
    pub refit_inside: bool,
    pub gamma: f64,
    pub cluster_tol: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k_folds: 5,
            grid_size: 100,
            seed: 0,
            weights: WeightConfig::default(),
            refit_inside: false,
            gamma: DEFAULT_SQRT_GAMMA * DEFAULT_SQRT_GAMMA,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

/// Fold index of every observation: a seeded shuffle dealt round-robin, so
/// fold sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &obs) in perm.iter().enumerate() {
        folds[obs] = pos % k;
    }
    folds
}

/// Descending grid `1, 1 - 1/(G-1), ..., 0`.
pub fn s_ratio_grid(size: usize) -> Vec<f64> {
    (0..size)
        .map(|g| {
            if g + 1 == size {
                0.0
            } else {
                1.0 - g as f64 / (size - 1) as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct FoldPath {
    pub train: Dataset,
    pub test: Dataset,
    pub path: PathResult,
}

/// Per-fold paths, reusable for curves with and without refitting.
#[derive(Debug, Clone)]
pub struct CvPaths {
    pub config: CvConfig,
    pub folds: Vec<FoldPath>,
}

impl CvPaths {
    pub fn compute(ds: &Dataset, config: &CvConfig) -> Result<Self> {
        if config.k_folds < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 folds, got {}",
                config.k_folds
            )));
        }
        Self::compute_with_assignment(ds, config, &fold_assignment(ds.n(), config.k_folds, config.seed))
    }

    /// Like [`CvPaths::compute`] with an explicit fold index per observation.
    pub fn compute_with_assignment(ds: &Dataset, config: &CvConfig, assignment: &[usize]) -> Result<Self> {
        let k = config.k_folds;
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
        }
        if ds.n() < 2 * k {
            return Err(Error::InvalidArgument(format!(
                "{} observations are too few for {k} folds",
                ds.n()
            )));
        }
        if config.grid_size < 2 {
            return Err(Error::InvalidArgument("grid size must be at least 2".into()));
        }
        if assignment.len() != ds.n() || assignment.iter().any(|&f| f >= k) {
            return Err(Error::InvalidArgument(format!(
                "fold assignment must give each of {} observations a fold below {k}",
                ds.n()
            )));
        }
        let folds = (0..k)
            .into_par_iter()
            .map(|fold| {
                let (train_rows, test_rows): (Vec<usize>, Vec<usize>) =
                    (0..ds.n()).partition(|&i| assignment[i] != fold);
                let train = ds.subset(&train_rows)?;
                let test = ds.subset(&test_rows)?;
                ols_coefficients(&train).map_err(|_| Error::FoldRankDeficient { fold })?;
                let weights = build_weights(&train, &config.weights).map_err(|e| match e {
                    Error::OlsUnavailable => Error::FoldRankDeficient { fold },
                    other => other,
                })?;
                let problem = build_augmented(&train, &weights, config.gamma)?;
                let opts = PathOptions {
                    grid_size: config.grid_size,
                    precision: false,
                    ..PathOptions::default()
                };
                let path = path_with(&problem, &opts)?;
                Ok(FoldPath { train, test, path })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CvPaths { config: *config, folds })
    }

    pub fn curve(&self, refit_inside: bool) -> Result<CvCurve> {
        let grid = s_ratio_grid(self.config.grid_size);
        let per_fold = self
            .folds
            .par_iter()
            .map(|f| {
                grid.iter()
                    .map(|&s| fold_score(f, s, refit_inside, self.config.cluster_tol))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let k = self.folds.len();
        let fold_scores: Vec<Vec<f64>> = (0..grid.len())
            .map(|g| per_fold.iter().map(|f| f[g]).collect())
            .collect();
        let mean_score: Vec<f64> = fold_scores
            .iter()
            .map(|row| row.iter().sum::<f64>() / k as f64)
            .collect();
        let chosen_index = choose(&grid, &mean_score);
        Ok(CvCurve {
            chosen_s_ratio: grid[chosen_index],
            chosen_index,
            s_grid: grid,
            mean_score,
            fold_scores,
            seed: self.config.seed,
            k_folds: k,
            refit_inside,
        })
    }
}

fn fold_score(f: &FoldPath, s: f64, refit_inside: bool, tol: f64) -> Result<f64> {
    let (mut beta, mut intercept) = f.path.coefficients_at(s)?;
    if refit_inside {
        let partition = extract_clusters(f.train.schemas(), &beta, tol);
        match refit(&f.train, &partition) {
            Ok(r) => {
                beta = r.beta;
                intercept = r.intercept;
            }
            // a cluster made only of levels absent from the training part;
            // the penalized estimate stands in
            Err(Error::RankDeficient) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(mean_squared_error(f.test.y(), &predict(&f.test, &beta, intercept)))
}

/// Index of the minimal score; near-ties go to the smallest `s_ratio`.
fn choose(grid: &[f64], scores: &[f64]) -> usize {
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = best + TIE_TOL * best.abs();
    (0..grid.len())
        .filter(|&g| scores[g] <= limit)
        .min_by(|&a, &b| grid[a].total_cmp(&grid[b]))
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvCurve {
    /// Descending `s_ratio` values.
    pub s_grid: Vec<f64>,
    pub mean_score: Vec<f64>,
    /// `fold_scores[g][f]`: test MSE of fold `f` at grid point `g`.
    pub fold_scores: Vec<Vec<f64>>,
    pub chosen_s_ratio: f64,
    pub chosen_index: usize,
    pub seed: u64,
    pub k_folds: usize,
    pub refit_inside: bool,
}

impl CvCurve {
    /// Rows `s_ratio, mean_score, fold_1, ..., fold_K`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["s_ratio".to_string(), "mean_score".to_string()];
        header.extend((1..=self.k_folds).map(|f| format!("fold_{f}")));
        w.write_record(&header)?;
        for g in 0..self.s_grid.len() {
            let mut row = vec![fmt(self.s_grid[g]), fmt(self.mean_score[g])];
            row.extend(self.fold_scores[g].iter().map(|v| fmt(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

pub fn kfold_cv(ds: &Dataset, config: &CvConfig) -> Result<CvCurve> {
    CvPaths::compute(ds, config)?.curve(config.refit_inside)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IcPoint {
    pub lambda: f64,
    pub s_ratio: f64,
    pub rss: f64,
    pub df: usize,
    pub score: f64,
}

/// `n log(RSS / n) + c * df` at every path point, `c = 2` (AIC) or `log n`
/// (BIC). The partition extracted at the point fixes df; RSS is that of the
/// least-squares refit on the partition (the penalized fit if the refit is
/// rank deficient).
pub fn information_criterion(ds: &Dataset, path: &PathResult, kind: Criterion, tol: f64) -> Vec<IcPoint> {
    let n = ds.n() as f64;
    let c = match kind {
        Criterion::Aic => 2.0,
        Criterion::Bic => n.ln(),
    };
    path.points
        .iter()
        .map(|p| {
            let partition = extract_clusters(ds.schemas(), &p.beta, tol);
            let rss = match refit(ds, &partition) {
                Ok(r) => r.rss,
                Err(_) => residual_sum_of_squares(ds.y(), &predict(ds, &p.beta, p.intercept)),
            };
            let df = degrees_of_freedom(&partition);
            IcPoint {
                lambda: p.lambda,
                s_ratio: p.s_ratio,
                rss,
                df,
                score: n * (rss / n).ln() + c * df as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_partition() {
        for (n, k) in [(10, 3), (11, 11), (100, 7)] {
            let f = fold_assignment(n, k, 42);
            let mut sizes = vec![0; k];
            for &x in &f {
                sizes[x] += 1;
            }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            assert!(hi - lo <= 1);
            assert_eq!(f, fold_assignment(n, k, 42));
        }
    }

    #[test]
    fn grid_descends_to_zero() {
        let g = s_ratio_grid(5);
        assert_eq!(g, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn ties_choose_smallest_s() {
        let grid = s_ratio_grid(4);
        assert_eq!(choose(&grid, &[1.0, 1.0, 1.0, 1.0]), 3);
        assert_eq!(choose(&grid, &[1.0, 0.5, 0.5 * (1.0 + 1e-13), 2.0]), 2);
        assert_eq!(choose(&grid, &[1.0, 0.5, 0.6, 2.0]), 1);
    }
}
