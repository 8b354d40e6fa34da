//! Regularization paths on the augmented problem.
//!
//! The grid holds `lambda = 0` followed by `grid_size - 1` log-spaced values
//! ending at `lambda_max`; it is solved from the top down with warm starts.
//! The `n` data rows are compressed to their triangular QR factor first, which
//! leaves the objective unchanged up to a constant.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::lasso::{lambda_max, lasso_objective, solve_lasso_with, LassoOptions, LassoSolution};
use crate::coding::{AugmentedProblem, BlockKind, ThetaLayout};
use crate::data::Scale;
use crate::error::{Error, Result};
use crate::linalg::least_squares;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOptions {
    pub grid_size: usize,
    /// Smallest positive lambda as a fraction of `lambda_max`.
    pub lambda_min_ratio: f64,
    /// Also solve the `gamma = 0` companion problem for the precision bound.
    pub precision: bool,
    #[serde(skip)]
    pub lasso: LassoOptions,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            grid_size: 100,
            lambda_min_ratio: 1e-4,
            precision: true,
            lasso: LassoOptions::default(),
        }
    }
}

impl PathOptions {
    pub fn with_grid(grid_size: usize) -> Self {
        PathOptions {
            grid_size,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionReport {
    /// `||A theta||^2` on the raw (unweighted) differences.
    pub delta: f64,
    pub bound: f64,
    pub satisfied: bool,
}

impl PrecisionReport {
    pub const SLACK: f64 = 1e-12;

    pub fn new(delta: f64, bound: f64) -> Self {
        PrecisionReport {
            delta,
            bound,
            satisfied: delta <= bound + Self::SLACK,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub s_ratio: f64,
    /// Solver-scale parameters (weight times difference).
    pub theta: DVector<f64>,
    /// Per factor, `k + 1` coefficients with the reference first.
    pub beta: Vec<Vec<f64>>,
    pub intercept: f64,
    pub precision: Option<PrecisionReport>,
    pub objective: f64,
    pub kkt_violation: f64,
    pub sweeps: usize,
    pub active_set_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PathResult {
    /// Ordered by increasing lambda: index 0 is the unpenalized fit.
    pub points: Vec<PathPoint>,
    /// Weighted L1 norm of the least-squares differences.
    pub ols_theta_l1: f64,
    pub lambda_max: f64,
    pub gamma: f64,
    pub layout: ThetaLayout,
    pub weights: Vec<f64>,
    pub scales: Vec<Scale>,
    y_mean: f64,
    column_means: Vec<f64>,
}

impl PathResult {
    pub fn grid(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.lambda, p.s_ratio)).collect()
    }

    pub fn intercept_for(&self, beta: &[Vec<f64>]) -> f64 {
        intercept(self.y_mean, &self.column_means, beta)
    }

    /// Solver-scale parameters at an arbitrary `s_ratio`, linearly
    /// interpolated between the bracketing grid points.
    pub fn theta_at_s_ratio(&self, s: f64) -> DVector<f64> {
        let s = s.clamp(0.0, 1.0);
        let pts = &self.points;
        if s >= pts[0].s_ratio {
            return pts[0].theta.clone();
        }
        for g in 0..pts.len() - 1 {
            let (hi, lo) = (&pts[g], &pts[g + 1]);
            if s >= lo.s_ratio {
                if s == lo.s_ratio {
                    return lo.theta.clone();
                }
                let span = hi.s_ratio - lo.s_ratio;
                let t = if span > 0.0 { (s - lo.s_ratio) / span } else { 1.0 };
                return &lo.theta * (1.0 - t) + &hi.theta * t;
            }
        }
        pts[pts.len() - 1].theta.clone()
    }

    /// Coefficients and intercept at `s_ratio`.
    pub fn coefficients_at(&self, s: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        let theta = self.theta_at_s_ratio(s);
        let beta = fused_back_transform(&theta, &self.layout, &self.weights)?;
        let b0 = self.intercept_for(&beta);
        Ok((beta, b0))
    }
}

fn intercept(y_mean: f64, column_means: &[f64], beta: &[Vec<f64>]) -> f64 {
    let flat = beta.iter().flat_map(|b| b[1..].iter());
    y_mean - column_means.iter().zip(flat).map(|(m, b)| m * b).sum::<f64>()
}

/// Raw back-transformation: nominal `beta_i = theta_i0 / w_i0`, ordinal
/// coefficients are cumulative sums of `delta_i = theta_i / w_i`.
pub fn back_transform(theta: &DVector<f64>, layout: &ThetaLayout, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    if theta.len() != layout.len || weights.len() != layout.len {
        return Err(Error::LayoutMismatch(format!(
            "parameter vector of length {} and {} weights for layout of length {}",
            theta.len(),
            weights.len(),
            layout.len
        )));
    }
    let mut out = Vec::with_capacity(layout.blocks.len());
    for block in &layout.blocks {
        let raw = |pos: usize| theta[block.offset + pos] / weights[block.offset + pos];
        let mut beta = vec![0.0; block.k + 1];
        match block.kind {
            BlockKind::Nominal { .. } => {
                for i in 1..=block.k {
                    beta[i] = raw(i - 1);
                }
            }
            BlockKind::Ordinal => {
                for i in 1..=block.k {
                    beta[i] = beta[i - 1] + raw(i - 1);
                }
            }
        }
        out.push(beta);
    }
    Ok(out)
}

/// [`back_transform`] followed by exact fusion of nominal levels whose
/// difference parameter is exactly zero: each group linked by zero
/// differences gets its mean coefficient, or 0 when it contains the reference.
///
/// The augmented formulation meets the restrictions only up to `Delta`, so a
/// zero `theta_ij` leaves `beta_i - beta_j` tiny but not zero.
pub fn fused_back_transform(theta: &DVector<f64>, layout: &ThetaLayout, weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mut beta = back_transform(theta, layout, weights)?;
    for (block, b) in layout.blocks.iter().zip(beta.iter_mut()) {
        let BlockKind::Nominal { pairs } = &block.kind else {
            continue;
        };
        let mut parent: Vec<usize> = (0..=block.k).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        let mut any = false;
        for (pos, &(i, j)) in pairs.iter().enumerate() {
            if theta[block.offset + pos] == 0.0 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                    any = true;
                }
            }
        }
        if !any {
            continue;
        }
        let mut sums = vec![(0.0, 0usize); block.k + 1];
        for level in 0..=block.k {
            let r = find(&mut parent, level);
            sums[r].0 += b[level];
            sums[r].1 += 1;
        }
        for level in 0..=block.k {
            let r = find(&mut parent, level);
            // root 0 is the reference group
            b[level] = if r == 0 { 0.0 } else { sums[r].0 / sums[r].1 as f64 };
        }
    }
    Ok(beta)
}

/// `||A theta||^2` for solver-scale parameters.
pub fn restriction_violation(problem: &AugmentedProblem, theta: &DVector<f64>) -> f64 {
    if problem.r() == 0 {
        return 0.0;
    }
    (&problem.a * problem.unscale(theta)).norm_squared()
}

/// Lambda values of the grid in increasing order, starting with 0.
pub fn lambda_grid(lambda_max: f64, grid_size: usize, min_ratio: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let m = grid_size - 1;
    if m == 1 {
        grid.push(lambda_max);
        return grid;
    }
    let (lo, hi) = ((lambda_max * min_ratio).ln(), lambda_max.ln());
    for g in 0..m {
        let v = if g == m - 1 {
            lambda_max
        } else {
            (lo + (hi - lo) * g as f64 / (m - 1) as f64).exp()
        };
        grid.push(v);
    }
    grid
}

pub fn path(problem: &AugmentedProblem, grid_size: usize) -> Result<PathResult> {
    path_with(problem, &PathOptions::with_grid(grid_size))
}

pub fn path_with(problem: &AugmentedProblem, opts: &PathOptions) -> Result<PathResult> {
    if opts.grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be at least 2, got {}",
            opts.grid_size
        )));
    }
    if !(opts.lambda_min_ratio > 0.0 && opts.lambda_min_ratio < 1.0) {
        return Err(Error::InvalidArgument("lambda_min_ratio must lie in (0, 1)".into()));
    }
    let (n, q, r) = (problem.n(), problem.q(), problem.r());
    let data = problem.z_tilde.rows(0, n).into_owned();
    let y_c = problem.y_tilde.rows(0, n).into_owned();

    // compressed data block: R (m x q) and Q'y
    let (data_r, qty) = if n > q {
        let qr = data.clone().qr();
        let mut qty = y_c.clone();
        qr.q_tr_mul(&mut qty);
        (qr.r(), qty.rows(0, q).into_owned())
    } else {
        (data.clone(), y_c.clone())
    };
    let m = data_r.nrows();
    let mut design = DMatrix::zeros(m + r, q);
    design.view_mut((0, 0), (m, q)).copy_from(&data_r);
    if r > 0 {
        design.view_mut((m, 0), (r, q)).copy_from(&problem.z_tilde.rows(n, r));
    }
    let mut response = DVector::zeros(m + r);
    response.rows_mut(0, m).copy_from(&qty);

    let lmax = lambda_max(&problem.z_tilde, &problem.y_tilde);
    let grid = lambda_grid(
        if lmax > 0.0 { lmax } else { 1.0 },
        opts.grid_size,
        opts.lambda_min_ratio,
    );

    // gamma = 0 companion: only columns carrying data
    let data_cols: Vec<usize> = (0..q).filter(|&j| data.column(j).norm_squared() > 0.0).collect();
    let plain = data_r.select_columns(&data_cols);

    let ols_theta_l1 = match least_squares(&problem.design.x, &problem.design.y_centered) {
        Some(b) => {
            let beta = split_flat(&problem.layout, b.as_slice());
            let theta = problem.layout.theta_from_beta(&beta)?;
            theta.iter().zip(&problem.weights).map(|(t, w)| (t * w).abs()).sum()
        }
        None => f64::NAN,
    };

    let mut points: Vec<Option<PathPoint>> = vec![None; grid.len()];
    let mut warm = DVector::zeros(q);
    let mut warm_plain = DVector::zeros(data_cols.len());
    for g in (0..grid.len()).rev() {
        let lambda = grid[g];
        // Above lambda_max of the uncompressed problem the solution is exactly
        // zero; the compressed copy can miss that by rounding.
        let at_top = lmax > 0.0 && lambda >= lmax;
        let sol = if at_top {
            zero_solution(&design, &response, q)
        } else {
            solve_lasso_with(&design, &response, lambda, Some(&warm), &opts.lasso)?
        };
        warm = sol.theta.clone();
        let precision = if opts.precision {
            warm_plain = if at_top {
                DVector::zeros(data_cols.len())
            } else {
                solve_lasso_with(&plain, &qty, lambda, Some(&warm_plain), &opts.lasso)?.theta
            };
            Some((restriction_violation(problem, &sol.theta), warm_plain.lp_norm(1)))
        } else {
            None
        };
        let beta = fused_back_transform(&sol.theta, &problem.layout, &problem.weights)?;
        let b0 = intercept(problem.design.y_mean, &problem.design.column_means, &beta);
        points[g] = Some(PathPoint {
            lambda,
            s_ratio: 0.0,
            theta: sol.theta,
            beta,
            intercept: b0,
            precision: precision.map(|(delta, plain_l1)| {
                // placeholder; the least-squares norm is known below
                PrecisionReport::new(delta, plain_l1)
            }),
            objective: sol.objective,
            kkt_violation: sol.kkt_violation,
            sweeps: sol.sweeps,
            active_set_iterations: sol.active_set_iterations,
        });
    }
    let mut points: Vec<PathPoint> = points
        .into_iter()
        .map(|p| p.expect("every grid point solved"))
        .collect();
    let s_max = points[0].theta.lp_norm(1);
    let ols_theta_l1 = if ols_theta_l1.is_nan() { s_max } else { ols_theta_l1 };
    for p in points.iter_mut() {
        let l1 = p.theta.lp_norm(1);
        p.s_ratio = if s_max > 0.0 {
            (l1 / s_max).min(1.0)
        } else if p.lambda == 0.0 {
            1.0
        } else {
            0.0
        };
        if let Some(rep) = p.precision {
            let plain_l1 = rep.bound;
            p.precision = Some(PrecisionReport::new(
                rep.delta,
                p.lambda * (ols_theta_l1 - plain_l1) / problem.gamma,
            ));
        }
    }
    points[0].s_ratio = 1.0;
    Ok(PathResult {
        points,
        ols_theta_l1,
        lambda_max: lmax,
        gamma: problem.gamma,
        layout: problem.layout.clone(),
        weights: problem.weights.clone(),
        scales: problem
            .layout
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Nominal { .. } => Scale::Nominal,
                BlockKind::Ordinal => Scale::Ordinal,
            })
            .collect(),
        y_mean: problem.design.y_mean,
        column_means: problem.design.column_means.clone(),
    })
}

fn zero_solution(design: &DMatrix<f64>, response: &DVector<f64>, q: usize) -> LassoSolution {
    let theta = DVector::zeros(q);
    LassoSolution {
        objective: lasso_objective(design, response, &theta, 0.0),
        theta,
        sweeps: 0,
        active_set_iterations: 0,
        kkt_violation: 0.0,
    }
}

fn split_flat(layout: &ThetaLayout, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut pos = 0;
    layout
        .blocks
        .iter()
        .map(|b| {
            let mut v = vec![0.0];
            v.extend_from_slice(&flat[pos..pos + b.k]);
            pos += b.k;
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinal_back_transform_cumulates() {
        let layout = ThetaLayout::new(&[(Scale::Ordinal, 3)]);
        let theta = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let beta = back_transform(&theta, &layout, &[1.0; 3]).unwrap();
        assert_eq!(beta, vec![vec![0.0, 1.0, 3.0, 6.0]]);
    }

    #[test]
    fn zero_nominal_block() {
        let layout = ThetaLayout::new(&[(Scale::Nominal, 3)]);
        let theta = DVector::zeros(6);
        let beta = back_transform(&theta, &layout, &[0.5; 6]).unwrap();
        assert_eq!(beta, vec![vec![0.0; 4]]);
    }

    #[test]
    fn weights_are_undone() {
        let layout = ThetaLayout::new(&[(Scale::Nominal, 2)]);
        let theta = DVector::from_vec(vec![1.0, 2.0, 0.5]);
        let beta = back_transform(&theta, &layout, &[2.0, 4.0, 1.0]).unwrap();
        assert_eq!(beta, vec![vec![0.0, 0.5, 0.5]]);
    }

    #[test]
    fn layout_mismatch() {
        let layout = ThetaLayout::new(&[(Scale::Nominal, 2)]);
        assert!(matches!(
            back_transform(&DVector::zeros(2), &layout, &[1.0; 3]),
            Err(Error::LayoutMismatch(_))
        ));
    }

    #[test]
    fn zero_differences_fuse_exactly() {
        // k = 3: pairs (1,0),(2,0),(3,0),(2,1),(3,1),(3,2)
        let layout = ThetaLayout::new(&[(Scale::Nominal, 3)]);
        let theta = DVector::from_vec(vec![1.0, 1.0 + 1e-7, 3.0, 0.0, 2.0, 2.0]);
        let beta = fused_back_transform(&theta, &layout, &[1.0; 6]).unwrap();
        assert_eq!(beta[0][1], beta[0][2]);
        assert!((beta[0][1] - (1.0 + 0.5e-7)).abs() < 1e-15);
        assert_eq!(beta[0][3], 3.0);

        let theta = DVector::from_vec(vec![0.0, 1e-7, 3.0, 0.0, 2.0, 2.0]);
        let beta = fused_back_transform(&theta, &layout, &[1.0; 6]).unwrap();
        assert_eq!(beta[0][..3], [0.0, 0.0, 0.0]);
    }

    #[test]
    fn grid_shape() {
        let g = lambda_grid(10.0, 5, 1e-4);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[4], 10.0);
        assert!((g[1] - 1e-3).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(lambda_grid(3.0, 2, 0.1), vec![0.0, 3.0]);
    }
}
