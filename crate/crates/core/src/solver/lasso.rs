//! Unit-weight Lasso: `min_theta ||y - D theta||^2 + lambda * sum |theta_j|`.
//!
//! Cyclic coordinate descent with soft-thresholding does the bulk of the work
//! on well-conditioned problems. The augmented problems built from restriction
//! rows are extremely ill-conditioned (column scales differ by `sqrt(gamma)`),
//! where coordinate descent crawls; every solve is therefore finished by an
//! active-set (feature-sign) step that solves the KKT system on the current
//! support exactly with a Householder QR of the support columns, and accepted
//! only once the KKT conditions hold to rounding accuracy.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Coordinate descent stops when the largest coefficient change in a
    /// sweep falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Sweeps run before the first active-set attempt.
    pub warmup_sweeps: usize,
    pub max_active_set_iterations: usize,
    /// Loose KKT tolerance accepted when the active-set step cannot be used.
    pub kkt_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tol: 1e-10,
            max_sweeps: 100_000,
            warmup_sweeps: 10,
            max_active_set_iterations: 5_000,
            kkt_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub theta: DVector<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub active_set_iterations: usize,
    /// Largest KKT violation, `max_j (|g_j + lambda sign theta_j|)` on the
    /// support and `max_j (|g_j| - lambda)_+` off it.
    pub kkt_violation: f64,
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Smallest lambda with an all-zero solution: `2 max_j |d_j' y|`.
pub fn lambda_max(design: &DMatrix<f64>, response: &DVector<f64>) -> f64 {
    (design.tr_mul(response)).amax() * 2.0
}

pub fn lasso_objective(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
    let r = response - design * theta;
    r.norm_squared() + lambda * theta.lp_norm(1)
}

/// Gradient of the smooth part, `-2 D' (y - D theta)`.
pub fn smooth_gradient(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let r = response - design * theta;
    design.tr_mul(&r) * -2.0
}

/// Largest KKT violation of `theta` (see [`LassoSolution::kkt_violation`]).
pub fn kkt_violation(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> f64 {
    let g = smooth_gradient(design, response, theta);
    violations(&g, theta, lambda).into_iter().fold(0.0, f64::max)
}

fn violations(g: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> Vec<f64> {
    g.iter()
        .zip(theta.iter())
        .map(|(&gj, &tj)| {
            if tj != 0.0 {
                (gj + lambda * tj.signum()).abs()
            } else {
                (gj.abs() - lambda).max(0.0)
            }
        })
        .collect()
}

/// Per-coordinate bound on the rounding error of the computed gradient.
fn gradient_noise(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>) -> DVector<f64> {
    let abs_d = design.abs();
    let row_mag = response.abs() + &abs_d * theta.abs();
    abs_d.tr_mul(&row_mag) * (8.0 * f64::EPSILON)
}

fn kkt_holds(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>, lambda: f64) -> bool {
    let g = smooth_gradient(design, response, theta);
    let noise = gradient_noise(design, response, theta);
    let base = 1e-9 * lambda.max(1.0);
    violations(&g, theta, lambda)
        .iter()
        .zip(noise.iter())
        .all(|(v, nz)| *v <= base + nz)
}

/// Solve with default options; returns the coefficient vector.
pub fn solve_lasso(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    lambda: f64,
    warm_start: Option<&DVector<f64>>,
) -> Result<DVector<f64>> {
    solve_lasso_with(design, response, lambda, warm_start, &LassoOptions::default()).map(|s| s.theta)
}

pub fn solve_lasso_with(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    lambda: f64,
    warm_start: Option<&DVector<f64>>,
    opts: &LassoOptions,
) -> Result<LassoSolution> {
    let (m, q) = design.shape();
    if response.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "design has {m} rows, response has {}",
            response.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let finish = |theta: DVector<f64>, sweeps: usize, iters: usize| {
        let objective = lasso_objective(design, response, &theta, lambda);
        let kkt = kkt_violation(design, response, &theta, lambda);
        LassoSolution {
            theta,
            objective,
            sweeps,
            active_set_iterations: iters,
            kkt_violation: kkt,
        }
    };
    if q == 0 || lambda >= lambda_max(design, response) {
        return Ok(finish(DVector::zeros(q), 0, 0));
    }
    let mut theta = match warm_start {
        Some(w) if w.len() == q => w.clone(),
        Some(w) => {
            return Err(Error::ShapeMismatch(format!(
                "warm start has {} entries, expected {q}",
                w.len()
            )))
        }
        None => DVector::zeros(q),
    };

    let mut cd = CoordinateDescent::new(design, response, &theta);
    let mut sweeps = 0;
    let mut iters = 0;
    let mut converged = false;
    while sweeps < opts.warmup_sweeps.min(opts.max_sweeps) {
        sweeps += 1;
        if cd.sweep(design, &mut theta, lambda) < opts.tol {
            converged = true;
            break;
        }
    }
    let mut chunk = 100;
    loop {
        let mut candidate = theta.clone();
        if let Ok(n) = feature_sign(design, response, lambda, &mut candidate, opts.max_active_set_iterations) {
            iters += n;
            if kkt_holds(design, response, &candidate, lambda) {
                return Ok(finish(candidate, sweeps, iters));
            }
        }
        if converged || sweeps >= opts.max_sweeps {
            break;
        }
        // active set step failed: continue plain coordinate descent for a while
        let stop = (sweeps + chunk).min(opts.max_sweeps);
        while sweeps < stop {
            sweeps += 1;
            if cd.sweep(design, &mut theta, lambda) < opts.tol {
                converged = true;
                break;
            }
        }
        chunk *= 4;
    }
    let sol = finish(theta, sweeps, iters);
    if converged && sol.kkt_violation <= opts.kkt_tol * lambda.max(1.0) {
        Ok(sol)
    } else {
        Err(Error::NotConverged {
            iterations: sweeps,
            detail: format!("KKT violation {:.3e} at lambda {lambda:.6e}", sol.kkt_violation),
        })
    }
}

/// Residual-based cyclic coordinate descent state.
struct CoordinateDescent {
    residual: DVector<f64>,
    col_sq: Vec<f64>,
}

impl CoordinateDescent {
    fn new(design: &DMatrix<f64>, response: &DVector<f64>, theta: &DVector<f64>) -> Self {
        CoordinateDescent {
            residual: response - design * theta,
            col_sq: design.column_iter().map(|c| c.norm_squared()).collect(),
        }
    }

    /// One sweep; returns the largest absolute coefficient change.
    fn sweep(&mut self, design: &DMatrix<f64>, theta: &mut DVector<f64>, lambda: f64) -> f64 {
        let mut max_change: f64 = 0.0;
        for j in 0..theta.len() {
            let cs = self.col_sq[j];
            if cs == 0.0 {
                theta[j] = 0.0;
                continue;
            }
            let col = design.column(j);
            let old = theta[j];
            let rho = col.dot(&self.residual) + cs * old;
            let new = soft_threshold(rho, lambda / 2.0) / cs;
            if new != old {
                self.residual.axpy(old - new, &col, 1.0);
                theta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }
}

/// Feature-sign search started from `theta`. Returns the number of
/// active-set iterations, or an error when a support system is singular or no
/// descent is possible before optimality is reached.
fn feature_sign(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    lambda: f64,
    theta: &mut DVector<f64>,
    max_iter: usize,
) -> std::result::Result<usize, ()> {
    let q = theta.len();
    let col_sq: Vec<f64> = design.column_iter().map(|c| c.norm_squared()).collect();
    for j in 0..q {
        if col_sq[j] == 0.0 {
            theta[j] = 0.0;
        }
    }
    let base_tol = 1e-9 * lambda.max(1.0);
    for iter in 1..=max_iter {
        let g = smooth_gradient(design, response, theta);
        let noise = gradient_noise(design, response, theta);
        let nonzero_ok = (0..q)
            .filter(|&j| theta[j] != 0.0)
            .all(|j| (g[j] + lambda * theta[j].signum()).abs() <= base_tol + noise[j]);

        let mut support: Vec<usize> = (0..q).filter(|&j| theta[j] != 0.0).collect();
        let mut signs: Vec<f64> = support.iter().map(|&j| theta[j].signum()).collect();
        if nonzero_ok {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..q {
                if theta[j] != 0.0 || col_sq[j] == 0.0 {
                    continue;
                }
                let excess = g[j].abs() - lambda - base_tol - noise[j];
                if excess > 0.0 && best.is_none_or(|(_, e)| excess > e) {
                    best = Some((j, excess));
                }
            }
            match best {
                None => return Ok(iter - 1),
                Some((j, _)) => {
                    let pos = support.partition_point(|&s| s < j);
                    support.insert(pos, j);
                    signs.insert(pos, -g[j].signum());
                }
            }
        }

        let target = support_solution(design, response, lambda, &support, &signs).ok_or(())?;
        let current: Vec<f64> = support.iter().map(|&j| theta[j]).collect();
        let step: Vec<f64> = target.iter().zip(&current).map(|(t, c)| t - c).collect();

        // residual along the segment: r(t) = r0 - t u
        let r0 = response - design * &*theta;
        let mut u = DVector::zeros(design.nrows());
        for (&j, &s) in support.iter().zip(&step) {
            u.axpy(s, &design.column(j), 1.0);
        }
        let (rr, ru, uu) = (r0.norm_squared(), r0.dot(&u), u.norm_squared());
        let objective = |t: f64| {
            let l1: f64 = current.iter().zip(&step).map(|(c, s)| (c + t * s).abs()).sum();
            rr - 2.0 * t * ru + t * t * uu + lambda * l1
        };

        let mut best_t = 1.0;
        let mut best_zero: Option<usize> = None;
        let mut best_f = objective(1.0);
        for (idx, (&c, &t_val)) in current.iter().zip(&target).enumerate() {
            if c != 0.0 && c * t_val <= 0.0 {
                let t = c / (c - t_val);
                if t > 0.0 && t < 1.0 {
                    let f = objective(t);
                    if f < best_f {
                        best_f = f;
                        best_t = t;
                        best_zero = Some(idx);
                    }
                }
            }
        }
        let f0 = objective(0.0);
        if best_f > f0 + 16.0 * f64::EPSILON * f0.abs().max(1.0) {
            return Err(());
        }
        let mut moved = best_zero.is_some();
        for (idx, &j) in support.iter().enumerate() {
            let v = current[idx] + best_t * step[idx];
            moved |= v != theta[j];
            theta[j] = v;
        }
        if let Some(idx) = best_zero {
            theta[support[idx]] = 0.0;
        }
        if !moved {
            return if kkt_holds(design, response, theta, lambda) {
                Ok(iter)
            } else {
                Err(())
            };
        }
    }
    Err(())
}

/// Minimizer of `||y - D_S x||^2 + lambda * signs' x` over the support columns.
fn support_solution(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    lambda: f64,
    support: &[usize],
    signs: &[f64],
) -> Option<Vec<f64>> {
    let s = support.len();
    if s == 0 {
        return Some(Vec::new());
    }
    if s > design.nrows() {
        return None;
    }
    let sub = design.select_columns(support);
    let qr = sub.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-13 * scale) {
        return None;
    }
    let mut qty = response.clone();
    qr.q_tr_mul(&mut qty);
    // R'R x = R'Q'y - lambda/2 * signs  =>  R x = Q'y - R^-T (lambda/2 signs)
    let sv = DVector::from_iterator(s, signs.iter().map(|v| v * lambda / 2.0));
    let v = r.tr_solve_upper_triangular(&sv)?;
    let rhs = qty.rows(0, s) - v;
    let mut x = r.solve_upper_triangular(&rhs)?;
    // iterative refinement: the stationarity residual g_S + lambda * signs is
    // amplified by the conditioning of D_S, so polish it with the same factor
    let mut best = f64::INFINITY;
    for _ in 0..4 {
        let resid = response - &sub * &x;
        let e = sub.tr_mul(&resid) * -2.0 + &sv * 2.0;
        let size = e.amax();
        if !(size < best) || size == 0.0 {
            break;
        }
        best = size;
        let z = r.tr_solve_upper_triangular(&(e * 0.5))?;
        let delta = r.solve_upper_triangular(&z)?;
        x -= delta;
    }
    Some(x.iter().copied().collect())
}
