//! Proximal-gradient (ISTA) reference solver with backtracking line search.
//!
//! Shares nothing with the coordinate-descent path beyond the soft-threshold
//! formula; it exists to cross-check [`super::solve_lasso`].

use nalgebra::{DMatrix, DVector};

use super::lasso::soft_threshold;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct IstaOptions {
    /// Relative objective change that ends the iteration.
    pub objective_tol: f64,
    /// Largest iterate change (relative to `max(1, |theta|_inf)`) also
    /// required at termination.
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for IstaOptions {
    fn default() -> Self {
        IstaOptions {
            objective_tol: 1e-14,
            step_tol: 1e-13,
            max_iterations: 5_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IstaSolution {
    pub theta: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
}

pub fn ista_oracle(design: &DMatrix<f64>, response: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    ista_with(design, response, lambda, &IstaOptions::default()).map(|s| s.theta)
}

pub fn ista_with(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    lambda: f64,
    opts: &IstaOptions,
) -> Result<IstaSolution> {
    if design.nrows() != response.len() {
        return Err(Error::ShapeMismatch("design/response rows differ".into()));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    let smooth = |x: &DVector<f64>| (response - design * x).norm_squared();
    let q = design.ncols();
    let mut x = DVector::zeros(q);
    let mut fx = smooth(&x);
    let mut step = 1.0;
    for it in 1..=opts.max_iterations {
        let grad = design.tr_mul(&(response - design * &x)) * -2.0;
        let (x_new, f_new) = loop {
            let cand = (&x - &grad * step).map(|v| soft_threshold(v, step * lambda));
            let diff = &cand - &x;
            let f_cand = smooth(&cand);
            let model = fx + grad.dot(&diff) + diff.norm_squared() / (2.0 * step);
            if f_cand <= model + 8.0 * f64::EPSILON * fx.abs().max(1.0) || step < 1e-300 {
                break (cand, f_cand);
            }
            step *= 0.5;
        };
        let obj_old = fx + lambda * x.lp_norm(1);
        let obj_new = f_new + lambda * x_new.lp_norm(1);
        let dx = (&x_new - &x).amax();
        let scale = x_new.amax().max(1.0);
        x = x_new;
        fx = f_new;
        if (obj_old - obj_new).abs() <= opts.objective_tol * obj_old.abs().max(1.0) && dx <= opts.step_tol * scale {
            return Ok(IstaSolution {
                objective: obj_new,
                theta: x,
                iterations: it,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        detail: "proximal gradient".into(),
    })
}
