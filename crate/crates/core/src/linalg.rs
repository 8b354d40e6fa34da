//! Dense least-squares helpers shared by OLS, refitting and the path solver.

use nalgebra::{DMatrix, DVector};

use crate::coding::dummy_design;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Relative threshold on `|R_jj| / max |R_ii|` below which a column is declared
/// linearly dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Householder QR least squares. Returns `None` when `x` has dependent columns.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let p = x.ncols();
    if p == 0 {
        return Some(DVector::zeros(0));
    }
    if x.nrows() < p {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    if scale == 0.0 || r.diagonal().iter().any(|d| d.abs() <= RANK_TOL * scale) {
        return None;
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, p).into_owned();
    r.solve_upper_triangular(&rhs)
}

/// Unpenalized least-squares dummy coefficients, one vector of length `k + 1`
/// per factor (reference entry 0), plus the intercept.
pub fn ols_coefficients(ds: &Dataset) -> Result<(Vec<Vec<f64>>, f64)> {
    let design = dummy_design(ds)?;
    let beta = least_squares(&design.x, &design.y_centered).ok_or(Error::OlsUnavailable)?;
    let intercept = design.intercept(beta.as_slice());
    Ok((split_by_factor(ds, beta.as_slice()), intercept))
}

/// Flat non-reference coefficients (factor by factor) to per-factor vectors
/// with a leading reference zero.
pub fn split_by_factor(ds: &Dataset, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(ds.num_factors());
    let mut pos = 0;
    for schema in ds.schemas() {
        let k = schema.k();
        let mut b = Vec::with_capacity(k + 1);
        b.push(0.0);
        b.extend_from_slice(&flat[pos..pos + k]);
        pos += k;
        out.push(b);
    }
    out
}

/// Fitted values `intercept + sum_l beta_l[level]` for every observation.
pub fn predict(ds: &Dataset, beta: &[Vec<f64>], intercept: f64) -> Vec<f64> {
    let mut fitted = vec![intercept; ds.n()];
    for (l, b) in beta.iter().enumerate() {
        for (f, &level) in fitted.iter_mut().zip(ds.codes(l)) {
            *f += b[level];
        }
    }
    fitted
}

pub fn mean_squared_error(y: &[f64], fitted: &[f64]) -> f64 {
    residual_sum_of_squares(y, fitted) / y.len() as f64
}

pub fn residual_sum_of_squares(y: &[f64], fitted: &[f64]) -> f64 {
    y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum()
}
