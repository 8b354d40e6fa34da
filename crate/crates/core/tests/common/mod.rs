#![allow(dead_code)]

use catfuse::{Dataset, FactorSchema, Scale};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random data set in which every level of every factor occurs at least
/// once, with a random additive signal plus Gaussian noise.
pub fn random_dataset(rng: &mut ChaCha8Rng, spec: &[(Scale, usize)], n: usize, noise: f64) -> Dataset {
    let schemas: Vec<FactorSchema> = spec
        .iter()
        .enumerate()
        .map(|(l, &(scale, levels))| FactorSchema::numbered(format!("f{l}"), scale, levels))
        .collect();
    let effects: Vec<Vec<f64>> = spec
        .iter()
        .map(|&(_, levels)| {
            let mut e: Vec<f64> = (0..levels).map(|_| rng.random_range(-2.0..2.0)).collect();
            e[0] = 0.0;
            e
        })
        .collect();
    let mut codes: Vec<Vec<usize>> = Vec::new();
    for &(_, levels) in spec {
        let mut c: Vec<usize> = (0..n)
            .map(|i| if i < levels { i } else { rng.random_range(0..levels) })
            .collect();
        // shuffle so the guaranteed rows are not aligned across factors
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            c.swap(i, j);
        }
        codes.push(c);
    }
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let signal: f64 = codes.iter().zip(&effects).map(|(c, e)| e[c[i]]).sum();
            signal + noise * gaussian(rng)
        })
        .collect();
    Dataset::new(schemas, y, codes).expect("valid random data set")
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| gaussian(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| gaussian(rng))
}

/// Raw 0/1 dummy matrix with an intercept column first.
pub fn raw_design_with_intercept(ds: &Dataset) -> DMatrix<f64> {
    let p: usize = ds.schemas().iter().map(|s| s.num_levels() - 1).sum();
    let mut x = DMatrix::zeros(ds.n(), p + 1);
    let mut offset = 1;
    for l in 0..ds.num_factors() {
        for (i, &c) in ds.codes(l).iter().enumerate() {
            x[(i, 0)] = 1.0;
            if c > 0 {
                x[(i, offset + c - 1)] = 1.0;
            }
        }
        offset += ds.schemas()[l].num_levels() - 1;
    }
    x
}

/// Least squares via the normal equations, returning per-factor
/// coefficients (reference first) and the intercept.
pub fn normal_equations_ols(ds: &Dataset) -> (Vec<Vec<f64>>, f64) {
    let x = raw_design_with_intercept(ds);
    let y = DVector::from_column_slice(ds.y());
    let xtx = x.tr_mul(&x);
    let xty = x.tr_mul(&y);
    let b = xtx.cholesky().expect("full rank design").solve(&xty);
    let mut beta = Vec::new();
    let mut offset = 1;
    for s in ds.schemas() {
        let k = s.num_levels() - 1;
        let mut v = vec![0.0];
        v.extend(b.rows(offset, k).iter());
        beta.push(v);
        offset += k;
    }
    (beta, b[0])
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
