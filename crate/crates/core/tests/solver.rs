mod common;

use catfuse::solver::{
    back_transform, fused_back_transform, ista_oracle, kkt_violation, lambda_max, lasso_objective, path_with,
    solve_lasso, PathOptions,
};
use catfuse::weights::standard_weights;
use catfuse::{build_augmented, path, Scale};
use common::{gaussian_matrix, gaussian_vector, max_abs_diff, normal_equations_ols, random_dataset, rng};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

#[test]
fn matches_proximal_gradient_on_random_problems() {
    let mut r = rng(2024);
    for case in 0..8 {
        let n = r.random_range(30..120);
        let p = r.random_range(2..25);
        let x = gaussian_matrix(&mut r, n, p);
        let y = gaussian_vector(&mut r, n);
        let lmax = lambda_max(&x, &y);
        for frac in [0.02, 0.3, 0.8] {
            let lambda = frac * lmax;
            let a = solve_lasso(&x, &y, lambda, None).unwrap();
            let b = ista_oracle(&x, &y, lambda).unwrap();
            let diff = (&a - &b).amax();
            assert!(diff <= 1e-6, "case {case} lambda {lambda}: diff {diff}");
        }
    }
}

#[test]
fn matches_proximal_gradient_on_mildly_augmented_problem() {
    let mut r = rng(5);
    let ds = random_dataset(&mut r, &[(Scale::Nominal, 4), (Scale::Ordinal, 4)], 60, 1.0);
    let w = standard_weights(&ds, true).unwrap();
    let problem = build_augmented(&ds, &w, 10.0).unwrap();
    let lmax = lambda_max(&problem.z_tilde, &problem.y_tilde);
    for frac in [0.01, 0.1, 0.5] {
        let lambda = frac * lmax;
        let a = solve_lasso(&problem.z_tilde, &problem.y_tilde, lambda, None).unwrap();
        let b = ista_oracle(&problem.z_tilde, &problem.y_tilde, lambda).unwrap();
        assert!((&a - &b).amax() <= 1e-6);
    }
}

#[test]
fn kkt_holds_along_moderately_stiff_path() {
    let mut r = rng(9);
    let ds = random_dataset(&mut r, &[(Scale::Nominal, 5), (Scale::Ordinal, 4)], 80, 1.0);
    let w = standard_weights(&ds, true).unwrap();
    let problem = build_augmented(&ds, &w, 1e4).unwrap();
    let result = path(&problem, 30).unwrap();
    for p in &result.points {
        let scaled = &p.theta;
        let v = kkt_violation(&problem.z_tilde, &problem.y_tilde, scaled, p.lambda);
        assert!(v <= 1e-6 * p.lambda.max(1.0), "lambda {}: violation {v}", p.lambda);
    }
}

#[test]
fn precision_bound_on_random_nominal_data() {
    for seed in 0..4 {
        let mut r = rng(100 + seed);
        let ds = random_dataset(&mut r, &[(Scale::Nominal, 6), (Scale::Nominal, 3)], 90, 1.0);
        let w = standard_weights(&ds, true).unwrap();
        let problem = build_augmented(&ds, &w, 1e10).unwrap();
        let result = path(&problem, 40).unwrap();
        for p in &result.points {
            let pr = p.precision.expect("precision computed");
            assert!(pr.satisfied, "seed {seed} lambda {}: {pr:?}", p.lambda);
        }
    }
}

#[test]
fn path_limits() {
    let mut r = rng(77);
    let ds = random_dataset(
        &mut r,
        &[(Scale::Nominal, 4), (Scale::Ordinal, 5), (Scale::Binary, 2)],
        120,
        0.5,
    );
    let w = standard_weights(&ds, true).unwrap();
    let problem = build_augmented(&ds, &w, 1e10).unwrap();
    let result = path(&problem, 25).unwrap();
    let (ols, ols_b0) = normal_equations_ols(&ds);
    let first = &result.points[0];
    assert_eq!(first.lambda, 0.0);
    assert_eq!(first.s_ratio, 1.0);
    assert!(max_abs_diff(&first.beta, &ols) < 1e-8);
    assert!((first.intercept - ols_b0).abs() < 1e-8);
    let last = result.points.last().unwrap();
    assert_eq!(last.lambda, result.lambda_max);
    assert_eq!(last.s_ratio, 0.0);
    assert!(last.beta.iter().flatten().all(|&b| b == 0.0));
    let mean = ds.y().iter().sum::<f64>() / ds.n() as f64;
    assert!((last.intercept - mean).abs() < 1e-10);
}

#[test]
fn s_ratio_is_monotone_along_path() {
    let mut r = rng(4);
    let ds = random_dataset(&mut r, &[(Scale::Nominal, 5)], 70, 1.0);
    let w = standard_weights(&ds, true).unwrap();
    let result = path(&build_augmented(&ds, &w, 1e10).unwrap(), 50).unwrap();
    for pair in result.points.windows(2) {
        assert!(pair[0].lambda < pair[1].lambda);
        assert!(pair[1].s_ratio <= pair[0].s_ratio + 1e-9);
    }
}

/// Centered split-coded design built directly from the codes, columns
/// divided by their weights.
fn direct_split_design(ds: &catfuse::Dataset, weights: &[f64]) -> DMatrix<f64> {
    let mut cols = Vec::new();
    for l in 0..ds.num_factors() {
        for t in 1..ds.schemas()[l].num_levels() {
            let raw: Vec<f64> = ds.codes(l).iter().map(|&c| if c >= t { 1.0 } else { 0.0 }).collect();
            let mean = raw.iter().sum::<f64>() / raw.len() as f64;
            cols.push(DVector::from_iterator(raw.len(), raw.iter().map(|v| v - mean)));
        }
    }
    let mut x = DMatrix::from_columns(&cols);
    for (j, w) in weights.iter().enumerate() {
        x.column_mut(j).scale_mut(1.0 / w);
    }
    x
}

#[test]
fn ordinal_only_path_equals_direct_split_lasso() {
    let mut r = rng(31);
    let ds = random_dataset(&mut r, &[(Scale::Ordinal, 5), (Scale::Ordinal, 4)], 100, 1.0);
    let w = standard_weights(&ds, true).unwrap();
    let problem = build_augmented(&ds, &w, 1e10).unwrap();
    assert_eq!(problem.r(), 0);
    let result = path_with(&problem, &PathOptions::with_grid(30)).unwrap();
    let flat: Vec<f64> = w.factors.iter().flat_map(|f| f.values.clone()).collect();
    let x = direct_split_design(&ds, &flat);
    let y = DVector::from_iterator(ds.n(), {
        let m = ds.y().iter().sum::<f64>() / ds.n() as f64;
        ds.y().iter().map(move |v| v - m)
    });
    for p in &result.points {
        let direct = solve_lasso(&x, &y, p.lambda, None).unwrap();
        let beta = back_transform(&direct, &result.layout, &result.weights).unwrap();
        let diff = max_abs_diff(&beta, &p.beta);
        assert!(diff <= 1e-8, "lambda {}: {diff}", p.lambda);
    }
}

#[test]
fn back_transform_reproduces_consistent_theta() {
    let mut r = rng(12);
    let ds = random_dataset(&mut r, &[(Scale::Nominal, 5), (Scale::Ordinal, 4)], 40, 1.0);
    let w = standard_weights(&ds, true).unwrap();
    let problem = build_augmented(&ds, &w, 1e10).unwrap();
    let beta: Vec<Vec<f64>> = ds
        .schemas()
        .iter()
        .map(|s| {
            let mut b: Vec<f64> = (0..s.num_levels()).map(|_| r.random_range(-5.0..5.0)).collect();
            b[0] = 0.0;
            b
        })
        .collect();
    let theta = DVector::from_vec(problem.layout.theta_from_beta(&beta).unwrap());
    let scaled = problem.scale(&theta);
    let back = back_transform(&scaled, &problem.layout, &problem.weights).unwrap();
    assert!(max_abs_diff(&back, &beta) < 1e-12);
    let induced = problem.layout.theta_from_beta(&back).unwrap();
    for (a, b) in induced.iter().zip(theta.iter()) {
        assert!((a - b).abs() < 1e-12);
    }
    let fused = fused_back_transform(&scaled, &problem.layout, &problem.weights).unwrap();
    assert!(max_abs_diff(&fused, &beta) < 1e-12);
}

#[test]
fn objective_reported_matches_recomputed() {
    let mut r = rng(6);
    let x = gaussian_matrix(&mut r, 40, 8);
    let y = gaussian_vector(&mut r, 40);
    let lambda = 0.2 * lambda_max(&x, &y);
    let sol = catfuse::solver::solve_lasso_with(&x, &y, lambda, None, &Default::default()).unwrap();
    let f = lasso_objective(&x, &y, &sol.theta, lambda);
    assert!((f - sol.objective).abs() <= 1e-10 * f.max(1.0));
}

#[test]
fn fifty_by_ten_mid_range_matches_oracle() {
    let mut r = rng(50);
    let x = gaussian_matrix(&mut r, 50, 10);
    let y = gaussian_vector(&mut r, 50);
    let lambda = 0.5 * lambda_max(&x, &y);
    let a = solve_lasso(&x, &y, lambda, None).unwrap();
    let b = ista_oracle(&x, &y, lambda).unwrap();
    assert!((a - b).amax() <= 1e-6);
}
