//! Design matrices and reparameterizations.
//!
//! Nominal factors are expanded into all pairwise differences
//! `theta_ij = beta_i - beta_j` (i > j); consistency of those differences is
//! enforced softly by stacking `sqrt(gamma) * A` under the design, which turns
//! the difference penalty into an ordinary L1 problem. Ordinal factors are
//! split-coded, so their coefficients are adjacent differences and need no
//! restriction rows.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Scale};
use crate::error::{Error, Result};
use crate::weights::WeightSet;

/// Default `sqrt(gamma)`.
pub const DEFAULT_SQRT_GAMMA: f64 = 1e5;

/// What a design column represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnMeaning {
    /// Indicator of `C == level`.
    Dummy { level: usize },
    /// Indicator of `C >= threshold`.
    Split { threshold: usize },
    /// Difference parameter `beta_i - beta_j`.
    Difference { i: usize, j: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub factor: usize,
    pub meaning: ColumnMeaning,
}

/// Centered dummy design of a dataset.
#[derive(Debug, Clone)]
pub struct DesignBundle {
    /// n x p, every column has mean zero.
    pub x: DMatrix<f64>,
    pub column_map: Vec<Column>,
    pub y_centered: DVector<f64>,
    pub y_mean: f64,
    /// Mean of each raw column; `x + 1 * column_means'` is the raw 0/1 design.
    pub column_means: Vec<f64>,
    /// Start of each factor's block of columns.
    pub factor_offsets: Vec<usize>,
}

impl DesignBundle {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Intercept implied by centered-design coefficients `beta` (flat, p entries).
    pub fn intercept(&self, beta: &[f64]) -> f64 {
        self.y_mean - self.column_means.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
    }
}

fn center_columns(raw: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let n = raw.nrows() as f64;
    let means: Vec<f64> = raw.column_iter().map(|c| c.sum() / n).collect();
    let mut x = raw;
    for (j, m) in means.iter().enumerate() {
        x.column_mut(j).add_scalar_mut(-m);
    }
    (x, means)
}

/// One indicator column per non-reference level of every factor, centered.
pub fn dummy_design(ds: &Dataset) -> Result<DesignBundle> {
    let n = ds.n();
    let mut factor_offsets = Vec::with_capacity(ds.num_factors());
    let mut column_map = Vec::new();
    for (l, schema) in ds.schemas().iter().enumerate() {
        if schema.num_levels() < 2 {
            return Err(Error::DegenerateFactor(schema.name.clone()));
        }
        factor_offsets.push(column_map.len());
        for level in 1..schema.num_levels() {
            column_map.push(Column {
                factor: l,
                meaning: ColumnMeaning::Dummy { level },
            });
        }
    }
    let mut raw = DMatrix::zeros(n, column_map.len());
    for (l, &offset) in factor_offsets.iter().enumerate() {
        for (obs, &level) in ds.codes(l).iter().enumerate() {
            if level > 0 {
                raw[(obs, offset + level - 1)] = 1.0;
            }
        }
    }
    let (x, column_means) = center_columns(raw);
    let y = DVector::from_column_slice(ds.y());
    let y_mean = y.mean();
    Ok(DesignBundle {
        x,
        column_map,
        y_centered: y.add_scalar(-y_mean),
        y_mean,
        column_means,
        factor_offsets,
    })
}

/// Raw (uncentered) split coding of one ordinal factor.
#[derive(Debug, Clone)]
pub struct SplitDesign {
    /// n x k, column `i - 1` is the indicator of `C >= i`.
    pub x: DMatrix<f64>,
    pub column_map: Vec<Column>,
}

pub fn split_design(ds: &Dataset, factor: &str) -> Result<SplitDesign> {
    let l = ds.factor_index(factor)?;
    let schema = &ds.schemas()[l];
    if schema.scale != Scale::Ordinal {
        return Err(Error::NotOrdinal(schema.name.clone()));
    }
    let k = schema.k();
    let mut x = DMatrix::zeros(ds.n(), k);
    for (obs, &level) in ds.codes(l).iter().enumerate() {
        for t in 1..=level {
            x[(obs, t - 1)] = 1.0;
        }
    }
    let column_map = (1..=k)
        .map(|threshold| Column {
            factor: l,
            meaning: ColumnMeaning::Split { threshold },
        })
        .collect();
    Ok(SplitDesign { x, column_map })
}

/// Adjacent differences `delta_i = beta_i - beta_{i-1}` with `beta_0 = 0`.
/// The input holds `beta_1..beta_k`.
pub fn u_transform(beta: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    beta.iter()
        .map(|&b| {
            let d = b - prev;
            prev = b;
            d
        })
        .collect()
}

/// Inverse of [`u_transform`]: cumulative sums.
pub fn u_back_transform(delta: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    delta
        .iter()
        .map(|&d| {
            acc += d;
            acc
        })
        .collect()
}

/// Pairs `(i, j)`, `i > j`, in canonical order
/// `(1,0), (2,0), ..., (k,0), (2,1), (3,1), ..., (k,k-1)`.
pub fn nominal_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity((k + 1) * k / 2);
    for j in 0..k {
        for i in (j + 1)..=k {
            pairs.push((i, j));
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BlockKind {
    /// All pairwise differences, in [`nominal_pairs`] order.
    Nominal { pairs: Vec<(usize, usize)> },
    /// Adjacent differences `delta_1..delta_k`.
    Ordinal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaBlock {
    pub factor: usize,
    pub k: usize,
    pub kind: BlockKind,
    pub offset: usize,
    pub len: usize,
}

impl ThetaBlock {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }

    /// `(i, j)` of every penalized difference in this block.
    pub fn differences(&self) -> Vec<(usize, usize)> {
        match &self.kind {
            BlockKind::Nominal { pairs } => pairs.clone(),
            BlockKind::Ordinal => (1..=self.k).map(|i| (i, i - 1)).collect(),
        }
    }
}

/// Location of every factor's parameters inside the global parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaLayout {
    pub blocks: Vec<ThetaBlock>,
    pub len: usize,
}

impl ThetaLayout {
    pub fn new(ds_scales: &[(Scale, usize)]) -> Self {
        let mut blocks = Vec::with_capacity(ds_scales.len());
        let mut offset = 0;
        for (factor, &(scale, k)) in ds_scales.iter().enumerate() {
            let kind = if scale.is_ordinal() {
                BlockKind::Ordinal
            } else {
                BlockKind::Nominal {
                    pairs: nominal_pairs(k),
                }
            };
            let len = match &kind {
                BlockKind::Nominal { pairs } => pairs.len(),
                BlockKind::Ordinal => k,
            };
            blocks.push(ThetaBlock {
                factor,
                k,
                kind,
                offset,
                len,
            });
            offset += len;
        }
        ThetaLayout { blocks, len: offset }
    }

    pub fn for_dataset(ds: &Dataset) -> Self {
        let scales: Vec<_> = ds.schemas().iter().map(|s| (s.scale, s.k())).collect();
        Self::new(&scales)
    }

    /// Number of restriction rows: `(k-1)k/2` per nominal factor.
    pub fn num_restrictions(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| matches!(b.kind, BlockKind::Nominal { .. }))
            .map(|b| b.k.saturating_sub(1) * b.k / 2)
            .sum()
    }

    /// Restriction matrix `A` (r x q): one row per nominal pair `(i, j)`, `j > 0`,
    /// encoding `theta_i0 - theta_j0 - theta_ij = 0`.
    pub fn restriction_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.num_restrictions(), self.len);
        let mut row = 0;
        for block in &self.blocks {
            if let BlockKind::Nominal { pairs } = &block.kind {
                // position of (i, 0) is i - 1
                for (pos, &(i, j)) in pairs.iter().enumerate() {
                    if j == 0 {
                        continue;
                    }
                    a[(row, block.offset + i - 1)] = 1.0;
                    a[(row, block.offset + j - 1)] = -1.0;
                    a[(row, block.offset + pos)] = -1.0;
                    row += 1;
                }
            }
        }
        a
    }

    /// Exact parameters induced by per-factor coefficients (each of length
    /// `k + 1`, entry 0 is the reference and ignored).
    pub fn theta_from_beta(&self, beta: &[Vec<f64>]) -> Result<Vec<f64>> {
        if beta.len() != self.blocks.len() {
            return Err(Error::LayoutMismatch(format!(
                "{} coefficient vectors for {} factors",
                beta.len(),
                self.blocks.len()
            )));
        }
        let mut theta = vec![0.0; self.len];
        for (block, b) in self.blocks.iter().zip(beta) {
            if b.len() != block.k + 1 {
                return Err(Error::LayoutMismatch(format!(
                    "factor {} expects {} levels, got {}",
                    block.factor,
                    block.k + 1,
                    b.len()
                )));
            }
            let level = |i: usize| if i == 0 { 0.0 } else { b[i] };
            for (pos, (i, j)) in block.differences().into_iter().enumerate() {
                theta[block.offset + pos] = level(i) - level(j);
            }
        }
        Ok(theta)
    }
}

/// The Lasso-type problem on stacked data `(y_tilde, Z_tilde)`.
#[derive(Debug, Clone)]
pub struct AugmentedProblem {
    /// (n + r) x q; columns already divided by their weight.
    pub z_tilde: DMatrix<f64>,
    /// Centered response followed by r zeros.
    pub y_tilde: DVector<f64>,
    /// Unweighted restriction matrix, r x q.
    pub a: DMatrix<f64>,
    pub gamma: f64,
    pub layout: ThetaLayout,
    /// Weight of every parameter, aligned with the layout.
    pub weights: Vec<f64>,
    pub design: DesignBundle,
}

impl AugmentedProblem {
    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn q(&self) -> usize {
        self.layout.len
    }

    pub fn r(&self) -> usize {
        self.a.nrows()
    }

    /// Data block of `Z_tilde` (first n rows).
    pub fn data_block(&self) -> DMatrix<f64> {
        self.z_tilde.rows(0, self.n()).into_owned()
    }

    /// Solver-scale parameters (`w * theta`) to raw differences.
    pub fn unscale(&self, theta_scaled: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            theta_scaled.len(),
            theta_scaled.iter().zip(&self.weights).map(|(t, w)| t / w),
        )
    }

    pub fn scale(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(theta.len(), theta.iter().zip(&self.weights).map(|(t, w)| t * w))
    }
}

/// Build `Z_tilde = [Z W^-1; sqrt(gamma) A W^-1]` and `y_tilde = [y_c; 0]` with
/// `Z = (X | 0)` for nominal blocks and centered split columns for ordinal ones.
pub fn build_augmented(ds: &Dataset, weights: &WeightSet, gamma: f64) -> Result<AugmentedProblem> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveGamma(gamma));
    }
    let design = dummy_design(ds)?;
    let layout = ThetaLayout::for_dataset(ds);
    let w = weights.flat_for(&layout, ds)?;

    let n = ds.n();
    let q = layout.len;
    let a = layout.restriction_matrix();
    let r = a.nrows();
    let mut z = DMatrix::zeros(n + r, q);
    for block in &layout.blocks {
        let dummy_offset = design.factor_offsets[block.factor];
        match &block.kind {
            BlockKind::Nominal { .. } => {
                for i in 1..=block.k {
                    z.view_mut((0, block.offset + i - 1), (n, 1))
                        .copy_from(&design.x.column(dummy_offset + i - 1));
                }
            }
            BlockKind::Ordinal => {
                // centered split column t is the sum of centered dummies t..k
                for t in 1..=block.k {
                    let mut col = DVector::zeros(n);
                    for level in t..=block.k {
                        col += design.x.column(dummy_offset + level - 1);
                    }
                    z.view_mut((0, block.offset + t - 1), (n, 1)).copy_from(&col);
                }
            }
        }
    }
    let sqrt_gamma = gamma.sqrt();
    z.view_mut((n, 0), (r, q)).copy_from(&(&a * sqrt_gamma));
    for (j, wj) in w.iter().enumerate() {
        z.column_mut(j).scale_mut(1.0 / wj);
    }
    let mut y_tilde = DVector::zeros(n + r);
    y_tilde.rows_mut(0, n).copy_from(&design.y_centered);
    Ok(AugmentedProblem {
        z_tilde: z,
        y_tilde,
        a,
        gamma,
        layout,
        weights: w,
        design,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FactorSchema;
    use crate::weights::standard_weights;

    fn one_factor(scale: Scale, levels: usize, codes: Vec<usize>) -> Dataset {
        let y = (0..codes.len()).map(|i| i as f64).collect();
        Dataset::new(vec![FactorSchema::numbered("f", scale, levels)], y, vec![codes]).unwrap()
    }

    #[test]
    fn dummy_rows_before_centering() {
        let ds = one_factor(Scale::Nominal, 3, vec![2, 0, 1, 1]);
        let d = dummy_design(&ds).unwrap();
        let raw = |obs: usize| -> Vec<f64> { (0..d.p()).map(|j| d.x[(obs, j)] + d.column_means[j]).collect() };
        assert_eq!(raw(0), vec![0.0, 1.0]);
        assert_eq!(raw(1), vec![0.0, 0.0]);
        for col in d.x.column_iter() {
            assert!(col.sum().abs() < 1e-12);
        }
        assert!((d.y_centered.sum()).abs() < 1e-12);
        assert_eq!(d.y_mean, 1.5);
    }

    #[test]
    fn split_rows() {
        let ds = one_factor(Scale::Ordinal, 4, vec![2, 0, 3]);
        let s = split_design(&ds, "f").unwrap();
        assert_eq!(s.x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert_eq!(s.x.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0]);
        assert_eq!(s.x.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
        let nominal = one_factor(Scale::Nominal, 4, vec![0, 1]);
        assert!(matches!(split_design(&nominal, "f"), Err(Error::NotOrdinal(_))));
    }

    #[test]
    fn u_transform_examples() {
        assert_eq!(u_transform(&[1.0, 3.0, 6.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(u_back_transform(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        assert_eq!(u_back_transform(&[1.0, 2.0, 3.0]), vec![1.0, 3.0, 6.0]);
    }

    #[test]
    fn pair_order() {
        assert_eq!(nominal_pairs(3), vec![(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)]);
    }

    #[test]
    fn three_level_nominal_block() {
        let ds = one_factor(Scale::Nominal, 3, vec![0, 1, 2, 2, 1, 0]);
        let w = standard_weights(&ds, false).unwrap();
        let p = build_augmented(&ds, &w, 4.0).unwrap();
        assert_eq!((p.q(), p.r()), (3, 1));
        assert_eq!(p.a.row(0).iter().copied().collect::<Vec<_>>(), vec![-1.0, 1.0, -1.0]);
        // restriction row is sqrt(gamma) * A / w
        let wv = 2.0 / 3.0;
        assert!((p.z_tilde[(6, 0)] + 2.0 / wv).abs() < 1e-12);
        assert!((p.z_tilde[(6, 1)] - 2.0 / wv).abs() < 1e-12);
        assert!((p.z_tilde[(6, 2)] + 2.0 / wv).abs() < 1e-12);
        // theta_21 has a zero data column
        assert!(p.z_tilde.view((0, 2), (6, 1)).iter().all(|v| *v == 0.0));
        assert_eq!(p.y_tilde.len(), 7);
        assert_eq!(p.y_tilde[6], 0.0);
    }

    #[test]
    fn ordinal_block_has_no_restrictions() {
        let ds = one_factor(Scale::Ordinal, 4, vec![0, 1, 2, 3, 3, 1]);
        let w = standard_weights(&ds, false).unwrap();
        let p = build_augmented(&ds, &w, 1e10).unwrap();
        assert_eq!((p.q(), p.r()), (3, 0));
        let split = split_design(&ds, "f").unwrap();
        let (centered, _) = center_columns(split.x);
        assert!((&p.z_tilde - &centered).abs().max() < 1e-12);
    }

    #[test]
    fn nine_level_counts() {
        let codes: Vec<usize> = (0..180).map(|i| i / 20).collect();
        let ds = one_factor(Scale::Nominal, 9, codes);
        let w = standard_weights(&ds, false).unwrap();
        let p = build_augmented(&ds, &w, 1e10).unwrap();
        assert_eq!((p.q(), p.r()), (36, 28));
        // full row rank: A A' is positive definite
        let aat = &p.a * p.a.transpose();
        assert!(aat.cholesky().is_some());
    }

    #[test]
    fn bad_gamma() {
        let ds = one_factor(Scale::Nominal, 3, vec![0, 1, 2]);
        let w = standard_weights(&ds, false).unwrap();
        assert!(matches!(build_augmented(&ds, &w, 0.0), Err(Error::NonPositiveGamma(_))));
        assert!(matches!(
            build_augmented(&ds, &w, f64::NAN),
            Err(Error::NonPositiveGamma(_))
        ));
    }
}
