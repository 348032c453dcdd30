//! Feature-wise Gaussianizing transforms: Z-score normalization and the
//! Yeo-Johnson power transform with maximum-likelihood lambda.
//!
//! Transforms are fitted on the unlabeled training split only and applied
//! unchanged to held-out data.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SCHEMA_VERSION;

/// Lambda search interval for the maximum-likelihood fit.
pub const LAMBDA_MIN: f64 = -5.0;
pub const LAMBDA_MAX: f64 = 5.0;
const LAMBDA_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("feature {0} is constant; cannot fit")]
    ConstantColumn(usize),
    #[error("box-cox requires x > 0, got {0}")]
    NonPositive(f64),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("model fitted on {expected} features, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Box-Cox transform; defined for positive x only.
pub fn box_cox(x: f64, lambda: f64) -> Result<f64, TransformError> {
    if !x.is_finite() || !lambda.is_finite() {
        return Err(TransformError::NonFinite);
    }
    if x <= 0.0 {
        return Err(TransformError::NonPositive(x));
    }
    Ok(if lambda == 0.0 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    })
}

/// Yeo-Johnson transform, valid for all real x.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda == 0.0 {
            (x + 1.0).ln()
        } else {
            ((x + 1.0).powf(lambda) - 1.0) / lambda
        }
    } else if lambda == 2.0 {
        -(-x + 1.0).ln()
    } else {
        -((-x + 1.0).powf(2.0 - lambda) - 1.0) / (2.0 - lambda)
    }
}

/// Profile log-likelihood of the Yeo-Johnson transform for one column,
/// using the biased (1/n) variance of the transformed values.
pub fn yeo_johnson_log_likelihood(column: &[f64], lambda: f64) -> f64 {
    let n = column.len() as f64;
    let transformed: Vec<f64> = column.iter().map(|&x| yeo_johnson(x, lambda)).collect();
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed.iter().map(|&t| (t - mean).powi(2)).sum::<f64>() / n;
    if var <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let jacobian: f64 = column
        .iter()
        .map(|&x| x.signum() * (x.abs() + 1.0).ln())
        .sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * jacobian
}

/// Maximum-likelihood lambda over [-5, 5] to 1e-6 tolerance.
///
/// A coarse scan brackets the argmax before golden-section refinement, so
/// the result matches a dense grid scan even if the profile likelihood has
/// shallow secondary bumps.
pub fn fit_yeo_johnson_lambda(column: &[f64]) -> Result<f64, TransformError> {
    if column.len() < 2 {
        return Err(TransformError::TooFewRows(column.len()));
    }
    if column.iter().any(|x| !x.is_finite()) {
        return Err(TransformError::NonFinite);
    }
    let first = column[0];
    if column.iter().all(|&x| x == first) {
        return Err(TransformError::ConstantColumn(0));
    }

    let coarse_steps = 200usize;
    let step = (LAMBDA_MAX - LAMBDA_MIN) / coarse_steps as f64;
    let mut best_i = 0;
    let mut best_ll = f64::NEG_INFINITY;
    for i in 0..=coarse_steps {
        let lambda = LAMBDA_MIN + i as f64 * step;
        let ll = yeo_johnson_log_likelihood(column, lambda);
        if ll > best_ll {
            best_ll = ll;
            best_i = i;
        }
    }
    let lo = LAMBDA_MIN + (best_i.saturating_sub(1)) as f64 * step;
    let hi = (LAMBDA_MIN + (best_i + 1) as f64 * step).min(LAMBDA_MAX);
    Ok(golden_section_max(
        |lambda| yeo_johnson_log_likelihood(column, lambda),
        lo,
        hi,
        LAMBDA_TOL,
    ))
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Identity,
    Zscore,
    YeoJohnson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub lambda: f64,
    pub mean: f64,
    pub std: f64,
}

/// Fitted per-feature transform parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformModel {
    pub schema_version: u32,
    pub kind: TransformKind,
    pub per_feature: Vec<FeatureParams>,
    pub d: usize,
}

fn column_mean_std(col: ArrayView1<f64>) -> (f64, f64) {
    let n = col.len() as f64;
    let mean = col.sum() / n;
    let var = col.iter().map(|&x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl TransformModel {
    pub fn identity(d: usize) -> TransformModel {
        TransformModel {
            schema_version: SCHEMA_VERSION,
            kind: TransformKind::Identity,
            per_feature: (0..d)
                .map(|_| FeatureParams {
                    lambda: 1.0,
                    mean: 0.0,
                    std: 1.0,
                })
                .collect(),
            d,
        }
    }

    /// Fit a Z-score model: per-feature mean and sample std (ddof = 1).
    pub fn fit_zscore(train: &Array2<f64>) -> Result<TransformModel, TransformError> {
        check_input(train)?;
        let mut per_feature = Vec::with_capacity(train.ncols());
        for (j, col) in train.columns().into_iter().enumerate() {
            let (mean, std) = column_mean_std(col);
            if std == 0.0 || !std.is_finite() {
                return Err(TransformError::ConstantColumn(j));
            }
            per_feature.push(FeatureParams {
                lambda: 1.0,
                mean,
                std,
            });
        }
        Ok(TransformModel {
            schema_version: SCHEMA_VERSION,
            kind: TransformKind::Zscore,
            per_feature,
            d: train.ncols(),
        })
    }

    /// Fit a Yeo-Johnson power model: per-feature MLE lambda followed by
    /// standardization of the transformed training column, so downstream
    /// consumers always see zero-mean/unit-std training features.
    pub fn fit_power(train: &Array2<f64>) -> Result<TransformModel, TransformError> {
        check_input(train)?;
        let mut per_feature = Vec::with_capacity(train.ncols());
        for (j, col) in train.columns().into_iter().enumerate() {
            let values: Vec<f64> = col.to_vec();
            let lambda = fit_yeo_johnson_lambda(&values)
                .map_err(|e| match e {
                    TransformError::ConstantColumn(_) => TransformError::ConstantColumn(j),
                    other => other,
                })?;
            let transformed: Vec<f64> =
                values.iter().map(|&x| yeo_johnson(x, lambda)).collect();
            let (mean, std) = column_mean_std(ArrayView1::from(&transformed));
            if std == 0.0 || !std.is_finite() {
                return Err(TransformError::ConstantColumn(j));
            }
            per_feature.push(FeatureParams { lambda, mean, std });
        }
        Ok(TransformModel {
            schema_version: SCHEMA_VERSION,
            kind: TransformKind::YeoJohnson,
            per_feature,
            d: train.ncols(),
        })
    }

    pub fn fit(kind: TransformKind, train: &Array2<f64>) -> Result<TransformModel, TransformError> {
        match kind {
            TransformKind::Identity => Ok(TransformModel::identity(train.ncols())),
            TransformKind::Zscore => TransformModel::fit_zscore(train),
            TransformKind::YeoJohnson => TransformModel::fit_power(train),
        }
    }

    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>, TransformError> {
        if x.ncols() != self.d {
            return Err(TransformError::DimensionMismatch {
                expected: self.d,
                got: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let mut out = x.clone();
        match self.kind {
            TransformKind::Identity => {}
            TransformKind::Zscore => {
                for (j, p) in self.per_feature.iter().enumerate() {
                    out.index_axis_mut(Axis(1), j)
                        .mapv_inplace(|v| (v - p.mean) / p.std);
                }
            }
            TransformKind::YeoJohnson => {
                for (j, p) in self.per_feature.iter().enumerate() {
                    out.index_axis_mut(Axis(1), j)
                        .mapv_inplace(|v| (yeo_johnson(v, p.lambda) - p.mean) / p.std);
                }
            }
        }
        Ok(out)
    }
}

fn check_input(train: &Array2<f64>) -> Result<(), TransformError> {
    if train.nrows() < 2 {
        return Err(TransformError::TooFewRows(train.nrows()));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(TransformError::NonFinite);
    }
    Ok(())
}
