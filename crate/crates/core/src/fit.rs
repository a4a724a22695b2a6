//! Least-squares fit of `h / sqrt(C)` and the scaling law of the o-index.
//!
//! The regression model is
//!
//! ```text
//! h / sqrt(C) ~ intercept + total_slope * sqrt(C) + mean_slope * sqrt(<c>)
//! ```
//!
//! fitted by unweighted ordinary least squares. The minimizer is computed
//! from a Householder QR factorization of the design matrix; the normal
//! equations are never formed. All standard deviations use the population
//! convention (divide by `n`).
//!
//! The scaling law is `o ~ k * C^(1/2) * <c>^(1/4)`, with `k` taken as the
//! mean of the per-researcher ratios `o / (C^(1/2) <c>^(1/4))`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::MetricSummary;

/// Relative threshold below which a design column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Number of coefficients in the regression model.
pub const MODEL_TERMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("too few usable points: found {found}, need at least {required}")]
    TooFewPoints { found: usize, required: usize },
    #[error("design matrix is rank deficient (column {column})")]
    SingularDesign { column: usize },
    #[error("empty input")]
    EmptyInput,
}

/// One regression row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// `sqrt(C)`
    pub sqrt_total: f64,
    /// `sqrt(<c>)`
    pub sqrt_mean: f64,
    /// `h / sqrt(C)`
    pub h_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionDataset {
    pub rows: Vec<Observation>,
    pub source_ids: Vec<String>,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, id: impl Into<String>, row: Observation) {
        self.rows.push(row);
        self.source_ids.push(id.into());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept: f64,
    pub total_slope: f64,
    pub mean_slope: f64,
    pub residual_std: f64,
    pub sample_mean: f64,
    pub sample_std: f64,
    pub n_points: usize,
}

impl FitResult {
    pub fn coefficients(&self) -> [f64; MODEL_TERMS] {
        [self.intercept, self.total_slope, self.mean_slope]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingMethod {
    /// Arithmetic mean of the per-researcher ratios.
    #[default]
    MeanRatio,
    /// Geometric mean of the ratios, i.e. a least-squares fit of
    /// `ln o - ln(C^(1/2) <c>^(1/4))` with unit slope.
    LogSpace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub k: f64,
    pub ratio_std: f64,
    pub n_points: usize,
    pub method: ScalingMethod,
}

/// Builds the regression rows from summaries with `C > 0` and `N > 0`.
///
/// `min_total` drops researchers with fewer total citations; 0 keeps all.
pub fn build_dataset(
    summaries: &[MetricSummary],
    min_total: u64,
) -> Result<RegressionDataset, FitError> {
    let mut data = RegressionDataset::default();
    for s in summaries {
        if s.total_citations == 0 || s.n_papers == 0 || s.total_citations < min_total {
            continue;
        }
        data.push(
            s.id.clone(),
            Observation {
                sqrt_total: s.sqrt_total(),
                sqrt_mean: s.mean_citations.sqrt(),
                h_ratio: s.h_ratio,
            },
        );
    }
    if data.len() < MODEL_TERMS {
        return Err(FitError::TooFewPoints {
            found: data.len(),
            required: MODEL_TERMS,
        });
    }
    Ok(data)
}

/// Mean and population standard deviation.
pub fn sample_stats(values: &[f64]) -> Result<(f64, f64), FitError> {
    if values.is_empty() {
        return Err(FitError::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Unweighted least squares on the basis `{1, sqrt(C), sqrt(<c>)}`.
pub fn ols_fit(data: &RegressionDataset) -> Result<FitResult, FitError> {
    let n = data.len();
    if n < MODEL_TERMS {
        return Err(FitError::TooFewPoints {
            found: n,
            required: MODEL_TERMS,
        });
    }
    let columns = vec![
        vec![1.0; n],
        data.rows.iter().map(|r| r.sqrt_total).collect(),
        data.rows.iter().map(|r| r.sqrt_mean).collect(),
    ];
    let targets: Vec<f64> = data.rows.iter().map(|r| r.h_ratio).collect();
    let beta = least_squares(columns, &targets)?;

    let residual_ss: f64 = data
        .rows
        .iter()
        .map(|r| {
            let fitted = beta[0] + beta[1] * r.sqrt_total + beta[2] * r.sqrt_mean;
            (r.h_ratio - fitted).powi(2)
        })
        .sum();
    let (sample_mean, sample_std) = sample_stats(&targets)?;
    Ok(FitResult {
        intercept: beta[0],
        total_slope: beta[1],
        mean_slope: beta[2],
        residual_std: (residual_ss / n as f64).sqrt(),
        sample_mean,
        sample_std,
        n_points: n,
    })
}

/// Evaluates the fitted model at total citations `total` and mean `mean`.
pub fn predict_h_ratio(fit: &FitResult, total: f64, mean: f64) -> f64 {
    fit.intercept + fit.total_slope * total.sqrt() + fit.mean_slope * mean.sqrt()
}

/// `o / (C^(1/2) <c>^(1/4))`, or `None` when the summary is unusable.
pub fn scaling_ratio(s: &MetricSummary) -> Option<f64> {
    if s.total_citations == 0 || s.n_papers == 0 || s.o_index <= 0.0 {
        return None;
    }
    Some(s.o_index / ((s.total_citations as f64).sqrt() * s.mean_citations.powf(0.25)))
}

pub fn scaling_fit(
    summaries: &[MetricSummary],
    method: ScalingMethod,
) -> Result<ScalingFit, FitError> {
    let ratios: Vec<f64> = summaries.iter().filter_map(scaling_ratio).collect();
    if ratios.is_empty() {
        return Err(FitError::TooFewPoints {
            found: 0,
            required: 1,
        });
    }
    let (mean, std) = sample_stats(&ratios)?;
    let k = match method {
        ScalingMethod::MeanRatio => mean,
        ScalingMethod::LogSpace => {
            let logs: Vec<f64> = ratios.iter().map(|r| r.ln()).collect();
            sample_stats(&logs)?.0.exp()
        }
    };
    Ok(ScalingFit {
        k,
        ratio_std: std,
        n_points: ratios.len(),
        method,
    })
}

/// Least-squares solution of `X beta ~ y` by Householder QR.
///
/// `columns` holds the design matrix column by column; it is consumed as
/// workspace. Fails when a column's remaining norm after orthogonalization
/// drops below `RANK_TOLERANCE` times its original norm.
pub fn least_squares(mut columns: Vec<Vec<f64>>, targets: &[f64]) -> Result<Vec<f64>, FitError> {
    let p = columns.len();
    let n = targets.len();
    if n < p {
        return Err(FitError::TooFewPoints {
            found: n,
            required: p,
        });
    }
    debug_assert!(columns.iter().all(|c| c.len() == n));

    let original_norms: Vec<f64> = columns.iter().map(|c| norm(c)).collect();
    let mut y = targets.to_vec();
    let mut diag = vec![0.0; p];

    for j in 0..p {
        let alpha_norm = norm(&columns[j][j..]);
        if original_norms[j] == 0.0 || alpha_norm <= RANK_TOLERANCE * original_norms[j] {
            return Err(FitError::SingularDesign { column: j });
        }
        // reflect column j onto -sign(x_j) * |x| e_j
        let alpha = if columns[j][j] > 0.0 {
            -alpha_norm
        } else {
            alpha_norm
        };
        let mut v = columns[j][j..].to_vec();
        v[0] -= alpha;
        let v_sq = v.iter().map(|x| x * x).sum::<f64>();
        diag[j] = alpha;

        let reflect = |target: &mut [f64]| {
            let dot: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
            let scale = 2.0 * dot / v_sq;
            for (t, vi) in target.iter_mut().zip(&v) {
                *t -= scale * vi;
            }
        };
        for col in columns.iter_mut().skip(j + 1) {
            reflect(&mut col[j..]);
        }
        reflect(&mut y[j..]);
    }

    // back substitution on R beta = Q^T y
    let mut beta = vec![0.0; p];
    for j in (0..p).rev() {
        let mut acc = y[j];
        for (k, b) in beta.iter().enumerate().skip(j + 1) {
            acc -= columns[k][j] * b;
        }
        beta[j] = acc / diag[j];
    }
    Ok(beta)
}

fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on large citation totals
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}
