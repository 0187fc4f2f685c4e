//! Moment estimators feeding the portfolio optimizer: empirical,
//! James-Stein shrinkage of the mean, and generative moments from
//! diffusion samples. All covariance outputs are symmetrized and
//! eigenvalue-floored so the downstream QP is always well-posed.

use nalgebra::{DMatrix, DVector};

use crate::diffusion::SampleSet;
use crate::error::{Error, Result};

/// Minimum eigenvalue enforced on every returned covariance.
pub const RIDGE_FLOOR: f64 = 1e-8;

/// Which estimator produced a [`MomentEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Empirical,
    ShrinkEmpirical,
    Factordiff,
}

/// Mean vector and positive-definite covariance with provenance.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub source: EstimatorKind,
    pub sample_count: usize,
}

/// James-Stein diagnostics: the shrinkage weight on the deviation from
/// the grand mean (in [0, 1]) and whether the estimator fell back to the
/// plain empirical mean (D < 4).
#[derive(Debug, Clone, Copy)]
pub struct JsDiagnostics {
    pub weight: f64,
    pub fell_back: bool,
}

/// Symmetrize, then lift the spectrum so the smallest eigenvalue is at
/// least [`RIDGE_FLOOR`].
fn floor_covariance(mut cov: DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = s;
            cov[(j, i)] = s;
        }
    }
    let eig = cov.clone().symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < RIDGE_FLOOR {
        let lift = RIDGE_FLOOR - min_eig;
        for i in 0..d {
            cov[(i, i)] += lift;
        }
    }
    cov
}

/// Verify the PD floor via an eigendecomposition (tests and invariants).
pub fn min_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    cov.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn column_means(history: &DMatrix<f64>) -> DVector<f64> {
    let (t, d) = (history.nrows(), history.ncols());
    DVector::from_fn(d, |i, _| history.column(i).iter().sum::<f64>() / t as f64)
}

fn sample_covariance(history: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let (t, d) = (history.nrows(), history.ncols());
    let mut cov = DMatrix::zeros(d, d);
    for r in 0..t {
        for i in 0..d {
            let xi = history[(r, i)] - mean[i];
            for j in i..d {
                cov[(i, j)] += xi * (history[(r, j)] - mean[j]);
            }
        }
    }
    let denom = (t - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Column means and the unbiased (T-1) covariance of a T x D return
/// history, floored.
pub fn empirical_moments(history: &DMatrix<f64>) -> Result<MomentEstimate> {
    let t = history.nrows();
    if t < 2 {
        return Err(Error::data(format!(
            "empirical moments need at least 2 observations, got {t}"
        )));
    }
    let mean = column_means(history);
    let cov = floor_covariance(sample_covariance(history, &mean));
    Ok(MomentEstimate {
        mean,
        covariance: cov,
        source: EstimatorKind::Empirical,
        sample_count: t,
    })
}

/// Positive-part James-Stein shrinkage of the mean toward the grand
/// mean:
/// `m + max(0, 1 - (D - 3) sigma2_hat / ||mu_hat - m 1||^2) (mu_hat - m 1)`
/// with `sigma2_hat` the average per-asset variance of the mean estimate
/// (sample variance / T). The covariance is the empirical one. Requires
/// D >= 4; smaller cross-sections fall back to the empirical mean with
/// the diagnostics flag set.
pub fn james_stein_mean(history: &DMatrix<f64>) -> Result<(MomentEstimate, JsDiagnostics)> {
    let emp = empirical_moments(history)?;
    let (t, d) = (history.nrows(), history.ncols());
    if d < 4 {
        log::warn!("James-Stein needs D >= 4 (got {d}); falling back to the empirical mean");
        let mut est = emp;
        est.source = EstimatorKind::ShrinkEmpirical;
        return Ok((
            est,
            JsDiagnostics {
                weight: 1.0,
                fell_back: true,
            },
        ));
    }
    let grand = emp.mean.iter().sum::<f64>() / d as f64;
    let deviation = DVector::from_fn(d, |i, _| emp.mean[i] - grand);
    let dev_norm2: f64 = deviation.iter().map(|v| v * v).sum();

    // Average variance of the per-asset mean estimate: sample var / T.
    let mean = column_means(history);
    let sigma2_hat = (0..d)
        .map(|i| {
            let v = history
                .column(i)
                .iter()
                .map(|x| (x - mean[i]) * (x - mean[i]))
                .sum::<f64>()
                / (t - 1) as f64;
            v / t as f64
        })
        .sum::<f64>()
        / d as f64;

    let weight = if dev_norm2 == 0.0 {
        0.0 // degenerate: full shrinkage to the grand mean
    } else {
        (1.0 - (d - 3) as f64 * sigma2_hat / dev_norm2).max(0.0)
    };
    let js_mean = DVector::from_fn(d, |i, _| grand + weight * deviation[i]);
    Ok((
        MomentEstimate {
            mean: js_mean,
            covariance: emp.covariance,
            source: EstimatorKind::ShrinkEmpirical,
            sample_count: t,
        },
        JsDiagnostics {
            weight,
            fell_back: false,
        },
    ))
}

/// Moments of a generated sample set: the same mean/covariance formulas
/// as [`empirical_moments`] applied to the S x D sample matrix.
pub fn generative_moments(samples: &SampleSet) -> Result<MomentEstimate> {
    let s = samples.samples.nrows();
    if s < 2 {
        return Err(Error::data(format!(
            "generative moments need at least 2 samples, got {s}"
        )));
    }
    let mut est = empirical_moments(&samples.samples)?;
    est.source = EstimatorKind::Factordiff;
    Ok(est)
}
