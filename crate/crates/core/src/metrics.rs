//! Goodness-of-fit criteria for observed vs. predicted series.

use serde::Serialize;

use crate::error::{FuzzyError, Result};

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(FuzzyError::DegenerateSeries("empty series".into()));
    }
    if y.len() != yhat.len() {
        return Err(FuzzyError::DimensionMismatch {
            expected: y.len(),
            actual: yhat.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sse(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Root mean square error, in the units of the series.
pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok((sse(y, yhat) / y.len() as f64).sqrt())
}

/// Nash-Sutcliffe coefficient of efficiency `1 - F / F0` with `F` the
/// residual sum of squares and `F0` the sum of squares about the observed mean.
pub fn ce(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let ybar = mean(y);
    let f0: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum();
    if !(f0 > 0.0) {
        return Err(FuzzyError::DegenerateSeries(
            "observed series is constant".into(),
        ));
    }
    Ok(1.0 - sse(y, yhat) / f0)
}

/// Signed volumetric error in percent; positive means under-prediction.
pub fn ve(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let total: f64 = y.iter().sum();
    if total == 0.0 {
        return Err(FuzzyError::DegenerateSeries(
            "observed volume is zero".into(),
        ));
    }
    Ok((total - yhat.iter().sum::<f64>()) / total * 100.0)
}

/// Pearson correlation coefficient.
pub fn r(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let (my, mp) = (mean(y), mean(yhat));
    let mut cov = 0.0;
    let mut vy = 0.0;
    let mut vp = 0.0;
    for (a, b) in y.iter().zip(yhat) {
        cov += (a - my) * (b - mp);
        vy += (a - my) * (a - my);
        vp += (b - mp) * (b - mp);
    }
    if !(vy > 0.0 && vp > 0.0) {
        return Err(FuzzyError::DegenerateSeries(
            "correlation of a constant series".into(),
        ));
    }
    Ok((cov / (vy.sqrt() * vp.sqrt())).clamp(-1.0, 1.0))
}

/// The four criteria together. Criteria undefined for the given series
/// (constant observations, zero volume) are reported as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSet {
    pub rmse: f64,
    pub ve: f64,
    pub ce: f64,
    pub r: f64,
}

impl MetricSet {
    pub fn evaluate(y: &[f64], yhat: &[f64]) -> Result<Self> {
        Ok(Self {
            rmse: rmse(y, yhat)?,
            ve: ve(y, yhat).unwrap_or(f64::NAN),
            ce: ce(y, yhat).unwrap_or(f64::NAN),
            r: r(y, yhat).unwrap_or(f64::NAN),
        })
    }
}
