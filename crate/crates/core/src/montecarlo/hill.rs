//! Tail index estimation from order statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::ls_line;
use crate::error::{Error, Result};

pub const MIN_TAIL_POINTS: usize = 50;
/// Indices above this are reported as "no heavy tail".
pub const BOUNDED_INDEX: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillEstimate {
    pub p_hat: f64,
    /// `ĉ` in `P[X > x] ≈ ĉ x^{-p̂}`.
    pub c_hat: f64,
    /// Number of order statistics used.
    pub k: usize,
    /// The `(k+1)`-th largest value.
    pub threshold: f64,
    pub total: usize,
    /// Estimated index above [`BOUNDED_INDEX`]: the tail looks bounded.
    pub flagged: bool,
}

fn descending_positive(samples: &[f64], sign: f64) -> Vec<f64> {
    let mut v: Vec<f64> = samples
        .iter()
        .map(|&x| sign * x)
        .filter(|&x| x > 0.0)
        .collect();
    v.par_sort_unstable_by(|a, b| b.total_cmp(a));
    v
}

fn tail_count(samples: &[f64], top_fraction: f64) -> Result<usize> {
    if !(top_fraction > 0.0 && top_fraction <= 0.05) {
        return Err(Error::InvalidParameter(format!(
            "top fraction must lie in (0, 0.05], got {top_fraction}"
        )));
    }
    let k = (top_fraction * samples.len() as f64).floor() as usize;
    if k < MIN_TAIL_POINTS {
        return Err(Error::InsufficientData(format!(
            "{k} tail points, need at least {MIN_TAIL_POINTS}"
        )));
    }
    Ok(k)
}

fn hill(samples: &[f64], top_fraction: f64, sign: f64) -> Result<HillEstimate> {
    let k = tail_count(samples, top_fraction)?;
    let v = descending_positive(samples, sign);
    if v.len() <= k {
        return Err(Error::InsufficientData(format!(
            "only {} samples in this tail, need more than {k}",
            v.len()
        )));
    }
    let threshold = v[k];
    let ln_t = threshold.ln();
    let h: f64 = v[..k].iter().map(|x| x.ln() - ln_t).sum::<f64>() / k as f64;
    let p_hat = if h > 0.0 { 1.0 / h } else { f64::INFINITY };
    let c_hat = (k as f64 / samples.len() as f64) * threshold.powf(p_hat);
    Ok(HillEstimate {
        p_hat,
        c_hat,
        k,
        threshold,
        total: samples.len(),
        flagged: !(p_hat < BOUNDED_INDEX),
    })
}

/// Hill estimator on the upper tail, from the top `top_fraction` of all samples.
pub fn hill_index(samples: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    hill(samples, top_fraction, 1.0)
}

/// Same on `-X`, for the lower tail constant `c₂`.
pub fn hill_index_lower(samples: &[f64], top_fraction: f64) -> Result<HillEstimate> {
    hill(samples, top_fraction, -1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRegression {
    pub p_hat: f64,
    pub c_hat: f64,
    pub k: usize,
}

/// Least squares of `ln(i/N)` against `ln X_(i)` over the top `top_fraction`.
pub fn tail_regression(samples: &[f64], top_fraction: f64) -> Result<TailRegression> {
    let k = tail_count(samples, top_fraction)?;
    let v = descending_positive(samples, 1.0);
    let n = samples.len() as f64;
    let pts: Vec<(f64, f64)> = v
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &x)| (x.ln(), ((i + 1) as f64 / n).ln()))
        .collect();
    let (a, b) =
        ls_line(&pts).ok_or_else(|| Error::InsufficientData("tail values are all equal".into()))?;
    Ok(TailRegression {
        p_hat: -b,
        c_hat: a.exp(),
        k,
    })
}

/// Upper and lower tail fits of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub upper: Option<HillEstimate>,
    pub lower: Option<HillEstimate>,
    pub regression: Option<TailRegression>,
    /// Lower-tail mass beyond the upper threshold, relative to the upper.
    pub lower_to_upper: f64,
    pub notes: Vec<String>,
}

pub fn tail_fit(samples: &[f64], top_fraction: f64) -> TailFit {
    let mut notes = Vec::new();
    let upper = hill_index(samples, top_fraction)
        .map_err(|e| notes.push(format!("upper tail: {e}")))
        .ok();
    let lower = hill_index_lower(samples, top_fraction)
        .map_err(|e| notes.push(format!("lower tail: {e}")))
        .ok();
    let regression = tail_regression(samples, top_fraction)
        .map_err(|e| notes.push(format!("regression: {e}")))
        .ok();
    let lower_to_upper = match upper {
        Some(u) => {
            let down = samples.iter().filter(|&&x| x < -u.threshold).count();
            down as f64 / u.k as f64
        }
        None => f64::NAN,
    };
    if let Some(u) = upper.filter(|u| u.flagged) {
        notes.push(format!(
            "upper index {:.2} suggests a bounded tail",
            u.p_hat
        ));
    }
    TailFit {
        upper,
        lower,
        regression,
        lower_to_upper,
        notes,
    }
}
