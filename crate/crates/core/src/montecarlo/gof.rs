//! One-sample goodness of fit: Kolmogorov–Smirnov, Cramér–von Mises and QQ tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::sampling::{Normalization, SampleSet};
use super::stats::sorted_quantile;
use crate::error::{Error, Result};
use crate::stable::{Normalizers, StableLaw};

/// Accuracy of the stable CDF used in fits.
pub const CDF_TOL: f64 = 1e-8;
pub const QQ_POINTS: usize = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks: f64,
    pub cvm: f64,
    /// `(empirical quantile, predicted quantile)` at levels `k/100`.
    pub qq: Vec<(f64, f64)>,
    pub n: u64,
    pub sample_count: usize,
    pub target: String,
    /// Fraction of `|x| > ε` when the target is a point mass at 0.
    pub exceed_fraction: Option<f64>,
    /// Sorted samples with their empirical and predicted CDF, thinned for plotting.
    pub overlay: Vec<(f64, f64, f64)>,
}

impl GofReport {
    /// `ks · √N`, to compare against Kolmogorov quantiles.
    pub fn scaled_ks(&self) -> f64 {
        self.ks * (self.sample_count as f64).sqrt()
    }
}

/// Exact one-sample statistics at sorted points with predicted CDF values.
pub fn ks_cvm(cdf_at_sorted: &[f64]) -> (f64, f64) {
    let n = cdf_at_sorted.len() as f64;
    let mut ks: f64 = 0.0;
    let mut cvm = 1.0 / (12.0 * n);
    for (i, &f) in cdf_at_sorted.iter().enumerate() {
        let i = i as f64;
        ks = ks.max(f - i / n).max((i + 1.0) / n - f);
        let d = f - (2.0 * i + 1.0) / (2.0 * n);
        cvm += d * d;
    }
    (ks.clamp(0.0, 1.0), cvm)
}

/// Limiting Kolmogorov distribution `P[√N D ≤ x]`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 0.3 {
        // Jacobi form, accurate for small x
        let t = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for k in 0..10 {
            let j = (2 * k + 1) as f64;
            s += (-j * j * t).exp();
        }
        return (2.0 * std::f64::consts::PI).sqrt() / x * s;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (1.0 - 2.0 * s).clamp(0.0, 1.0)
}

pub fn kolmogorov_quantile(level: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::InsufficientData(
            "goodness of fit needs samples".into(),
        ));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("samples contain NaN".into()));
    }
    let mut v = xs.to_vec();
    v.par_sort_unstable_by(|a, b| a.total_cmp(b));
    Ok(v)
}

fn overlay(xs: &[f64], cdf: &[f64]) -> Vec<(f64, f64, f64)> {
    let n = xs.len();
    let stride = (n / 512).max(1);
    (0..n)
        .step_by(stride)
        .map(|i| (xs[i], (i + 1) as f64 / n as f64, cdf[i]))
        .collect()
}

fn report<Q>(xs: Vec<f64>, cdf: Vec<f64>, quantile: Q, n: u64, target: String) -> Result<GofReport>
where
    Q: Fn(f64) -> Result<f64> + Sync,
{
    let (ks, cvm) = ks_cvm(&cdf);
    let qq = (1..=QQ_POINTS)
        .into_par_iter()
        .map(|k| {
            let u = k as f64 / (QQ_POINTS + 1) as f64;
            Ok((sorted_quantile(&xs, u), quantile(u)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GofReport {
        ks,
        cvm,
        qq,
        n,
        sample_count: xs.len(),
        target,
        exceed_fraction: None,
        overlay: overlay(&xs, &cdf),
    })
}

/// Fit of already normalised values against `law`.
pub fn gof_law(values: &[f64], law: &StableLaw, n: u64) -> Result<GofReport> {
    let xs = sorted(values)?;
    let cdf = law.cdf_sorted(&xs, CDF_TOL)?;
    let target = format!("stable(p={}, c={}, beta={})", law.p(), law.c(), law.beta());
    report(xs, cdf, |u| law.quantile(u, CDF_TOL), n, target)
}

/// `(S_n - A_n)/B_n` against the stable law.
pub fn gof_stable(samples: &SampleSet, law: &StableLaw, norm: &Normalizers) -> Result<GofReport> {
    let values = samples.normalized(Normalization {
        a_n: norm.a_n,
        b_n: norm.b_n,
    });
    gof_law(&values, law, samples.n)
}

/// `S_n / √n` against `N(0, σ²)`; for `σ² = 0` against the point mass at 0,
/// reporting the fraction above `ε = 0.1`.
pub fn gof_normal(samples: &SampleSet, sigma2: f64) -> Result<GofReport> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "variance must be >= 0, got {sigma2}"
        )));
    }
    let scale = (samples.n as f64).sqrt();
    let values = samples.normalized(Normalization {
        a_n: 0.0,
        b_n: scale,
    });
    let xs = sorted(&values)?;
    if sigma2 == 0.0 {
        let cdf: Vec<f64> = xs
            .iter()
            .map(|&x| if x >= 0.0 { 1.0 } else { 0.0 })
            .collect();
        let eps = 0.1;
        let above = xs.iter().filter(|x| x.abs() > eps).count() as f64 / xs.len() as f64;
        let mut r = report(xs, cdf, |_| Ok(0.0), samples.n, "point mass at 0".into())?;
        r.exceed_fraction = Some(above);
        return Ok(r);
    }
    let normal =
        Normal::new(0.0, sigma2.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let cdf: Vec<f64> = xs.iter().map(|&x| normal.cdf(x)).collect();
    report(
        xs,
        cdf,
        |u| Ok(normal.inverse_cdf(u)),
        samples.n,
        format!("normal(0, {sigma2})"),
    )
}
