//! Tail descriptions, their stable limits and normalising sequences.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{gamma, StableLaw};
use crate::error::{Error, Result};

/// A slowly varying function `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlowlyVarying {
    Constant(f64),
    /// `a · ln x`, meaningful for `x > 1`.
    LogMultiple(f64),
    /// Samples `(x, L(x))`; `ln L` is interpolated linearly in `ln x` and
    /// extended with the nearest end slope.
    Table(Vec<(f64, f64)>),
}

impl SlowlyVarying {
    fn validate(&self) -> Result<()> {
        match self {
            SlowlyVarying::Constant(a) | SlowlyVarying::LogMultiple(a) if *a > 0.0 => Ok(()),
            SlowlyVarying::Table(rows)
                if rows.len() >= 2
                    && rows.windows(2).all(|w| w[0].0 < w[1].0)
                    && rows.iter().all(|&(x, l)| x > 0.0 && l > 0.0) =>
            {
                Ok(())
            }
            other => Err(Error::InvalidParameter(format!(
                "invalid slowly varying descriptor {other:?}"
            ))),
        }
    }

    /// `ln L(e^y)`, or `None` outside the domain.
    fn ln_at(&self, y: f64) -> Option<f64> {
        match self {
            SlowlyVarying::Constant(a) => Some(a.ln()),
            SlowlyVarying::LogMultiple(a) => (y > 0.0).then(|| a.ln() + y.ln()),
            SlowlyVarying::Table(rows) => {
                let pts: Vec<(f64, f64)> = rows.iter().map(|&(x, l)| (x.ln(), l.ln())).collect();
                let k = pts
                    .partition_point(|&(px, _)| px < y)
                    .clamp(1, pts.len() - 1);
                let (x0, l0) = pts[k - 1];
                let (x1, l1) = pts[k];
                Some(l0 + (l1 - l0) * (y - x0) / (x1 - x0))
            }
        }
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        self.ln_at(x.ln()).map(f64::exp)
    }
}

/// `P[Y > x] ~ c1 x^{-p} L(x)`, `P[Y < -x] ~ c2 x^{-p} L(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub p: f64,
    pub c1: f64,
    pub c2: f64,
    pub l: SlowlyVarying,
}

impl TailSpec {
    pub fn new(p: f64, c1: f64, c2: f64, l: SlowlyVarying) -> Result<Self> {
        if !(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tail constants must be nonnegative with positive sum, got ({c1}, {c2})"
            )));
        }
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "tail index must lie in (0,2], got {p}"
            )));
        }
        l.validate()?;
        Ok(Self { p, c1, c2, l })
    }
}

/// Stable limit of normalised sums of variables with the given tails.
pub fn params_from_tails(tails: &TailSpec) -> Result<StableLaw> {
    let p = tails.p;
    let sum = tails.c1 + tails.c2;
    let beta = (tails.c1 - tails.c2) / sum;
    if p == 1.0 {
        return Err(Error::InvalidParameter(
            "tail index p = 1 is not supported".into(),
        ));
    }
    if p == 2.0 {
        return StableLaw::new(2.0, 0.5, beta);
    }
    let c = sum * gamma(1.0 - p) * (p * FRAC_PI_2).cos();
    StableLaw::new(p, c, beta)
}

/// Tail constant `h(1/2) / (4 (α/|f(0)|)^{1/α})` of the induced observable.
pub fn lsv_tail_constant(alpha: f64, f0: f64, h_half: f64) -> f64 {
    h_half / (4.0 * (alpha / f0.abs()).powf(1.0 / alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StablePrediction {
    pub law: StableLaw,
    pub tails: TailSpec,
    /// `S_n f / n^{exponent}` converges to `law`.
    pub norm_exponent: f64,
}

/// Limit law of `S_n f / n^α` for the LSV map with `α ∈ (1/2, 1)` and `f(0) ≠ 0`.
pub fn lsv_stable_prediction(alpha: f64, f0: f64, h_half: f64) -> Result<StablePrediction> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stable prediction needs alpha in (1/2,1), got {alpha}; use the Gaussian route for \
             alpha < 1/2 and the n log n normalisation at alpha = 1/2"
        )));
    }
    if f0 == 0.0 || !f0.is_finite() {
        return Err(Error::InvalidParameter(
            "stable prediction needs a finite nonzero f(0); f(0) = 0 gives a Gaussian limit".into(),
        ));
    }
    if !(h_half > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "h(1/2) must be positive, got {h_half}"
        )));
    }
    let p = 1.0 / alpha;
    let k = lsv_tail_constant(alpha, f0, h_half);
    let (c1, c2) = if f0 > 0.0 { (k, 0.0) } else { (0.0, k) };
    let tails = TailSpec::new(p, c1, c2, SlowlyVarying::Constant(1.0))?;
    let law = params_from_tails(&tails)?;
    Ok(StablePrediction {
        law,
        tails,
        norm_exponent: alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub a_n: f64,
    pub b_n: f64,
    pub n: u64,
}

impl Normalizers {
    /// `|n L(B_n) / B_n^p - 1|`.
    pub fn residual(&self, tails: &TailSpec) -> f64 {
        let y = self.b_n.ln();
        match tails.l.ln_at(y) {
            Some(ll) => ((self.n as f64).ln() + ll - tails.p * y).exp_m1().abs(),
            None => f64::INFINITY,
        }
    }
}

/// `B_n` solving `n L(B_n) = B_n^p`, and `A_n = 0` for `p < 1`, `n · mean` otherwise.
pub fn normalizers(tails: &TailSpec, n: u64, mean: f64) -> Result<Normalizers> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let p = tails.p;
    let ln_n = (n as f64).ln();
    // g(y) = p y - ln n - ln L(e^y), increasing on the search range
    let g = |y: f64| -> Option<f64> { tails.l.ln_at(y).map(|ll| p * y - ln_n - ll) };
    let b_n = match &tails.l {
        SlowlyVarying::Constant(a) => ((n as f64) * a).powf(1.0 / p),
        _ => {
            let mut lo = match tails.l {
                // ln(a y) has slope 1/y, below p once y > 1/p
                SlowlyVarying::LogMultiple(_) => 1.0 / p,
                _ => ln_n / p - 60.0,
            };
            let mut hi = lo.max(ln_n / p) + 1.0;
            let mut guard = 0;
            while g(hi).ok_or_else(|| domain_err(hi))? < 0.0 {
                hi += (hi - lo).max(1.0);
                guard += 1;
                if guard > 200 {
                    return Err(Error::NoConvergence {
                        what: "normalizer bracket",
                        iterations: guard,
                        residual: f64::NAN,
                    });
                }
            }
            if g(lo).ok_or_else(|| domain_err(lo))? > 0.0 {
                // n L(B) = B^p has no root above the monotonicity threshold
                if !matches!(tails.l, SlowlyVarying::LogMultiple(_)) {
                    return Err(Error::NoConvergence {
                        what: "normalizer bracket",
                        iterations: guard,
                        residual: f64::NAN,
                    });
                }
                lo = 1.0 / p;
                if g(lo).unwrap_or(1.0) > 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "n = {n} too small for a log-type normaliser"
                    )));
                }
            }
            for _ in 0..300 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid).ok_or_else(|| domain_err(mid))? < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (0.5 * (lo + hi)).exp()
        }
    };
    let a_n = if p < 1.0 { 0.0 } else { n as f64 * mean };
    let out = Normalizers { a_n, b_n, n };
    let residual = out.residual(tails);
    if residual > 1e-10 {
        return Err(Error::NoConvergence {
            what: "normalizer root",
            iterations: 300,
            residual,
        });
    }
    Ok(out)
}

fn domain_err(y: f64) -> Error {
    Error::Domain(format!("slowly varying function undefined at ln x = {y}"))
}
