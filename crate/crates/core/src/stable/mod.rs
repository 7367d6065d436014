//! Stable laws `X_{p,c,β}` with characteristic function
//! `exp(-c|t|^p (1 - iβ sgn(t) tan(pπ/2)))`.

pub mod gamma;
mod quadrature;
pub mod tails;

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{open_unit, Stream};

pub use gamma::gamma;
pub use tails::{
    lsv_stable_prediction, lsv_tail_constant, normalizers, params_from_tails, Normalizers,
    SlowlyVarying, StablePrediction, TailSpec,
};

/// Smallest accepted CDF tolerance.
pub const MIN_CDF_TOL: f64 = 1e-8;

/// Index `p ∈ (0,1) ∪ (1,2]`, scale `c > 0`, skewness `β ∈ [-1,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableLaw {
    p: f64,
    c: f64,
    beta: f64,
}

impl StableLaw {
    pub fn new(p: f64, c: f64, beta: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "stable index must lie in (0,2], got {p}"
            )));
        }
        if p == 1.0 {
            return Err(Error::InvalidParameter(
                "stable index p = 1 is not supported".into(),
            ));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stable scale must be positive, got {c}"
            )));
        }
        if !(-1.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!(
                "skewness must lie in [-1,1], got {beta}"
            )));
        }
        Ok(Self { p, c, beta })
    }

    /// `N(0, σ²)` as the `p = 2` law with `c = σ²/2`.
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(2.0, 0.5 * sigma2, 0.0)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Natural scale `c^{1/p}`.
    pub fn scale(&self) -> f64 {
        self.c.powf(1.0 / self.p)
    }

    /// `β tan(pπ/2)`, set to 0 at `p = 2`.
    fn skew_factor(&self) -> f64 {
        if self.p == 2.0 {
            0.0
        } else {
            self.beta * (self.p * FRAC_PI_2).tan()
        }
    }

    /// Same index and scale with skewness `-β`.
    pub fn reflected(&self) -> Self {
        Self {
            beta: -self.beta,
            ..*self
        }
    }

    pub fn cf(&self, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        let a = self.c * t.abs().powf(self.p);
        let phase = a * self.skew_factor() * t.signum();
        Complex64::from_polar((-a).exp(), phase)
    }

    /// Distribution function by Gil-Pelaez inversion, with the asymptotic
    /// tail series far out. The result is clamped to `[0,1]`.
    pub fn cdf(&self, x: f64, tol: f64) -> Result<f64> {
        if tol < MIN_CDF_TOL {
            return Err(Error::InvalidParameter(format!(
                "cdf tolerance must be at least {MIN_CDF_TOL}, got {tol}"
            )));
        }
        let xs = x / self.scale();
        let omega = self.skew_factor();
        if self.p < 2.0 && xs.abs() >= 1.0 {
            if xs > 0.0 {
                if let Some(sf) = tail_series(self.p, omega, xs, tol) {
                    return Ok((1.0 - sf).clamp(0.0, 1.0));
                }
            } else if let Some(sf) = tail_series(self.p, -omega, -xs, tol) {
                return Ok(sf.clamp(0.0, 1.0));
            }
        }
        if self.p == 2.0 && xs.abs() > 12.0 {
            return Ok(if xs > 0.0 { 1.0 } else { 0.0 });
        }
        let integral = quadrature::gil_pelaez(self.p, omega, xs, tol * PI)?;
        Ok((0.5 - integral / PI).clamp(0.0, 1.0))
    }

    /// CDF at each point of an ascending slice, forced to be nondecreasing.
    pub fn cdf_sorted(&self, xs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut out = xs
            .par_iter()
            .map(|&x| self.cdf(x, tol))
            .collect::<Result<Vec<f64>>>()?;
        let mut running: f64 = 0.0;
        for v in out.iter_mut() {
            running = running.max(*v);
            *v = running;
        }
        Ok(out)
    }

    /// Quantile by bisection on the CDF.
    pub fn quantile(&self, u: f64, tol: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!(
                "quantile level must lie in (0,1), got {u}"
            )));
        }
        let s = self.scale();
        let mut lo = -s;
        let mut hi = s;
        let mut guard = 0;
        while self.cdf(hi, tol)? < u {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::NoConvergence {
                    what: "stable quantile bracket",
                    iterations: guard,
                    residual: u,
                });
            }
        }
        while self.cdf(lo, tol)? > u {
            // Totally skewed laws with p < 1 have support bounded below by 0.
            if lo.abs() < 1e-300 {
                return Ok(0.0);
            }
            lo *= 2.0;
            guard += 1;
            if guard > 400 {
                return Err(Error::NoConvergence {
                    what: "stable quantile bracket",
                    iterations: guard,
                    residual: u,
                });
            }
            if self.p < 1.0 && self.beta == 1.0 {
                lo = 0.0;
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 1e-12 * mid.abs().max(s) {
                break;
            }
            if self.cdf(mid, tol)? < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// One draw by the Chambers–Mallows–Stuck method.
    pub fn sample(&self, rng: &mut Stream) -> f64 {
        let p = self.p;
        let v = PI * (open_unit(rng) - 0.5);
        let w = -open_unit(rng).ln();
        let zeta = self.skew_factor();
        let b = zeta.atan() / p;
        let s = (1.0 + zeta * zeta).powf(0.5 / p);
        let x = s * (p * (v + b)).sin() / v.cos().powf(1.0 / p)
            * ((v - p * (v + b)).cos() / w).powf((1.0 - p) / p);
        self.scale() * x
    }
}

/// Survival function `P[X > x]` of the law with `c = 1` from
///
/// ```text
/// P[X > x] = (1/π) Σ_{k≥1} Im[(-A)^k Γ(kp) e^{-iπkp/2}] / k! · x^{-kp},  A = 1 - iω,
/// ```
///
/// or `None` when the series is not accurate to `tol` at this `x`.
fn tail_series(p: f64, omega: f64, x: f64, tol: f64) -> Option<f64> {
    let neg_a = Complex64::new(-1.0, omega);
    let mut power = Complex64::new(1.0, 0.0);
    let mut factorial = 1.0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut largest: f64 = 0.0;
    let xp = x.powf(-p);
    let mut xpk = 1.0;
    for k in 1..170 {
        let kf = k as f64;
        power *= neg_a;
        factorial *= kf;
        xpk *= xp;
        let kp = kf * p;
        if kp > 170.0 {
            return None;
        }
        let rot = Complex64::from_polar(1.0, -FRAC_PI_2 * kp);
        let term = (power * rot).im * gamma(kp) / factorial * xpk;
        // magnitude bound for the term, independent of accidental zeros of Im
        let bound = power.norm() * gamma(kp).abs() / factorial * xpk;
        if !bound.is_finite() {
            return None;
        }
        largest = largest.max(bound);
        sum += term;
        if bound < 1e-3 * tol {
            if largest * 1e-15 > 1e-3 * tol {
                return None;
            }
            return Some(sum / PI);
        }
        if bound > prev && k > 2 {
            return None;
        }
        prev = bound;
    }
    None
}
