//! Tail of the induced observable and the growth of its oscillation on branches.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{induced_value, InducedSystem, RETURN_CAP};
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::montecarlo::hill::{tail_fit, TailFit};
use crate::montecarlo::observable::{Observable, ObservableFamily};
use crate::montecarlo::stats::ls_line;
use crate::rng::{open_unit, stream};
use crate::stable::tails::lsv_tail_constant;

/// Top fraction of order statistics used by the tail fits.
pub const TOP_FRACTION: f64 = 0.01;
const SURVIVAL_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    /// `f_Y` at points drawn from `m` restricted to `Y`.
    #[serde(skip)]
    pub samples: Vec<f64>,
    /// Excursions stopped at the cap; their partial sums are kept.
    pub censored: usize,
    /// `(x, m[f_Y > x])` on a log grid, in units of `m` (not `m|_Y`).
    pub survival: Vec<(f64, f64)>,
    pub fit: TailFit,
    /// Hill level of the upper tail converted to `m`: `m[f_Y > x] ≈ ĉ₁ x^{-p̂}`.
    pub c1_hat: Option<f64>,
    pub c2_hat: Option<f64>,
    pub predicted_p: Option<f64>,
    pub predicted_c1: Option<f64>,
    pub predicted_c2: Option<f64>,
    pub mass_y: f64,
}

impl TailProfile {
    pub fn p_hat(&self) -> Option<f64> {
        self.fit.upper.map(|u| u.p_hat)
    }
}

/// `(p, c₁, c₂)` from the closed forms, where the family has one.
fn predicted(sys: &InducedSystem, f: &Observable) -> (Option<f64>, Option<f64>, Option<f64>) {
    let alpha = sys.map.alpha;
    if let ObservableFamily::InversePower { beta, .. } = f.family {
        return (Some(1.0 / (alpha + beta)), None, None);
    }
    match f.value_at_zero() {
        Some(f0) if f0 != 0.0 => {
            let c = lsv_tail_constant(alpha, f0, sys.h_half);
            let (c1, c2) = if f0 > 0.0 { (c, 0.0) } else { (0.0, c) };
            (Some(1.0 / alpha), Some(c1), Some(c2))
        }
        _ => (None, None, None),
    }
}

fn survival_table(samples: &[f64], mass: f64) -> Vec<(f64, f64)> {
    let mut pos: Vec<f64> = samples.iter().copied().filter(|&x| x > 0.0).collect();
    if pos.len() < 2 {
        return Vec::new();
    }
    pos.par_sort_unstable_by(|a, b| a.total_cmp(b));
    let lo = pos[pos.len() / 2];
    let hi = pos[pos.len() - 1];
    if !(hi > lo) {
        return Vec::new();
    }
    let n = samples.len() as f64;
    (0..SURVIVAL_POINTS)
        .map(|i| {
            let x = lo * (hi / lo).powf(i as f64 / (SURVIVAL_POINTS - 1) as f64);
            let above = pos.len() - pos.partition_point(|&v| v <= x);
            (x, mass * above as f64 / n)
        })
        .collect()
}

/// Samples `f_Y` under `m|_Y` and fits its tails.
pub fn tail_profile(
    sys: &InducedSystem,
    f: &Observable,
    density: &InvariantDensity,
    n_samples: usize,
    seed: u64,
) -> Result<TailProfile> {
    tail_profile_beyond(sys, f, density, 0, n_samples, seed)
}

/// As [`tail_profile`], but sampling only the excursions with `φ > k_min`.
///
/// The fits then see order statistics far deeper in the tail than plain
/// sampling reaches; survival values and `ĉ` stay in units of `m`.
pub fn tail_profile_beyond(
    sys: &InducedSystem,
    f: &Observable,
    density: &InvariantDensity,
    k_min: usize,
    n_samples: usize,
    seed: u64,
) -> Result<TailProfile> {
    if n_samples == 0 {
        return Err(Error::InsufficientData("tail profile needs samples".into()));
    }
    if k_min > sys.k_max {
        return Err(Error::InvalidParameter(format!(
            "k_min {k_min} beyond k_max {}",
            sys.k_max
        )));
    }
    let mass = sys.tail(k_min);
    let draws: Vec<(f64, bool)> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i);
            let y = density
                .inverse_mass_above(0.5, open_unit(&mut rng) * mass)
                .max(f64::from_bits(0.5f64.to_bits() + 1));
            match induced_value(f, &sys.map, y, RETURN_CAP) {
                Ok(e) => (e.sum, false),
                Err(_) => {
                    let mut partial = 0.0;
                    let mut x = y;
                    for _ in 0..RETURN_CAP {
                        partial += f.eval(x);
                        x = sys.map.apply(x);
                    }
                    (partial, true)
                }
            }
        })
        .collect();
    let censored = draws.iter().filter(|d| d.1).count();
    let samples: Vec<f64> = draws.into_iter().map(|d| d.0).collect();
    let mut fit = tail_fit(&samples, TOP_FRACTION);
    if censored > 0 {
        fit.notes.push(format!(
            "{censored} excursions reached the cap of {RETURN_CAP}"
        ));
    }
    let (predicted_p, predicted_c1, predicted_c2) = predicted(sys, f);
    Ok(TailProfile {
        survival: survival_table(&samples, mass),
        c1_hat: fit.upper.filter(|u| !u.flagged).map(|u| mass * u.c_hat),
        c2_hat: fit.lower.filter(|u| !u.flagged).map(|u| mass * u.c_hat),
        fit,
        samples,
        censored,
        predicted_p,
        predicted_c1,
        predicted_c2,
        mass_y: sys.mass_y,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub k: usize,
    /// `sup - inf` of `f_Y` over the sampled points of `J_k`.
    pub osc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderGrowth {
    pub rows: Vec<HolderRow>,
    /// Log-log slope of `osc_k` against `k`; `None` when fewer than two rows oscillate.
    pub exponent: Option<f64>,
    /// The bound `1 - γ(1 + 1/α)`.
    pub predicted: Option<f64>,
}

/// Oscillation of `f_Y` on the branches `J_k`, `k ∈ ks`, from
/// `points` evenly spaced interior points per branch.
pub fn holder_growth(
    sys: &InducedSystem,
    f: &Observable,
    ks: &[usize],
    points: usize,
) -> Result<HolderGrowth> {
    if points < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 points per branch".into(),
        ));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > sys.k_max) {
        return Err(Error::InvalidParameter(format!(
            "branch {k} outside 1..={}",
            sys.k_max
        )));
    }
    let rows = ks
        .par_iter()
        .map(|&k| {
            let b = sys.branches[k - 1];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..points {
                let y = b.lo + (b.hi - b.lo) * (j as f64 + 0.5) / points as f64;
                let v = induced_value(f, &sys.map, y, RETURN_CAP)?.sum;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            Ok(HolderRow { k, osc: hi - lo })
        })
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.osc > 0.0)
        .map(|r| ((r.k as f64).ln(), r.osc.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        ls_line(&pts).map(|l| l.1)
    } else {
        None
    };
    let predicted = f
        .holder_exponent()
        .map(|g| 1.0 - g * (1.0 + 1.0 / sys.map.alpha));
    Ok(HolderGrowth {
        rows,
        exponent,
        predicted,
    })
}
