//! Local characteristic functions `∫_{Z ∩ T^{-n} Z} e^{itS_n f / B_n} dm`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::observable::Observable;
use super::sampling::{orbits, Init};
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::MapSpec;

pub const MIN_SURVIVORS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalCf {
    pub t: f64,
    pub estimate: Complex64,
    /// Standard error of the estimate (componentwise, combined in quadrature).
    pub stderr: f64,
    pub survivors: usize,
    pub samples: usize,
}

/// Monte Carlo estimate for `Z = (z_lower, 1]` with `x ~ m`, for each `t`.
#[allow(clippy::too_many_arguments)]
pub fn local_characteristic(
    map: &MapSpec,
    f: &Observable,
    z_lower: f64,
    n: u64,
    ts: &[f64],
    b_n: f64,
    n_samples: usize,
    seed: u64,
    density: &InvariantDensity,
) -> Result<Vec<LocalCf>> {
    if !(b_n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "B_n must be positive, got {b_n}"
        )));
    }
    let o = orbits(
        map,
        f,
        &[n],
        n_samples,
        seed,
        Init::InvariantDensity,
        Some(density),
    )?;
    let kept: Vec<f64> = o
        .starts
        .iter()
        .zip(&o.ends[0])
        .zip(&o.sums[0])
        .filter(|((&x0, &xn), _)| x0 > z_lower && xn > z_lower)
        .map(|(_, &s)| s / b_n)
        .collect();
    if kept.len() < MIN_SURVIVORS {
        return Err(Error::InsufficientData(format!(
            "{} orbits start and end in Z, need at least {MIN_SURVIVORS}",
            kept.len()
        )));
    }
    let nf = n_samples as f64;
    Ok(ts
        .iter()
        .map(|&t| {
            let (mut re, mut im, mut re2, mut im2) = (0.0, 0.0, 0.0, 0.0);
            for &s in &kept {
                let (si, co) = (t * s).sin_cos();
                re += co;
                im += si;
                re2 += co * co;
                im2 += si * si;
            }
            let (mr, mi) = (re / nf, im / nf);
            let var = (re2 / nf - mr * mr) + (im2 / nf - mi * mi);
            LocalCf {
                t,
                estimate: Complex64::new(mr, mi),
                stderr: (var.max(0.0) / (nf - 1.0)).sqrt(),
                survivors: kept.len(),
                samples: n_samples,
            }
        })
        .collect())
}
