//! Growth of `Var(S_n f)` with `n`.

use serde::{Deserialize, Serialize};

use super::observable::Observable;
use super::sampling::{orbits, Init};
use super::stats::{ls_line, mean_var};
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::MapSpec;

pub const JACKKNIFE_BLOCKS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub n: u64,
    pub variance: f64,
    /// Delete-one-block jackknife standard error.
    pub stderr: f64,
    pub per_n: f64,
    pub per_n_log_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceGrowth {
    pub rows: Vec<VarianceRow>,
    /// Least-squares slope of `Var(S_n)` against `n`.
    pub slope: f64,
    pub intercept: f64,
}

impl VarianceGrowth {
    pub fn last(&self) -> &VarianceRow {
        self.rows.last().expect("at least one row")
    }
}

/// Variance with a jackknife error over contiguous blocks.
pub fn jackknife_variance(xs: &[f64], blocks: usize) -> (f64, f64) {
    let (_, v) = mean_var(xs);
    let n = xs.len();
    if blocks < 2 || n < 2 * blocks {
        return (v, f64::NAN);
    }
    let size = n / blocks;
    let mut reps = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let lo = b * size;
        let hi = if b + 1 == blocks { n } else { lo + size };
        let rest: Vec<f64> = xs[..lo].iter().chain(&xs[hi..]).copied().collect();
        reps.push(mean_var(&rest).1);
    }
    let (m, _) = mean_var(&reps);
    let g = blocks as f64;
    let se = ((g - 1.0) / g * reps.iter().map(|r| (r - m).powi(2)).sum::<f64>()).sqrt();
    (v, se)
}

/// Empirical `Var(S_n f)` over `n_grid`, all lengths taken along the same orbits.
pub fn variance_growth(
    map: &MapSpec,
    f: &Observable,
    n_grid: &[u64],
    n_samples: usize,
    seed: u64,
    init: Init,
    density: Option<&InvariantDensity>,
) -> Result<VarianceGrowth> {
    if n_samples < 2 * JACKKNIFE_BLOCKS {
        return Err(Error::InsufficientData(format!(
            "variance growth needs at least {} samples",
            2 * JACKKNIFE_BLOCKS
        )));
    }
    let o = orbits(map, f, n_grid, n_samples, seed, init, density)?;
    let rows: Vec<VarianceRow> = n_grid
        .iter()
        .zip(&o.sums)
        .map(|(&n, s)| {
            let (variance, stderr) = jackknife_variance(s, JACKKNIFE_BLOCKS);
            let nf = n as f64;
            VarianceRow {
                n,
                variance,
                stderr,
                per_n: variance / nf,
                per_n_log_n: if n > 1 {
                    variance / (nf * nf.ln())
                } else {
                    f64::NAN
                },
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.variance)).collect();
    let (intercept, slope) = match ls_line(&pts) {
        Some(l) => l,
        None => (0.0, rows[0].per_n),
    };
    Ok(VarianceGrowth {
        rows,
        slope,
        intercept,
    })
}
