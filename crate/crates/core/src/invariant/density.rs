//! Invariant densities of Ulam matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::ulam::UlamOperator;
use crate::error::{Error, Result};
use crate::maps::MapVariant;

pub const MAX_SWEEPS: usize = 100_000;

/// Cellwise constant density `h` with `∫ h = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantDensity {
    grid: Grid,
    values: Vec<f64>,
    /// Cumulative cell masses, `cumulative[i] = m([b_0, b_{i+1}])`.
    cumulative: Vec<f64>,
    /// `h(x) ~ x^{-alpha}` shape used inside the first cell when sampling.
    near_zero_exponent: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl InvariantDensity {
    /// Density from cell values, renormalised to mass 1.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidParameter(
                "density needs one nonnegative value per cell".into(),
            ));
        }
        let masses: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, h)| h * grid.width(i))
            .collect();
        Self::from_masses(grid, masses, None, 0.0, 0)
    }

    fn from_masses(
        grid: Grid,
        masses: Vec<f64>,
        near_zero_exponent: Option<f64>,
        residual: f64,
        iterations: usize,
    ) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("density has zero mass".into()));
        }
        let mut cumulative = Vec::with_capacity(masses.len());
        let mut acc = 0.0;
        for m in &masses {
            acc += m / total;
            cumulative.push(acc);
        }
        let values = masses
            .iter()
            .enumerate()
            .map(|(i, m)| m / total / grid.width(i))
            .collect();
        Ok(Self {
            grid,
            values,
            cumulative,
            near_zero_exponent,
            residual,
            iterations,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.values[i] * self.grid.width(i)
    }

    /// `(a, b, h)` per cell.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.grid.len()).map(move |i| {
            let (a, b) = self.grid.cell(i);
            (a, b, self.values[i])
        })
    }

    /// `h(x)` by cell lookup.
    pub fn at(&self, x: f64) -> f64 {
        self.values[self.grid.locate(x)]
    }

    /// `m([a, b])`.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let i0 = self.grid.locate(a);
        let i1 = self.grid.locate(b);
        let mut acc = 0.0;
        for i in i0..=i1 {
            let (lo, hi) = self.grid.cell(i);
            let l = lo.max(a);
            let h = hi.min(b);
            if h > l {
                acc += self.values[i] * (h - l);
            }
        }
        acc
    }

    /// `m((1/2, 1])`.
    pub fn mass_y(&self) -> f64 {
        self.integrate(0.5, 1.0)
    }

    /// `h(1/2⁺)`, extrapolated linearly from the first two cells right of 1/2.
    pub fn h_half(&self) -> f64 {
        let i = self
            .grid
            .breakpoint_index(0.5)
            .unwrap_or_else(|| self.grid.locate(0.5) + 1)
            .min(self.grid.len() - 2);
        let (c0, c1) = (self.grid.center(i), self.grid.center(i + 1));
        let (h0, h1) = (self.values[i], self.values[i + 1]);
        h0 - (h1 - h0) * (c0 - 0.5) / (c1 - c0)
    }

    /// Point with `m([0, x]) = u`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let i = self
            .cumulative
            .partition_point(|&c| c < u)
            .min(self.grid.len() - 1);
        let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        let m = self.cumulative[i] - below;
        let s = if m > 0.0 {
            ((u - below) / m).clamp(0.0, 1.0)
        } else {
            0.5
        };
        let (a, b) = self.grid.cell(i);
        match (i, self.near_zero_exponent) {
            (0, Some(alpha)) if a == 0.0 => b * s.powf(1.0 / (1.0 - alpha)),
            _ => a + (b - a) * s,
        }
    }

    /// Point with `m((lo, x]) = u · m((lo, hi])`, for `lo`, `hi` breakpoints.
    pub fn inverse_cdf_between(&self, lo: f64, hi: f64, u: f64) -> f64 {
        let c_lo = self.cdf(lo);
        let c_hi = self.cdf(hi);
        let x = self.inverse_cdf(c_lo + u * (c_hi - c_lo));
        x.clamp(lo, hi)
    }

    /// Point with `m((lo, x]) = mass`, measured from `lo` so that tiny masses
    /// keep their relative precision.
    pub fn inverse_mass_above(&self, lo: f64, mass: f64) -> f64 {
        let i = self.grid.locate(lo);
        let (_, b) = self.grid.cell(i);
        let first = self.values[i] * (b - lo);
        if mass <= first && self.values[i] > 0.0 {
            return lo + mass / self.values[i];
        }
        self.inverse_cdf(self.cumulative[i] + (mass - first))
            .max(lo)
    }

    /// `m([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid.lo() {
            return 0.0;
        }
        if x >= self.grid.hi() {
            return 1.0;
        }
        let i = self.grid.locate(x);
        let below = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        let (a, _) = self.grid.cell(i);
        below + self.values[i] * (x - a)
    }

    /// Least-squares slope of `ln h` against `ln x` over cells inside `[lo, hi]`.
    pub fn log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = (0..self.grid.len())
            .filter_map(|i| {
                let (a, b) = self.grid.cell(i);
                (a >= lo && b <= hi && self.values[i] > 0.0)
                    .then(|| (self.grid.center(i).ln(), self.values[i].ln()))
            })
            .collect();
        crate::montecarlo::stats::ls_slope(&pts)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["left", "right", "density"])?;
        for (a, b, h) in self.cells() {
            w.write_record([a.to_string(), b.to_string(), h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer(&mut f, self)?;
        f.flush()?;
        Ok(())
    }
}

/// `‖πP - π‖₁`.
fn residual(op: &UlamOperator, pi: &[f64]) -> f64 {
    let next = op.matrix().left_mul(pi);
    next.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// Leading left fixed vector of the Ulam matrix, as a density.
///
/// Cells left of 1/2 only move mass to cells of equal or higher index, so the
/// fixed-point equations for them are triangular once the inflow from the
/// right half is known. Each sweep solves that block exactly and updates the
/// right half, which converges at the rate of the induced map rather than at
/// the (very slow) rate of the neutral fixed point. Plain power iteration is
/// used when the triangular structure is absent.
pub fn invariant_density(op: &UlamOperator, tol: f64) -> Result<InvariantDensity> {
    let n = op.grid().len();
    let p = op.matrix();
    let split = op.first_right();
    let triangular = (0..split).all(|i| p.row(i).all(|(j, _)| j >= i));
    let mut pi = vec![1.0 / n as f64; n];
    let mut res = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        if triangular {
            let mut acc = vec![0.0; n];
            for i in split..n {
                for (j, v) in p.row(i) {
                    acc[j] += pi[i] * v;
                }
            }
            for i in 0..split {
                let stay = p.get(i, i);
                let val = if stay < 1.0 {
                    acc[i] / (1.0 - stay)
                } else {
                    0.0
                };
                pi[i] = val;
                for (j, v) in p.row(i) {
                    if j > i {
                        acc[j] += val * v;
                    }
                }
            }
            pi[split..n].copy_from_slice(&acc[split..n]);
        } else {
            pi = p.left_mul(&pi);
        }
        let total: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= total;
        }
        res = residual(op, &pi);
        if res < tol {
            break;
        }
    }
    if !(res < tol) {
        return Err(Error::NoConvergence {
            what: "invariant density",
            iterations: sweeps,
            residual: res,
        });
    }
    let near_zero = match op.map().variant {
        MapVariant::Lsv => Some(op.map().alpha),
        _ => None,
    };
    InvariantDensity::from_masses(op.grid().clone(), pi, near_zero, res, sweeps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::ulam::{assemble_ulam, Assembly};
    use crate::maps::MapSpec;

    fn lsv_density(alpha: f64, m: usize) -> InvariantDensity {
        let op = assemble_ulam(
            &MapSpec::lsv(alpha).unwrap(),
            &Grid::lsv_default(m).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        invariant_density(&op, 1e-12).unwrap()
    }

    #[test]
    fn doubling_map_is_lebesgue() {
        let op = assemble_ulam(
            &MapSpec::doubling(),
            &Grid::uniform(64).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        let d = invariant_density(&op, 1e-13).unwrap();
        assert!(d.values().iter().all(|&h| (h - 1.0).abs() < 1e-10));
    }

    #[test]
    fn density_is_normalised_and_fixed() {
        let d = lsv_density(0.5, 1024);
        let total: f64 = d.cells().map(|(a, b, h)| h * (b - a)).sum();
        assert!((total - 1.0).abs() < 1e-8);
        assert!(d.values().iter().all(|&h| h >= 0.0));
        assert!(d.residual < 1e-12);
    }

    #[test]
    fn singularity_exponent_at_three_quarters() {
        let d = lsv_density(0.75, 4096);
        let slope = d.log_slope(1e-6, 1e-3).unwrap();
        assert!((slope + 0.75).abs() < 0.075, "slope {slope}");
    }

    #[test]
    fn h_half_is_stable_under_refinement() {
        let a = lsv_density(0.5, 2048).h_half();
        let b = lsv_density(0.5, 4096).h_half();
        assert!((a / b - 1.0).abs() < 0.02, "{a} {b}");
    }

    #[test]
    fn inverse_cdf_round_trip() {
        let d = lsv_density(0.6, 256);
        for u in [1e-9, 1e-4, 0.1, 0.5, 0.93] {
            let x = d.inverse_cdf(u);
            if x > d.grid().width(0) {
                assert!((d.cdf(x) - u).abs() < 1e-12);
            }
        }
        let y = d.inverse_cdf_between(0.5, 1.0, 0.25);
        let frac = (d.cdf(y) - d.cdf(0.5)) / d.mass_y();
        assert!((frac - 0.25).abs() < 1e-12);
    }
}
