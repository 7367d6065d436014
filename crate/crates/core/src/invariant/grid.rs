use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    Uniform,
    /// Cells below `x*` shrink by `ratio` towards 0 until `min_width`.
    GeometricNearZero {
        ratio: f64,
        min_width: f64,
    },
    /// Cells follow the Markov ladder, then uniform.
    Ladder,
}

/// Strictly increasing breakpoints `b_0 < ... < b_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    breakpoints: Vec<f64>,
    refinement: Refinement,
}

impl Grid {
    pub fn from_breakpoints(breakpoints: Vec<f64>, refinement: Refinement) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidParameter(
                "grid needs at least one cell".into(),
            ));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "grid breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            refinement,
        })
    }

    /// `m` equal cells on `[0,1]`.
    pub fn uniform(m: usize) -> Result<Self> {
        Self::uniform_on(0.0, 1.0, m)
    }

    pub fn uniform_on(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m == 0 || !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "uniform grid needs m >= 1 and lo < hi, got m = {m}, [{lo}, {hi}]"
            )));
        }
        let mut b: Vec<f64> = (0..=m)
            .map(|j| lo + (hi - lo) * j as f64 / m as f64)
            .collect();
        b[m] = hi;
        Self::from_breakpoints(b, Refinement::Uniform)
    }

    /// Width `1/m` cells down to `x* = w / (1 - ratio)` (with `w = 1/m`), then
    /// geometric cells `[x* r^{k+1}, x* r^k]` while they are wider than
    /// `min_width`, then one last cell `[0, ·]`.
    ///
    /// `m` must be even so that 1/2 is a breakpoint.
    pub fn geometric(m: usize, ratio: f64, min_width: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) || !(min_width > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "geometric grid needs ratio in (0,1) and min_width > 0, got {ratio}, {min_width}"
            )));
        }
        let j0 = (1.0 / (1.0 - ratio)).ceil() as usize;
        if !m.is_multiple_of(2) || m < 2 * j0 {
            return Err(Error::InvalidParameter(format!(
                "geometric grid needs an even m >= {}, got {m}",
                2 * j0
            )));
        }
        let w = 1.0 / m as f64;
        let x_star = j0 as f64 * w;
        let mut low = Vec::new();
        let mut x = x_star;
        loop {
            let next = x * ratio;
            if x - next < min_width {
                break;
            }
            low.push(next);
            x = next;
        }
        let mut b = Vec::with_capacity(low.len() + m - j0 + 2);
        b.push(0.0);
        b.extend(low.iter().rev());
        b.extend((j0..=m).map(|j| j as f64 * w));
        Self::from_breakpoints(b, Refinement::GeometricNearZero { ratio, min_width })
    }

    /// The default grid for LSV densities: ratio 0.9 down to width 1e-15.
    ///
    /// Near 0 the density behaves like `x^{-α}`, so for `α = 0.75` a first cell
    /// of width `1e-8` would still hold about 0.3% of the mass.
    pub fn lsv_default(m: usize) -> Result<Self> {
        Self::geometric(m, 0.9, 1e-15)
    }

    pub fn refinement(&self) -> Refinement {
        self.refinement
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn hi(&self) -> f64 {
        self.breakpoints[self.len()]
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.breakpoints[i], self.breakpoints[i + 1])
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breakpoints[i + 1] - self.breakpoints[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.breakpoints[i] + self.breakpoints[i + 1])
    }

    /// Index of the cell `[b_i, b_{i+1})` holding `x`, clamped to the grid.
    pub fn locate(&self, x: f64) -> usize {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        k.saturating_sub(1).min(self.len() - 1)
    }

    /// Index `j` with `b_j == x`, if `x` is a breakpoint.
    pub fn breakpoint_index(&self, x: f64) -> Option<usize> {
        let k = self.breakpoints.partition_point(|&b| b < x);
        (k < self.breakpoints.len() && self.breakpoints[k] == x).then_some(k)
    }
}
