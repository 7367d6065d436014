//! Intermittent interval maps with a neutral fixed point at 0.
//!
//! The main family is the Liverani–Saussol–Vaienti map
//!
//! ```text
//! T(x) = x (1 + (2x)^α)   for 0 <= x <= 1/2
//! T(x) = 2x - 1           for 1/2 < x <= 1
//! ```
//!
//! Both branches are increasing and full, so `[0,1]` carries the Markov
//! ladder `x_0 = 1 > x_1 = 1/2 > x_2 > ...` of left-branch preimages of 1.
//! A point of `(x_{k+1}, x_k]` needs exactly `k` steps to enter `(1/2, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of bisection halvings used by [`left_inverse`].
pub const BISECTION_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapVariant {
    Lsv,
    /// `x (1 + κ x log² x)` on the left branch, κ chosen so the branch is full.
    /// Only used for ladder and tail exploration.
    NeutralLog,
    /// The doubling map `2x mod 1`.
    PiecewiseLinearToy,
}

/// `x^α` with exact-sqrt fast paths for the exponents used most often.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaPow {
    Quarter,
    Half,
    ThreeQuarters,
    General(f64),
}

impl AlphaPow {
    pub fn new(alpha: f64) -> Self {
        if alpha == 0.25 {
            AlphaPow::Quarter
        } else if alpha == 0.5 {
            AlphaPow::Half
        } else if alpha == 0.75 {
            AlphaPow::ThreeQuarters
        } else {
            AlphaPow::General(alpha)
        }
    }

    #[inline(always)]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            AlphaPow::Quarter => x.sqrt().sqrt(),
            AlphaPow::Half => x.sqrt(),
            AlphaPow::ThreeQuarters => {
                let s = x.sqrt();
                s * s.sqrt()
            }
            AlphaPow::General(a) => x.powf(a),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    pub variant: MapVariant,
    pub alpha: f64,
    #[serde(default)]
    pub description: String,
}

const LOG_KAPPA: f64 = 2.0 / (std::f64::consts::LN_2 * std::f64::consts::LN_2);

impl MapSpec {
    pub fn lsv(alpha: f64) -> Result<Self> {
        Self::new(MapVariant::Lsv, alpha)
    }

    pub fn new(variant: MapVariant, alpha: f64) -> Result<Self> {
        if variant != MapVariant::PiecewiseLinearToy && !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        let description = match variant {
            MapVariant::Lsv => format!("LSV map, alpha = {alpha}"),
            MapVariant::NeutralLog => "neutral map x(1 + k x log^2 x)".to_string(),
            MapVariant::PiecewiseLinearToy => "doubling map".to_string(),
        };
        Ok(Self {
            variant,
            alpha,
            description,
        })
    }

    pub fn doubling() -> Self {
        Self {
            variant: MapVariant::PiecewiseLinearToy,
            alpha: 0.5,
            description: "doubling map".to_string(),
        }
    }

    pub fn alpha_pow(&self) -> AlphaPow {
        AlphaPow::new(self.alpha)
    }

    /// Left branch on `[0, 1/2]`, clamped to `[0, 1]`.
    #[inline]
    pub fn left(&self, x: f64) -> f64 {
        let y = match self.variant {
            MapVariant::Lsv => x * (1.0 + (2.0 * x).powf(self.alpha)),
            MapVariant::NeutralLog => {
                if x <= 0.0 {
                    0.0
                } else {
                    let l = x.ln();
                    x * (1.0 + LOG_KAPPA * x * l * l)
                }
            }
            MapVariant::PiecewiseLinearToy => 2.0 * x,
        };
        y.clamp(0.0, 1.0)
    }

    /// `T(x) - x` on the left branch, computed without cancellation.
    #[inline]
    pub fn left_excess(&self, x: f64) -> f64 {
        match self.variant {
            MapVariant::Lsv => x * (2.0 * x).powf(self.alpha),
            MapVariant::NeutralLog => {
                if x <= 0.0 {
                    0.0
                } else {
                    let l = x.ln();
                    LOG_KAPPA * x * x * l * l
                }
            }
            MapVariant::PiecewiseLinearToy => x,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if x <= 0.5 {
            self.left(x)
        } else {
            (2.0 * x - 1.0).clamp(0.0, 1.0)
        }
    }

    /// Right-branch preimage of `y`, in `(1/2, 1]`.
    #[inline]
    pub fn right_preimage(&self, y: f64) -> f64 {
        0.5 * (1.0 + y)
    }

    /// Left-branch preimage of `y ∈ [0,1]`.
    ///
    /// Newton from the right for the convex LSV branch (monotone, quadratic),
    /// bisection otherwise. Agrees with [`left_inverse`] to a few ulps.
    pub fn left_preimage(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 0.5;
        }
        match self.variant {
            MapVariant::PiecewiseLinearToy => 0.5 * y,
            MapVariant::NeutralLog => bisect_left(self, y),
            MapVariant::Lsv => {
                let a = self.alpha;
                let mut x = y.min(0.5);
                for _ in 0..60 {
                    let p = (2.0 * x).powf(a);
                    let g = x * (1.0 + p) - y;
                    let dg = 1.0 + (1.0 + a) * p;
                    let next = x - g / dg;
                    // Convexity keeps Newton iterates above the root; a step that
                    // does not decrease x means we are at rounding level.
                    if !(next < x) || next <= 0.0 {
                        break;
                    }
                    x = next;
                }
                x
            }
        }
    }

    pub fn orbit(&self, x0: f64, n: usize) -> Result<Vec<f64>> {
        orbit(self, x0, n)
    }
}

fn bisect_left(map: &MapSpec, y: f64) -> f64 {
    // The left branch satisfies T(x) >= x, so the root lies in [0, min(y, 1/2)].
    let mut lo = 0.0_f64;
    let mut hi = y.min(0.5);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if map.left(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (map.left(lo) - y).abs() <= (map.left(hi) - y).abs() {
        lo
    } else {
        hi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0,1), got {alpha}"
        )))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in [0,1], got {x}")))
    }
}

/// One step of the LSV map.
pub fn lsv_apply(x: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_unit("x", x)?;
    Ok(MapSpec {
        variant: MapVariant::Lsv,
        alpha,
        description: String::new(),
    }
    .apply(x))
}

/// The unique `x ∈ [0, 1/2]` with `T(x) = y`, by bisection.
///
/// `tol` is an absolute bound on `|T(x) - y|`; the bracket is always halved
/// down to rounding level, so the check only fails for a broken map.
pub fn left_inverse(y: f64, alpha: f64, tol: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_unit("y", y)?;
    let map = MapSpec {
        variant: MapVariant::Lsv,
        alpha,
        description: String::new(),
    };
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == 1.0 {
        return Ok(0.5);
    }
    let x = bisect_left(&map, y);
    let residual = (map.left(x) - y).abs();
    if residual > tol.max(4.0 * f64::EPSILON * y) {
        return Err(Error::NoConvergence {
            what: "left_inverse",
            iterations: BISECTION_STEPS,
            residual,
        });
    }
    Ok(x)
}

/// Left-branch preimages of 1: `x_0 = 1`, `x_1 = 1/2`, `x_{k+1} = T^{-1}(x_k) ∩ [0,1/2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovLadder {
    pub alpha: f64,
    pub points: Vec<f64>,
    /// `gaps[k] = x_k - x_{k+1}`.
    pub gaps: Vec<f64>,
}

impl MarkovLadder {
    /// Ladder with `depth + 1` points `x_0..=x_depth`, built with [`MapSpec::left_preimage`].
    ///
    /// Each point is checked against `T(x_{k+1}) = x_k` to relative tolerance `rel_tol`.
    pub fn build(map: &MapSpec, depth: usize, rel_tol: f64) -> Result<Self> {
        if depth < 2 {
            return Err(Error::InvalidParameter(format!(
                "ladder depth must be at least 2, got {depth}"
            )));
        }
        let mut points = Vec::with_capacity(depth + 1);
        points.push(1.0);
        points.push(0.5);
        for k in 1..depth {
            let xk = points[k];
            let next = map.left_preimage(xk);
            let residual = (map.left(next) - xk).abs() / xk;
            if !(next > 0.0 && next < xk) || residual > rel_tol.max(8.0 * f64::EPSILON) {
                return Err(Error::Ladder {
                    index: k + 1,
                    residual,
                });
            }
            points.push(next);
        }
        let gaps = (0..depth)
            .map(|k| {
                if k == 0 {
                    0.5
                } else {
                    map.left_excess(points[k + 1])
                }
            })
            .collect();
        Ok(Self {
            alpha: map.alpha,
            points,
            gaps,
        })
    }

    pub fn depth(&self) -> usize {
        self.points.len() - 1
    }

    /// `C = ½ α^{-1/α}` in `x_k ~ C k^{-1/α}`.
    pub fn asymptotic_constant(alpha: f64) -> f64 {
        0.5 * alpha.powf(-1.0 / alpha)
    }

    /// `x_k k^{1/α}`.
    pub fn scaled(&self, k: usize) -> f64 {
        self.points[k] * (k as f64).powf(1.0 / self.alpha)
    }

    /// Number of steps a point of `(0, 1]` needs to enter `(1/2, 1]`
    /// (0 for points already there), or `None` if it lies below `x_depth`.
    pub fn entry_time(&self, x: f64) -> Option<usize> {
        if x > 0.5 {
            return Some(0);
        }
        // points is decreasing; find k with x_{k+1} < x <= x_k.
        let idx = self.points.partition_point(|&p| p >= x);
        // points[..idx] >= x, so x_{idx-1} >= x > x_idx.
        if idx >= self.points.len() {
            None
        } else {
            Some(idx - 1)
        }
    }
}

/// Ladder for the LSV map with parameter `alpha`.
pub fn markov_ladder(alpha: f64, depth: usize) -> Result<MarkovLadder> {
    let map = MapSpec::lsv(alpha)?;
    MarkovLadder::build(&map, depth, 1e-12)
}

/// `(x0, T x0, ..., T^{n-1} x0)` in double precision.
pub fn orbit(map: &MapSpec, x0: f64, n: usize) -> Result<Vec<f64>> {
    check_unit("x0", x0)?;
    let mut out = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        out.push(x);
        x = map.apply(x);
    }
    Ok(out)
}
