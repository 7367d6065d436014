//! Parametric observables `f : [0,1] -> R` and their centring.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    /// Positive exponent; the term vanishes at 0.
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObservableFamily {
    /// `f0 + Σ coef · x^exponent`.
    HolderPoly { f0: f64, terms: Vec<PowerTerm> },
    /// Smooth bump of the given height supported on `center ± half_width`, away from 0.
    IndicatorSmooth {
        center: f64,
        half_width: f64,
        height: f64,
    },
    /// `x^{-beta} + offset`.
    InversePower { beta: f64, offset: f64 },
    /// `T(x) - x` for the LSV map with this `alpha`: a coboundary.
    Coboundary { alpha: f64 },
}

/// How the centring constant enters: `f - c0` or `f - c0 · x`.
///
/// The second form keeps `f(0)`, which fixes the stable limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    None,
    Shift,
    PreserveF0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub family: ObservableFamily,
    pub centering: Centering,
    #[serde(default)]
    pub c0: f64,
}

const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

impl Observable {
    pub fn new(family: ObservableFamily, centering: Centering) -> Result<Self> {
        match &family {
            ObservableFamily::HolderPoly { terms, .. } => {
                if terms.iter().any(|t| !(t.exponent > 0.0)) {
                    return Err(Error::InvalidParameter(
                        "power terms need positive exponents".into(),
                    ));
                }
            }
            ObservableFamily::IndicatorSmooth {
                center, half_width, ..
            } => {
                if !(*half_width > 0.0 && center - half_width > 0.0 && center + half_width <= 1.0) {
                    return Err(Error::InvalidParameter("bump must sit inside (0,1]".into()));
                }
            }
            ObservableFamily::InversePower { beta, .. } => {
                if !(*beta > 0.0 && *beta < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "inverse power exponent must lie in (0,1), got {beta}"
                    )));
                }
                if centering == Centering::PreserveF0 {
                    return Err(Error::InvalidParameter(
                        "inverse power observables are centred by a shift".into(),
                    ));
                }
            }
            ObservableFamily::Coboundary { alpha } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "coboundary map exponent must lie in (0,1), got {alpha}"
                    )));
                }
            }
        }
        Ok(Self {
            family,
            centering,
            c0: 0.0,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            family: ObservableFamily::HolderPoly {
                f0: value,
                terms: vec![],
            },
            centering: Centering::None,
            c0: 0.0,
        }
    }

    /// `f0 + Σ coef x^exponent`, centred as requested.
    pub fn poly(f0: f64, terms: &[(f64, f64)], centering: Centering) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|&(coef, exponent)| PowerTerm { coef, exponent })
            .collect();
        Self::new(ObservableFamily::HolderPoly { f0, terms }, centering)
    }

    /// `1 - x / E[x]` once centred: Lipschitz with `f(0) = 1`.
    pub fn unit_at_zero() -> Self {
        Self::poly(1.0, &[], Centering::PreserveF0).expect("valid")
    }

    /// `x - E[x]` once centred.
    pub fn identity_centred() -> Self {
        Self::poly(0.0, &[(1.0, 1.0)], Centering::Shift).expect("valid")
    }

    /// `x² - κx` once centred: vanishes at 0.
    pub fn square_vanishing() -> Self {
        Self::poly(0.0, &[(1.0, 2.0)], Centering::PreserveF0).expect("valid")
    }

    /// `χ∘T - χ` with `χ(x) = x` for the LSV map with exponent `alpha`.
    pub fn coboundary(alpha: f64) -> Result<Self> {
        Self::new(ObservableFamily::Coboundary { alpha }, Centering::None)
    }

    pub fn inverse_power(beta: f64, offset: f64) -> Result<Self> {
        Self::new(
            ObservableFamily::InversePower { beta, offset },
            Centering::Shift,
        )
    }

    /// Checks the integrability condition `α + β < 1` for inverse powers.
    pub fn validate_for(&self, alpha: f64) -> Result<()> {
        if let ObservableFamily::InversePower { beta, .. } = self.family {
            if alpha + beta >= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "x^(-{beta}) is not integrable for alpha = {alpha}: need alpha + beta < 1"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn base(&self, x: f64) -> f64 {
        match &self.family {
            ObservableFamily::HolderPoly { f0, terms } => {
                let mut v = *f0;
                for t in terms {
                    v += t.coef * pow_fast(x, t.exponent);
                }
                v
            }
            ObservableFamily::IndicatorSmooth {
                center,
                half_width,
                height,
            } => bump((x - center) / half_width) * height,
            ObservableFamily::InversePower { beta, offset } => x.powf(-beta) + offset,
            ObservableFamily::Coboundary { alpha } => {
                if x <= 0.5 {
                    (x * (2.0 * x).powf(*alpha)).min(1.0 - x)
                } else {
                    x - 1.0
                }
            }
        }
    }

    #[inline]
    fn weight(&self, x: f64) -> f64 {
        match self.centering {
            Centering::None => 0.0,
            Centering::Shift => 1.0,
            Centering::PreserveF0 => x,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.base(x) - self.c0 * self.weight(x)
    }

    /// `[a0, a1, a2]` when `f = a0 + a1 x + a2 x²`.
    pub fn quadratic_coefficients(&self) -> Option<[f64; 3]> {
        let ObservableFamily::HolderPoly { f0, terms } = &self.family else {
            return None;
        };
        let mut a = [*f0, 0.0, 0.0];
        for t in terms {
            if t.exponent == 1.0 {
                a[1] += t.coef;
            } else if t.exponent == 2.0 {
                a[2] += t.coef;
            } else {
                return None;
            }
        }
        match self.centering {
            Centering::None => {}
            Centering::Shift => a[0] -= self.c0,
            Centering::PreserveF0 => a[1] -= self.c0,
        }
        Some(a)
    }

    /// `f(0)`, or `None` when `f` is unbounded at 0.
    pub fn value_at_zero(&self) -> Option<f64> {
        match self.family {
            ObservableFamily::InversePower { .. } => None,
            _ => Some(self.eval(0.0)),
        }
    }

    /// Hölder exponent near 0 (capped at 1); `None` if unbounded.
    pub fn holder_exponent(&self) -> Option<f64> {
        match &self.family {
            ObservableFamily::HolderPoly { terms, .. } => Some(
                terms
                    .iter()
                    .filter(|t| t.coef != 0.0)
                    .map(|t| t.exponent)
                    .fold(1.0, f64::min),
            ),
            ObservableFamily::IndicatorSmooth { .. } | ObservableFamily::Coboundary { .. } => {
                Some(1.0)
            }
            ObservableFamily::InversePower { .. } => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.family, ObservableFamily::InversePower { .. })
    }

    fn base_integral(&self, a: f64, b: f64) -> f64 {
        match &self.family {
            ObservableFamily::HolderPoly { f0, terms } => {
                let mut v = f0 * (b - a);
                for t in terms {
                    let e = t.exponent + 1.0;
                    v += t.coef * (b.powf(e) - a.powf(e)) / e;
                }
                v
            }
            ObservableFamily::IndicatorSmooth {
                center,
                half_width,
                height,
            } => {
                let lo = a.max(center - half_width);
                let hi = b.min(center + half_width);
                if hi <= lo {
                    return 0.0;
                }
                let panels = 64;
                let w = (hi - lo) / panels as f64;
                let mut acc = 0.0;
                for k in 0..panels {
                    let mid = lo + (k as f64 + 0.5) * w;
                    for (x, wt) in GL8_X.iter().zip(GL8_W) {
                        let d = 0.5 * w * x;
                        acc += wt
                            * (bump((mid - d - center) / half_width)
                                + bump((mid + d - center) / half_width));
                    }
                }
                acc * 0.5 * w * height
            }
            ObservableFamily::InversePower { beta, offset } => {
                let e = 1.0 - beta;
                (b.powf(e) - a.powf(e)) / e + offset * (b - a)
            }
            ObservableFamily::Coboundary { alpha } => {
                let e = alpha + 2.0;
                let left = |x: f64| 2f64.powf(*alpha) * x.powf(e) / e;
                let right = |x: f64| 0.5 * x * x - x;
                let (la, lb) = (a.min(0.5), b.min(0.5));
                let (ra, rb) = (a.max(0.5), b.max(0.5));
                (left(lb) - left(la)) + (right(rb) - right(ra))
            }
        }
    }

    fn weight_integral(&self, a: f64, b: f64) -> f64 {
        match self.centering {
            Centering::None => 0.0,
            Centering::Shift => b - a,
            Centering::PreserveF0 => 0.5 * (b * b - a * a),
        }
    }

    /// `∫_a^b f(x) dx`, exact for the power families.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.base_integral(a, b) - self.c0 * self.weight_integral(a, b)
    }

    /// `∫ f dm` against a cellwise constant density.
    pub fn mean(&self, density: &InvariantDensity) -> f64 {
        density
            .cells()
            .map(|(a, b, h)| h * self.integral(a, b))
            .sum()
    }

    /// Copy with `c0` chosen so that `∫ f dm = 0`. Idempotent.
    pub fn centred(&self, density: &InvariantDensity) -> Result<Self> {
        if self.centering == Centering::None {
            return Ok(self.clone());
        }
        let w: f64 = density
            .cells()
            .map(|(a, b, h)| h * self.weight_integral(a, b))
            .sum();
        if !(w > 0.0) {
            return Err(Error::InvalidParameter(
                "centring weight has zero mass".into(),
            ));
        }
        let mut out = self.clone();
        out.c0 += self.mean(density) / w;
        Ok(out)
    }

    pub fn describe(&self) -> String {
        let body = match &self.family {
            ObservableFamily::HolderPoly { f0, terms } => {
                let mut s = format!("{f0}");
                for t in terms {
                    s.push_str(&format!(" + {}x^{}", t.coef, t.exponent));
                }
                s
            }
            ObservableFamily::IndicatorSmooth {
                center,
                half_width,
                height,
            } => format!("{height}·bump({center}±{half_width})"),
            ObservableFamily::InversePower { beta, offset } => format!("x^-{beta} + {offset}"),
            ObservableFamily::Coboundary { alpha } => format!("T(x) - x (alpha = {alpha})"),
        };
        match self.centering {
            Centering::None => body,
            Centering::Shift => format!("{body} - {:.6}", self.c0),
            Centering::PreserveF0 => format!("{body} - {:.6}x", self.c0),
        }
    }
}

#[inline(always)]
fn pow_fast(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.5 {
        x.sqrt()
    } else {
        x.powf(e)
    }
}

#[inline]
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::{Grid, InvariantDensity};

    fn lebesgue(m: usize) -> InvariantDensity {
        InvariantDensity::from_values(Grid::uniform(m).unwrap(), vec![1.0; m]).unwrap()
    }

    #[test]
    fn exact_integrals() {
        let f = Observable::poly(2.0, &[(3.0, 1.0), (-1.0, 0.3)], Centering::None).unwrap();
        let v = f.integral(0.1, 0.7);
        let exact = 2.0 * 0.6 + 1.5 * (0.49 - 0.01) - (0.7f64.powf(1.3) - 0.1f64.powf(1.3)) / 1.3;
        assert!((v - exact).abs() < 1e-14);
        let g = Observable::inverse_power(0.4, 1.0).unwrap();
        assert!((g.integral(0.0, 1.0) - (1.0 / 0.6 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn bump_integral_matches_midpoint_rule() {
        let f = Observable::new(
            ObservableFamily::IndicatorSmooth {
                center: 0.6,
                half_width: 0.2,
                height: 2.0,
            },
            Centering::None,
        )
        .unwrap();
        let n = 200_000;
        let brute: f64 = (0..n)
            .map(|i| f.eval((i as f64 + 0.5) / n as f64) / n as f64)
            .sum();
        let err = (f.integral(0.0, 1.0) - brute).abs();
        assert!(err < 1e-9, "{err}");
        assert_eq!(f.value_at_zero(), Some(0.0));
    }

    #[test]
    fn centring_under_lebesgue() {
        let d = lebesgue(64);
        let f = Observable::identity_centred().centred(&d).unwrap();
        assert!((f.c0 - 0.5).abs() < 1e-14);
        assert!(f.mean(&d).abs() < 1e-14);
        let g = Observable::unit_at_zero().centred(&d).unwrap();
        assert!((g.c0 - 2.0).abs() < 1e-13);
        assert_eq!(g.value_at_zero(), Some(1.0));
        assert!(g.mean(&d).abs() < 1e-13);
        let h = Observable::square_vanishing().centred(&d).unwrap();
        assert!((h.c0 - 2.0 / 3.0).abs() < 1e-13);
        assert_eq!(h.value_at_zero(), Some(0.0));
    }

    #[test]
    fn recentring_is_a_no_op() {
        let d = lebesgue(37);
        for f in [
            Observable::unit_at_zero(),
            Observable::identity_centred(),
            Observable::inverse_power(0.35, 2.0).unwrap(),
        ] {
            let once = f.centred(&d).unwrap();
            let twice = once.centred(&d).unwrap();
            assert!((once.c0 - twice.c0).abs() <= 1e-12);
        }
    }

    #[test]
    fn quadratic_coefficients_follow_centring() {
        let d = lebesgue(16);
        let f = Observable::square_vanishing().centred(&d).unwrap();
        let a = f.quadratic_coefficients().unwrap();
        for x in [0.0, 0.3, 0.9] {
            assert!((a[0] + a[1] * x + a[2] * x * x - f.eval(x)).abs() < 1e-15);
        }
        assert!(Observable::inverse_power(0.3, 0.0)
            .unwrap()
            .quadratic_coefficients()
            .is_none());
    }

    #[test]
    fn integrability_rule() {
        let f = Observable::inverse_power(0.35, 0.0).unwrap();
        assert!(f.validate_for(0.25).is_ok());
        assert!(f.validate_for(0.7).is_err());
        assert!(Observable::inverse_power(1.2, 0.0).is_err());
    }
}
