//! Experiment configuration, read from TOML and checked before any work starts.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lsvlab_core::{Centering, MapSpec, MapVariant, Observable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Clt,
    Stable,
    BoundaryNlogn,
    UnboundedObs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    #[serde(default = "default_variant")]
    pub variant: MapVariant,
    pub alpha: f64,
}

fn default_variant() -> MapVariant {
    MapVariant::Lsv
}

/// Observable families by name; all but `poly` come centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// `1 - x/E[x]`.
    UnitAtZero,
    /// `x - E[x]`.
    Identity,
    /// `x² - κx`, vanishing at 0.
    SquareVanishing,
    /// `f0 + Σ coef · x^exponent`, with `terms = [[coef, exponent], ...]`.
    Poly {
        f0: f64,
        #[serde(default)]
        terms: Vec<(f64, f64)>,
        #[serde(default = "default_centering")]
        centering: Centering,
    },
    /// `x^{-β} + c`, with `c` the centring constant.
    InversePower {
        beta: f64,
    },
    Coboundary,
}

fn default_centering() -> Centering {
    Centering::PreserveF0
}

impl ObservableConfig {
    /// The observable before centring.
    pub fn build(&self, alpha: f64) -> lsvlab_core::Result<Observable> {
        match self {
            Self::UnitAtZero => Ok(Observable::unit_at_zero()),
            Self::Identity => Ok(Observable::identity_centred()),
            Self::SquareVanishing => Ok(Observable::square_vanishing()),
            Self::Poly {
                f0,
                terms,
                centering,
            } => Observable::poly(*f0, terms, *centering),
            Self::InversePower { beta } => Observable::inverse_power(*beta, 0.0),
            Self::Coboundary => Observable::coboundary(alpha),
        }
    }

    /// `f(0)` after centring, or `None` for unbounded observables.
    fn value_at_zero(&self) -> Option<f64> {
        match self {
            Self::UnitAtZero => Some(1.0),
            Self::Identity => Some(f64::NAN),
            Self::SquareVanishing | Self::Coboundary => Some(0.0),
            Self::Poly { f0, centering, .. } => match centering {
                Centering::Shift => Some(f64::NAN),
                _ => Some(*f0),
            },
            Self::InversePower { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// Orbit lengths.
    pub ns: Vec<u64>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Ulam cells on `[0, 1]`.
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Cells on `Y` for the induced operator.
    #[serde(default = "default_cells_y")]
    pub cells_y: usize,
    /// Deepest return time kept as a separate branch.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
}

fn default_cells() -> usize {
    4096
}

fn default_cells_y() -> usize {
    2048
}

fn default_k_max() -> usize {
    100_000
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            cells_y: default_cells_y(),
            k_max: default_k_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default = "default_tail_samples")]
    pub samples: usize,
    /// Sample only excursions with return time above this.
    #[serde(default)]
    pub k_min: usize,
}

fn default_tail_samples() -> usize {
    100_000
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            samples: default_tail_samples(),
            k_min: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    10_000
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            depth: default_depth(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenewalConfig {
    /// Terms of the scalar renewal sequence.
    pub n: usize,
}

/// Bounds that decide the exit code; unset bounds are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest KS distance allowed.
    pub ks: Option<f64>,
    /// Orbit lengths the KS bound applies to; all of them when empty.
    #[serde(default)]
    pub ks_at: Vec<u64>,
    /// Relative gap between the operator and Monte Carlo variances.
    pub sigma2_rel: Option<f64>,
    /// Relative gap between the Hill index and its prediction.
    pub tail_index_rel: Option<f64>,
    /// Largest `|T_n μ - 1|`.
    pub renewal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: Regime,
    pub map: MapConfig,
    pub observable: ObservableConfig,
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub tail: TailConfig,
    #[serde(default)]
    pub ladder: LadderConfig,
    pub renewal: Option<RenewalConfig>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_out")]
    pub out: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("lsvlab-out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn map_spec(&self) -> lsvlab_core::Result<MapSpec> {
        MapSpec::new(self.map.variant, self.map.alpha)
    }

    /// `α + β` for inverse powers, `α` otherwise: the exponent of `n` in the
    /// stable normalisation.
    pub fn stable_exponent(&self) -> f64 {
        match self.observable {
            ObservableConfig::InversePower { beta } => self.map.alpha + beta,
            _ => self.map.alpha,
        }
    }

    /// Rejects regimes whose limit theorem does not cover the map and observable.
    pub fn validate(&self) -> anyhow::Result<()> {
        let alpha = self.map.alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            bail!("alpha must lie in (0,1), got {alpha}");
        }
        if self.sampling.ns.is_empty() || self.sampling.ns.contains(&0) {
            bail!("sampling.ns must list positive orbit lengths");
        }
        if self.sampling.samples < 40 {
            bail!("sampling.samples must be at least 40");
        }
        let f0 = self.observable.value_at_zero();
        if let ObservableConfig::InversePower { beta } = self.observable {
            if beta.is_nan() || beta <= 0.0 {
                bail!("inverse_power needs beta > 0, got {beta}");
            }
            if alpha + beta >= 1.0 {
                bail!(
                    "x^-beta is integrable only for alpha + beta < 1, got {}",
                    alpha + beta
                );
            }
        }
        let s = self.stable_exponent();
        match self.regime {
            Regime::Clt => {
                let vanishes = f0 == Some(0.0);
                if s >= 0.5 && !vanishes {
                    bail!(
                        "regime clt needs alpha (+ beta) < 1/2 or f(0) = 0; got exponent {s} \
                         with f(0) = {f0:?}"
                    );
                }
            }
            Regime::Stable => {
                if s <= 0.5 {
                    bail!(
                        "regime stable needs alpha > 1/2, or an inverse power with \
                         alpha + beta > 1/2; got {s}"
                    );
                }
                if f0 == Some(0.0) {
                    bail!("f(0) = 0 gives a Gaussian limit; use regime clt");
                }
                if f0.is_some_and(f64::is_nan) {
                    bail!("regime stable needs a known f(0); use unit_at_zero or poly with preserve_f0");
                }
            }
            Regime::BoundaryNlogn => {
                if alpha != 0.5 || !f0.is_some_and(|v| v > 0.0) {
                    bail!("regime boundary_nlogn needs alpha = 1/2 and a bounded f with f(0) > 0");
                }
            }
            Regime::UnboundedObs => {
                if !matches!(self.observable, ObservableConfig::InversePower { .. }) || s <= 0.5 {
                    bail!(
                        "regime unbounded_obs needs an inverse power with alpha + beta in (1/2, 1)"
                    );
                }
            }
        }
        if let Some(r) = &self.renewal {
            if r.n < 2 {
                bail!("renewal.n must be at least 2");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so formatting and key order in the
    /// TOML file do not matter. The output directory is left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("config serialises");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STABLE: &str = r#"
        regime = "stable"
        [map]
        alpha = 0.75
        [observable]
        kind = "unit_at_zero"
        [sampling]
        ns = [1000]
        samples = 1000
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::parse(STABLE).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.out, PathBuf::from("lsvlab-out"));
        assert_eq!(cfg.sampling.seed, 0);
        assert_eq!(cfg.stable_exponent(), 0.75);
    }

    #[test]
    fn stable_with_small_alpha_is_rejected() {
        let text = STABLE.replace("alpha = 0.75", "alpha = 0.3");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(format!("{err:#}").contains("alpha > 1/2"));
    }

    #[test]
    fn inverse_power_can_reach_the_stable_regime() {
        let text = STABLE.replace("alpha = 0.75", "alpha = 0.25").replace(
            "kind = \"unit_at_zero\"",
            "kind = \"inverse_power\"\nbeta = 0.35",
        );
        assert!(ExperimentConfig::parse(&text).is_ok());
        let too_heavy = text.replace("beta = 0.35", "beta = 0.8");
        assert!(ExperimentConfig::parse(&too_heavy).is_err());
    }

    #[test]
    fn clt_accepts_vanishing_observables_at_large_alpha() {
        let text = STABLE
            .replace("regime = \"stable\"", "regime = \"clt\"")
            .replace("unit_at_zero", "square_vanishing");
        assert!(ExperimentConfig::parse(&text).is_ok());
        let bounded = STABLE.replace("regime = \"stable\"", "regime = \"clt\"");
        assert!(ExperimentConfig::parse(&bounded).is_err());
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = STABLE.replace("samples = 1000", "samples = 1000\nsampels = 3");
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn hash_ignores_layout_but_not_values() {
        let a = ExperimentConfig::parse(STABLE).unwrap();
        let b = ExperimentConfig::parse(&STABLE.replace("        ", "")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), c.hash());
        c.sampling.seed = 9;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../../../configs/clt.toml"),
            include_str!("../../../configs/stable.toml"),
            include_str!("../../../configs/boundary.toml"),
            include_str!("../../../configs/unbounded.toml"),
        ] {
            ExperimentConfig::parse(text).unwrap();
        }
    }
}
