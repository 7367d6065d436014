//! The JSON summary written by every command.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Regime;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub cells: usize,
    pub h_half: f64,
    pub mass_y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LadderSummary {
    pub depth: usize,
    /// `x_k k^{1/α}` at the deepest point.
    pub scaled: f64,
    pub asymptotic_constant: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailSummary {
    pub k_min: usize,
    pub samples: usize,
    pub censored: usize,
    pub p_hat: Option<f64>,
    pub p_regression: Option<f64>,
    pub c1_hat: Option<f64>,
    pub predicted_p: Option<f64>,
    pub predicted_c1: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InducedSummary {
    pub k_max: usize,
    pub mass_y: f64,
    /// `∫_Y φ dm` from the branch masses.
    pub kac_sum: f64,
    pub lump_mass: f64,
    pub tail: Option<TailSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictionSummary {
    pub p: f64,
    pub c: f64,
    pub beta: f64,
    /// How `S_n` is scaled before comparing with the law.
    pub normalisation: String,
    pub sigma2_operator: Option<f64>,
    pub sigma2_monte_carlo: Option<f64>,
    pub c1: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GofRow {
    pub n: u64,
    pub samples: usize,
    pub b_n: f64,
    pub ks: f64,
    pub cvm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceSummary {
    pub slope: Option<f64>,
    pub per_n: Vec<f64>,
    pub per_n_log_n: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalSummary {
    pub n: usize,
    pub t_n: f64,
    /// `T_n μ`, which tends to 1.
    pub t_n_mu: f64,
    pub mu: f64,
    pub mu_truncated: f64,
    pub identity_residual: f64,
    pub dropped_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub command: String,
    pub config_hash: String,
    pub regime: Regime,
    pub map: String,
    pub observable: Option<String>,
    pub seed: u64,
    pub density: Option<DensitySummary>,
    pub ladder: Option<LadderSummary>,
    pub induced: Option<InducedSummary>,
    pub prediction: Option<PredictionSummary>,
    pub gof: Vec<GofRow>,
    pub variance: Option<VarianceSummary>,
    pub renewal: Option<RenewalSummary>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub failure: Option<StageFailure>,
}

impl Summary {
    pub fn new(command: &str, config_hash: String, regime: Regime, map: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_hash,
            regime,
            map,
            observable: None,
            seed,
            density: None,
            ladder: None,
            induced: None,
            prediction: None,
            gof: Vec::new(),
            variance: None,
            renewal: None,
            checks: Vec::new(),
            artifacts: Vec::new(),
            failure: None,
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Records each file with its digest, relative to `dir`.
    pub fn record(&mut self, dir: &Path, files: &[PathBuf]) -> anyhow::Result<()> {
        for f in files {
            let bytes = std::fs::read(f).with_context(|| format!("reading {}", f.display()))?;
            let digest: String = Sha256::digest(&bytes)
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect();
            let name = f.strip_prefix(dir).unwrap_or(f).display().to_string();
            self.artifacts.push(Artifact {
                file: name,
                sha256: digest,
            });
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
