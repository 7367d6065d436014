//! Stages of an experiment, run in order with results handed over in memory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use num_complex::Complex64;

use lsvlab_core::export::{self, CsvBundle, Table};
use lsvlab_core::induction::{build_induced, tail_profile_beyond, InducedSystem};
use lsvlab_core::invariant::{
    assemble_ulam, induced_operator, invariant_density, sigma2_operator, Assembly, Grid,
    InducedConfig, InvariantDensity, PowerOptions,
};
use lsvlab_core::montecarlo::stats::ls_line;
use lsvlab_core::montecarlo::variance::{jackknife_variance, JACKKNIFE_BLOCKS};
use lsvlab_core::montecarlo::{
    gof_law, sample_birkhoff_multi, Init, SampleSet, VarianceGrowth, VarianceRow,
};
use lsvlab_core::renewal::{renewal_solve, RenewalSeries};
use lsvlab_core::stable::{lsv_stable_prediction, params_from_tails, SlowlyVarying, TailSpec};
use lsvlab_core::{MapSpec, MarkovLadder, Observable, StableLaw};

use crate::config::{ExperimentConfig, ObservableConfig, Regime};
use crate::report::{
    Check, DensitySummary, GofRow, InducedSummary, LadderSummary, PredictionSummary,
    RenewalSummary, StageFailure, Summary, TailSummary, VarianceSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Density,
    Ladder,
    Induce,
    Predict,
    Simulate,
    Gof,
    Renewal,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Ladder => "ladder",
            Self::Induce => "induce",
            Self::Predict => "predict",
            Self::Simulate => "simulate",
            Self::Gof => "gof",
            Self::Renewal => "renewal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Ulam approximation of the invariant density.
    Density,
    /// Preimages of 1 under the left branch and their scaling.
    Ladder,
    /// First-return system on Y and the tail of the induced observable.
    Induce,
    /// The limit law the regime predicts.
    Predict,
    /// Birkhoff sums along orbits started from the invariant density.
    Simulate,
    /// Goodness of fit of the simulated sums against the prediction.
    Gof,
    /// Renewal sequence of the return-time law.
    Renewal,
    /// Every stage in order.
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Pipeline => "pipeline",
            other => other
                .stages()
                .last()
                .copied()
                .map(Stage::name)
                .unwrap_or(""),
        }
    }

    pub fn stages(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Self::Density => &[Density],
            Self::Ladder => &[Ladder],
            Self::Induce => &[Density, Induce],
            Self::Predict => &[Density, Induce, Predict],
            Self::Simulate => &[Density, Simulate],
            Self::Gof => &[Density, Induce, Predict, Simulate, Gof],
            Self::Renewal => &[Density, Induce, Renewal],
            Self::Pipeline => &[Density, Ladder, Induce, Predict, Simulate, Gof, Renewal],
        }
    }
}

/// How `S_n` is scaled before comparison with the limit law.
#[derive(Debug, Clone, Copy)]
enum Scaling {
    /// `n^e`.
    Power(f64),
    /// `s √(n log n)`.
    SqrtNLogN(f64),
}

impl Scaling {
    fn b_n(self, n: u64) -> f64 {
        let n = n as f64;
        match self {
            Self::Power(e) => n.powf(e),
            Self::SqrtNLogN(s) => s * (n * n.ln()).sqrt(),
        }
    }

    fn describe(self) -> String {
        match self {
            Self::Power(e) => format!("S_n / n^{e}"),
            Self::SqrtNLogN(s) => format!("S_n / ({s} sqrt(n ln n))"),
        }
    }
}

struct Prediction {
    law: StableLaw,
    scaling: Scaling,
}

/// State built up by the stages of one run.
pub struct Run<'a> {
    cfg: &'a ExperimentConfig,
    format: Format,
    out: PathBuf,
    map: Option<MapSpec>,
    density: Option<InvariantDensity>,
    f: Option<Observable>,
    sys: Option<InducedSystem>,
    prediction: Option<Prediction>,
    sets: Vec<SampleSet>,
    /// Sample sets read from disk instead of simulated.
    inputs: Vec<PathBuf>,
    bundle: CsvBundle,
    files: Vec<PathBuf>,
    pub summary: Summary,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a ExperimentConfig, command: Command, format: Format, out: PathBuf) -> Self {
        let summary = Summary::new(
            command.name(),
            cfg.hash(),
            cfg.regime,
            format!("{:?}(alpha = {})", cfg.map.variant, cfg.map.alpha),
            cfg.sampling.seed,
        );
        Self {
            cfg,
            format,
            out,
            map: None,
            density: None,
            f: None,
            sys: None,
            prediction: None,
            sets: Vec::new(),
            inputs: Vec::new(),
            bundle: CsvBundle::default(),
            files: Vec::new(),
            summary,
        }
    }

    /// Replaces simulation by previously written sample files.
    pub fn with_inputs(mut self, inputs: Vec<PathBuf>) -> Self {
        self.inputs = inputs;
        self
    }

    /// Runs the stages in order, stopping at the first failure. Whatever was
    /// produced before it is still written.
    pub fn execute(mut self, stages: &[Stage]) -> anyhow::Result<Summary> {
        for &stage in stages {
            if let Err(e) = self.stage(stage) {
                self.summary.failure = Some(StageFailure {
                    stage: stage.name().to_string(),
                    message: format!("{e:#}"),
                });
                break;
            }
        }
        self.finish()
    }

    fn stage(&mut self, stage: Stage) -> anyhow::Result<()> {
        match stage {
            Stage::Density => self.density(),
            Stage::Ladder => self.ladder(),
            Stage::Induce => self.induce(),
            Stage::Predict => self.predict(),
            Stage::Simulate => self.simulate(),
            Stage::Gof => self.gof(),
            Stage::Renewal => self.renewal(),
        }
    }

    fn map(&mut self) -> anyhow::Result<MapSpec> {
        if self.map.is_none() {
            self.map = Some(self.cfg.map_spec()?);
        }
        Ok(self.map.clone().expect("set above"))
    }

    fn need<'b, T>(slot: &'b Option<T>, what: &str) -> anyhow::Result<&'b T> {
        slot.as_ref()
            .ok_or_else(|| anyhow!("{what} is not available"))
    }

    fn density(&mut self) -> anyhow::Result<()> {
        let map = self.map()?;
        let grid = Grid::lsv_default(self.cfg.grid.cells)?;
        let op = assemble_ulam(&map, &grid, Assembly::Exact)?;
        let d = invariant_density(&op, 1e-12)?;
        let mut t = Table::new("density", &["lo", "hi", "h"]);
        for (lo, hi, h) in d.cells() {
            t.push(vec![lo, hi, h]);
        }
        self.bundle.push(t);
        self.summary.density = Some(DensitySummary {
            cells: d.grid().len(),
            h_half: d.h_half(),
            mass_y: d.mass_y(),
        });
        let f = self.cfg.observable.build(self.cfg.map.alpha)?.centred(&d)?;
        self.summary.observable = Some(f.describe());
        self.f = Some(f);
        self.density = Some(d);
        Ok(())
    }

    fn ladder(&mut self) -> anyhow::Result<()> {
        let map = self.map()?;
        let depth = self.cfg.ladder.depth;
        let ladder = MarkovLadder::build(&map, depth + 1, 1e-12)?;
        self.summary.ladder = Some(LadderSummary {
            depth,
            scaled: ladder.scaled(depth),
            asymptotic_constant: MarkovLadder::asymptotic_constant(map.alpha),
        });
        self.bundle.push(export::ladder("ladder", &ladder));
        Ok(())
    }

    fn induce(&mut self) -> anyhow::Result<()> {
        let map = self.map()?;
        let d = Self::need(&self.density, "invariant density")?;
        let f = Self::need(&self.f, "observable")?;
        let sys = build_induced(&map, self.cfg.grid.k_max, d)?;
        self.bundle
            .push(export::return_pmf("return_pmf", &sys, 1000));
        // a bounded observable with a Gaussian limit has no heavy tail to fit
        let tail = if self.cfg.regime == Regime::Clt {
            None
        } else {
            let t = tail_profile_beyond(
                &sys,
                f,
                d,
                self.cfg.tail.k_min,
                self.cfg.tail.samples,
                self.cfg.sampling.seed.wrapping_add(1),
            )?;
            self.bundle.push(export::tail("tail", &t));
            if let (Some(bound), Some(p), Some(pred)) =
                (self.cfg.thresholds.tail_index_rel, t.p_hat(), t.predicted_p)
            {
                self.summary
                    .checks
                    .push(Check::at_most("tail_index_rel", rel(p, pred), bound));
            }
            Some(TailSummary {
                k_min: self.cfg.tail.k_min,
                samples: t.samples.len(),
                censored: t.censored,
                p_hat: t.p_hat(),
                p_regression: t.fit.regression.map(|r| r.p_hat),
                c1_hat: t.c1_hat,
                predicted_p: t.predicted_p,
                predicted_c1: t.predicted_c1,
            })
        };
        self.summary.induced = Some(InducedSummary {
            k_max: sys.k_max,
            mass_y: sys.mass_y,
            kac_sum: sys.kac_sum(),
            lump_mass: sys.lump_mass,
            tail,
        });
        self.sys = Some(sys);
        Ok(())
    }

    fn predict(&mut self) -> anyhow::Result<()> {
        let map = self.map()?;
        let d = Self::need(&self.density, "invariant density")?;
        let f = Self::need(&self.f, "observable")?;
        let alpha = self.cfg.map.alpha;
        let mut sigma2 = None;
        let mut c1 = None;
        let prediction = match self.cfg.regime {
            Regime::Clt => {
                let config = InducedConfig {
                    cells_y: self.cfg.grid.cells_y,
                    k_max: self.cfg.grid.k_max,
                    ..InducedConfig::default()
                };
                let op = induced_operator(&map, f, 1, d, config)?;
                let s = sigma2_operator(&op, PowerOptions::default())?.sigma2;
                sigma2 = Some(s);
                Prediction {
                    law: StableLaw::gaussian(s)?,
                    scaling: Scaling::Power(0.5),
                }
            }
            Regime::Stable | Regime::UnboundedObs => match self.cfg.observable {
                ObservableConfig::InversePower { .. } => {
                    let tail = self
                        .summary
                        .induced
                        .as_ref()
                        .and_then(|i| i.tail.as_ref())
                        .ok_or_else(|| anyhow!("the inverse-power law needs the tail profile"))?;
                    let c = tail
                        .c1_hat
                        .ok_or_else(|| anyhow!("too few tail samples to estimate c1"))?;
                    let exponent = self.cfg.stable_exponent();
                    c1 = Some(c);
                    let spec = TailSpec::new(1.0 / exponent, c, 0.0, SlowlyVarying::Constant(1.0))?;
                    Prediction {
                        law: params_from_tails(&spec)?,
                        scaling: Scaling::Power(exponent),
                    }
                }
                _ => {
                    let f0 = f
                        .value_at_zero()
                        .ok_or_else(|| anyhow!("the observable has no finite value at 0"))?;
                    let p = lsv_stable_prediction(alpha, f0, d.h_half())?;
                    c1 = Some(p.tails.c1.max(p.tails.c2));
                    Prediction {
                        law: p.law,
                        scaling: Scaling::Power(p.norm_exponent),
                    }
                }
            },
            Regime::BoundaryNlogn => {
                let f0 = f
                    .value_at_zero()
                    .ok_or_else(|| anyhow!("the observable has no finite value at 0"))?;
                let c = d.h_half() * (2.0 * f0).sqrt() / 4.0;
                c1 = Some(c);
                Prediction {
                    law: StableLaw::gaussian(1.0)?,
                    scaling: Scaling::SqrtNLogN(c.sqrt() / 2.0),
                }
            }
        };
        self.summary.prediction = Some(PredictionSummary {
            p: prediction.law.p(),
            c: prediction.law.c(),
            beta: prediction.law.beta(),
            normalisation: prediction.scaling.describe(),
            sigma2_operator: sigma2,
            sigma2_monte_carlo: None,
            c1,
        });
        self.prediction = Some(prediction);
        Ok(())
    }

    fn simulate(&mut self) -> anyhow::Result<()> {
        if self.inputs.is_empty() {
            let map = self.map()?;
            let d = Self::need(&self.density, "invariant density")?;
            let f = Self::need(&self.f, "observable")?;
            let s = &self.cfg.sampling;
            let mut sets = sample_birkhoff_multi(
                &map,
                f,
                &s.ns,
                s.samples,
                s.seed,
                Init::InvariantDensity,
                Some(d),
            )?;
            for set in &mut sets {
                set.config_hash = Some(self.summary.config_hash.clone());
            }
            if self.format == Format::Csv {
                std::fs::create_dir_all(&self.out)?;
                for set in &sets {
                    let path = self.out.join(format!("samples_n{}.csv", set.n));
                    set.write_csv(&path)?;
                    self.files.push(path.with_extension("json"));
                    self.files.push(path);
                }
            }
            self.sets = sets;
        } else {
            for path in &self.inputs {
                let set = SampleSet::read_csv(path)
                    .with_context(|| format!("reading samples {}", path.display()))?;
                self.sets.push(set);
            }
            self.sets.sort_by_key(|s| s.n);
        }
        let rows: Vec<VarianceRow> = self
            .sets
            .iter()
            .map(|s| {
                let (variance, stderr) = jackknife_variance(&s.samples, JACKKNIFE_BLOCKS);
                let n = s.n as f64;
                VarianceRow {
                    n: s.n,
                    variance,
                    stderr,
                    per_n: variance / n,
                    per_n_log_n: if s.n > 1 {
                        variance / (n * n.ln())
                    } else {
                        f64::NAN
                    },
                }
            })
            .collect();
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.variance)).collect();
        let slope = ls_line(&pts).map(|(_, b)| b);
        self.summary.variance = Some(VarianceSummary {
            slope,
            per_n: rows.iter().map(|r| r.per_n).collect(),
            per_n_log_n: rows.iter().map(|r| r.per_n_log_n).collect(),
        });
        let (intercept, fallback) =
            ls_line(&pts).unwrap_or((0.0, rows.first().map_or(f64::NAN, |r| r.per_n)));
        let growth = VarianceGrowth {
            rows,
            slope: slope.unwrap_or(fallback),
            intercept,
        };
        self.bundle.push(export::variance("variance", &growth));

        if let Some(p) = self.summary.prediction.as_mut() {
            if let Some(op) = p.sigma2_operator {
                p.sigma2_monte_carlo = Some(growth.slope);
                if let Some(bound) = self.cfg.thresholds.sigma2_rel {
                    self.summary.checks.push(Check::at_most(
                        "sigma2_rel",
                        rel(growth.slope, op),
                        bound,
                    ));
                }
            }
        }
        Ok(())
    }

    fn gof(&mut self) -> anyhow::Result<()> {
        let prediction = Self::need(&self.prediction, "prediction")?;
        let t = &self.cfg.thresholds;
        for set in &self.sets {
            let b_n = prediction.scaling.b_n(set.n);
            let values: Vec<f64> = set.samples.iter().map(|x| x / b_n).collect();
            let r = gof_law(&values, &prediction.law, set.n)?;
            self.bundle
                .push(export::gof_overlay(&format!("cdf_n{}", set.n), &r));
            self.bundle
                .push(export::gof_qq(&format!("qq_n{}", set.n), &r));
            if let Some(bound) = t.ks {
                if t.ks_at.is_empty() || t.ks_at.contains(&set.n) {
                    self.summary
                        .checks
                        .push(Check::at_most(format!("ks_n{}", set.n), r.ks, bound));
                }
            }
            self.summary.gof.push(GofRow {
                n: set.n,
                samples: set.samples.len(),
                b_n,
                ks: r.ks,
                cvm: r.cvm,
            });
        }
        Ok(())
    }

    fn renewal(&mut self) -> anyhow::Result<()> {
        let n = self
            .cfg
            .renewal
            .as_ref()
            .map(|r| r.n)
            .ok_or_else(|| anyhow!("the config has no [renewal] section"))?;
        let sys = Self::need(&self.sys, "induced system")?;
        let series = RenewalSeries::from_induced(sys, n)?;
        let sol = renewal_solve(&series, n)?;
        let t_n = sol.scalar(n);
        let t_n_mu = t_n / sys.mass_y;
        let residual = [
            Complex64::new(0.5, 0.0),
            Complex64::from_polar(0.9, std::f64::consts::FRAC_PI_3),
            Complex64::new(-0.7, 0.2),
        ]
        .into_iter()
        .map(|z| sol.identity_residual(&series, z))
        .fold(0.0, f64::max);
        if let Some(bound) = self.cfg.thresholds.renewal {
            self.summary
                .checks
                .push(Check::at_most("renewal", (t_n_mu - 1.0).abs(), bound));
        }
        self.bundle.push(export::renewal("renewal", &sol));
        self.summary.renewal = Some(RenewalSummary {
            n,
            t_n,
            t_n_mu,
            mu: sol.mu,
            mu_truncated: sol.mu_truncated,
            identity_residual: residual,
            dropped_mass: sol.dropped_mass,
        });
        Ok(())
    }

    fn finish(mut self) -> anyhow::Result<Summary> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        if self.format == Format::Csv {
            let mut written = self.bundle.write(&self.out)?;
            written.append(&mut self.files);
            self.summary.record(&self.out, &written)?;
        }
        self.summary.write(&summary_path(&self.out))?;
        Ok(self.summary)
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    out.join("summary.json")
}

fn rel(x: f64, target: f64) -> f64 {
    (x / target - 1.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_command_ends_with_its_own_stage() {
        for c in [
            Command::Density,
            Command::Ladder,
            Command::Induce,
            Command::Predict,
        ] {
            assert_eq!(c.name(), c.stages().last().unwrap().name());
        }
        assert_eq!(Command::Gof.name(), "gof");
        assert_eq!(Command::Pipeline.stages().len(), 7);
    }

    #[test]
    fn stages_needing_a_density_come_after_it() {
        let needs = [
            Stage::Induce,
            Stage::Predict,
            Stage::Simulate,
            Stage::Renewal,
        ];
        for c in [
            Command::Induce,
            Command::Predict,
            Command::Simulate,
            Command::Gof,
            Command::Renewal,
        ] {
            let s = c.stages();
            assert_eq!(s[0], Stage::Density);
            assert!(s.iter().skip(1).all(|st| *st != Stage::Density));
            assert!(s.iter().any(|st| needs.contains(st)));
        }
    }

    #[test]
    fn scalings() {
        assert_eq!(Scaling::Power(0.5).b_n(10_000), 100.0);
        let s = Scaling::SqrtNLogN(0.5).b_n(1000);
        assert!((s - 0.5 * (1000.0 * 1000f64.ln()).sqrt()).abs() < 1e-12);
    }
}
