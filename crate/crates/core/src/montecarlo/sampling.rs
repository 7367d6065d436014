//! Birkhoff sums along many independent orbits.
//!
//! Orbits are advanced four at a time with a branch-free step so the inner
//! loop stays in registers; each orbit owns the random stream keyed by its
//! sample index, so the output does not depend on the thread count.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::observable::Observable;
use super::stats::KahanSum;
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::{AlphaPow, MapSpec, MapVariant};
use crate::rng::{open_unit, stream, Stream};

const LANES: usize = 4;

/// Per chunk of lanes: start points, sums at each checkpoint, end points.
type ChunkOrbits = ([f64; LANES], Vec<[f64; LANES]>, Vec<[f64; LANES]>);

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Init {
    /// Inverse CDF of the discretised invariant density.
    #[default]
    InvariantDensity,
    /// Lebesgue draw followed by `burn_in` iterations.
    LebesgueBurnIn { burn_in: usize },
}

/// `(S_n - a_n) / b_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub a_n: f64,
    pub b_n: f64,
}

impl Normalization {
    pub const RAW: Normalization = Normalization { a_n: 0.0, b_n: 1.0 };

    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        (s - self.a_n) / self.b_n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub n: u64,
    pub samples: Vec<f64>,
    /// Already applied to `samples`; `None` for raw sums.
    pub normalization: Option<Normalization>,
    pub seed: u64,
    pub init: Init,
    #[serde(default)]
    pub config_hash: Option<String>,
}

/// Everything but the samples, written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub n: u64,
    pub count: usize,
    pub normalization: Option<Normalization>,
    pub seed: u64,
    pub init: Init,
    pub config_hash: Option<String>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Raw sums, undoing any stored normalisation.
    pub fn raw(&self) -> Vec<f64> {
        match self.normalization {
            None => self.samples.clone(),
            Some(nm) => self.samples.iter().map(|&s| s * nm.b_n + nm.a_n).collect(),
        }
    }

    /// Raw sums mapped through `norm`.
    pub fn normalized(&self, norm: Normalization) -> Vec<f64> {
        self.raw().into_iter().map(|s| norm.apply(s)).collect()
    }

    pub fn with_normalization(&self, norm: Normalization) -> Self {
        Self {
            samples: self.normalized(norm),
            normalization: Some(norm),
            ..self.clone()
        }
    }

    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            n: self.n,
            count: self.samples.len(),
            normalization: self.normalization,
            seed: self.seed,
            init: self.init,
            config_hash: self.config_hash.clone(),
        }
    }

    fn sidecar(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// One `sample` column, plus a JSON sidecar with the metadata.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["sample"])?;
        for s in &self.samples {
            w.write_record([format!("{s:e}")])?;
        }
        w.flush()?;
        let mut f = std::fs::File::create(Self::sidecar(path))?;
        serde_json::to_writer_pretty(&mut f, &self.meta())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let meta: SampleMeta = serde_json::from_reader(std::fs::File::open(Self::sidecar(path))?)?;
        let mut r = csv::Reader::from_path(path)?;
        let mut samples = Vec::with_capacity(meta.count);
        for rec in r.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidParameter(format!("bad sample row {rec:?}")))?;
            samples.push(v);
        }
        if samples.len() != meta.count {
            return Err(Error::InvalidParameter(format!(
                "sidecar declares {} samples, file has {}",
                meta.count,
                samples.len()
            )));
        }
        Ok(Self {
            n: meta.n,
            samples,
            normalization: meta.normalization,
            seed: meta.seed,
            init: meta.init,
            config_hash: meta.config_hash,
        })
    }
}

#[inline(always)]
pub(crate) fn lsv_step(x: f64, pow: impl Fn(f64) -> f64) -> f64 {
    let l = (x + x * pow(2.0 * x)).min(1.0);
    let r = 2.0 * x - 1.0;
    if x <= 0.5 {
        l
    } else {
        r
    }
}

/// Runs `$body` with `$step` bound to a monomorphic map step.
macro_rules! with_step {
    ($map:expr, $step:ident => $body:expr) => {{
        let map: &MapSpec = $map;
        match (map.variant, map.alpha_pow()) {
            (MapVariant::Lsv, AlphaPow::Quarter) => {
                let $step = |x: f64| lsv_step(x, |y: f64| y.sqrt().sqrt());
                $body
            }
            (MapVariant::Lsv, AlphaPow::Half) => {
                let $step = |x: f64| lsv_step(x, |y: f64| y.sqrt());
                $body
            }
            (MapVariant::Lsv, AlphaPow::ThreeQuarters) => {
                let $step = |x: f64| {
                    lsv_step(x, |y: f64| {
                        let s = y.sqrt();
                        s * s.sqrt()
                    })
                };
                $body
            }
            (MapVariant::Lsv, AlphaPow::General(a)) => {
                let $step = move |x: f64| lsv_step(x, |y: f64| y.powf(a));
                $body
            }
            _ => {
                let $step = |x: f64| map.apply(x);
                $body
            }
        }
    }};
}

/// Runs `$body` with `$g` bound to a fast evaluator of the observable.
macro_rules! with_observable {
    ($f:expr, $g:ident => $body:expr) => {{
        let f: &Observable = $f;
        match f.quadratic_coefficients() {
            Some([a0, a1, a2]) if a2 == 0.0 => {
                let $g = move |x: f64| a0 + a1 * x;
                $body
            }
            Some([a0, a1, a2]) => {
                let $g = move |x: f64| a0 + x * (a1 + x * a2);
                $body
            }
            None => {
                let $g = |x: f64| f.eval(x);
                $body
            }
        }
    }};
}

pub(crate) use with_step;

/// Where orbits start.
#[derive(Clone, Copy)]
pub(crate) struct Start<'a> {
    pub init: Init,
    pub density: Option<&'a InvariantDensity>,
}

impl<'a> Start<'a> {
    pub fn new(init: Init, density: Option<&'a InvariantDensity>) -> Result<Self> {
        if init == Init::InvariantDensity && density.is_none() {
            return Err(Error::InvalidParameter(
                "invariant-density initial conditions need a density".into(),
            ));
        }
        Ok(Self { init, density })
    }

    #[inline]
    pub fn draw<S: Fn(f64) -> f64>(&self, rng: &mut Stream, step: &S) -> f64 {
        match (self.init, self.density) {
            (Init::InvariantDensity, Some(d)) => d.inverse_cdf(open_unit(rng)),
            (Init::LebesgueBurnIn { burn_in }, _) => {
                let mut x = open_unit(rng);
                for _ in 0..burn_in {
                    x = step(x);
                }
                x
            }
            _ => unreachable!("checked in Start::new"),
        }
    }
}

/// Per checkpoint: the Birkhoff sums and the orbit positions, plus the
/// starting points.
pub(crate) struct Orbits {
    pub starts: Vec<f64>,
    pub sums: Vec<Vec<f64>>,
    pub ends: Vec<Vec<f64>>,
}

pub(crate) fn run_orbits<S, G>(
    step: S,
    g: G,
    checkpoints: &[u64],
    n_samples: usize,
    seed: u64,
    start: Start<'_>,
) -> Orbits
where
    S: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    let chunks = n_samples.div_ceil(LANES);
    let k = checkpoints.len();
    let per_chunk: Vec<ChunkOrbits> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut x = [0.0; LANES];
            for (l, xl) in x.iter_mut().enumerate() {
                let mut rng = stream(seed, (c * LANES + l) as u64);
                *xl = start.draw(&mut rng, &step);
            }
            let x0 = x;
            let mut acc = [KahanSum::new(); LANES];
            let mut sums = Vec::with_capacity(k);
            let mut ends = Vec::with_capacity(k);
            let mut t = 0u64;
            for &target in checkpoints {
                while t < target {
                    for l in 0..LANES {
                        acc[l].add(g(x[l]));
                        x[l] = step(x[l]);
                    }
                    t += 1;
                }
                sums.push(acc.map(|a| a.value()));
                ends.push(x);
            }
            (x0, sums, ends)
        })
        .collect();
    let mut out = Orbits {
        starts: Vec::with_capacity(n_samples),
        sums: vec![Vec::with_capacity(n_samples); k],
        ends: vec![Vec::with_capacity(n_samples); k],
    };
    for (c, (x0, sums, ends)) in per_chunk.into_iter().enumerate() {
        let lanes = LANES.min(n_samples - c * LANES);
        out.starts.extend_from_slice(&x0[..lanes]);
        for j in 0..k {
            out.sums[j].extend_from_slice(&sums[j][..lanes]);
            out.ends[j].extend_from_slice(&ends[j][..lanes]);
        }
    }
    out
}

fn check_checkpoints(ns: &[u64]) -> Result<()> {
    if ns.is_empty() || ns[0] == 0 || !ns.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidParameter(format!(
            "orbit lengths must be positive and strictly increasing, got {ns:?}"
        )));
    }
    Ok(())
}

pub(crate) fn orbits(
    map: &MapSpec,
    f: &Observable,
    ns: &[u64],
    n_samples: usize,
    seed: u64,
    init: Init,
    density: Option<&InvariantDensity>,
) -> Result<Orbits> {
    check_checkpoints(ns)?;
    f.validate_for(map.alpha)?;
    let start = Start::new(init, density)?;
    Ok(
        with_step!(map, step => with_observable!(f, g => run_orbits(step, g, ns, n_samples, seed, start))),
    )
}

/// Raw Birkhoff sums `S_n f` for `n_samples` orbits.
pub fn sample_birkhoff(
    map: &MapSpec,
    f: &Observable,
    n: u64,
    n_samples: usize,
    seed: u64,
    init: Init,
    density: Option<&InvariantDensity>,
) -> Result<SampleSet> {
    let mut v = sample_birkhoff_multi(map, f, &[n], n_samples, seed, init, density)?;
    Ok(v.remove(0))
}

/// Sums at several lengths along the same orbits (so `S_{n_1}` and `S_{n_2}`
/// share their first `n_1` terms).
pub fn sample_birkhoff_multi(
    map: &MapSpec,
    f: &Observable,
    ns: &[u64],
    n_samples: usize,
    seed: u64,
    init: Init,
    density: Option<&InvariantDensity>,
) -> Result<Vec<SampleSet>> {
    let o = orbits(map, f, ns, n_samples, seed, init, density)?;
    Ok(ns
        .iter()
        .zip(o.sums)
        .map(|(&n, samples)| SampleSet {
            n,
            samples,
            normalization: None,
            seed,
            init,
            config_hash: None,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::{assemble_ulam, invariant_density, Assembly, Grid};
    use crate::montecarlo::stats::mean_var;

    fn density(alpha: f64) -> InvariantDensity {
        let op = assemble_ulam(
            &MapSpec::lsv(alpha).unwrap(),
            &Grid::lsv_default(1024).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        invariant_density(&op, 1e-12).unwrap()
    }

    #[test]
    fn trivial_observables() {
        let map = MapSpec::lsv(0.75).unwrap();
        let d = density(0.75);
        let zero = sample_birkhoff(
            &map,
            &Observable::constant(0.0),
            100,
            10,
            1,
            Init::InvariantDensity,
            Some(&d),
        )
        .unwrap();
        assert!(zero.samples.iter().all(|&s| s == 0.0));
        let one = sample_birkhoff(
            &map,
            &Observable::constant(1.0),
            100,
            10,
            1,
            Init::InvariantDensity,
            Some(&d),
        )
        .unwrap();
        assert!(one.samples.iter().all(|&s| s == 100.0));
    }

    #[test]
    fn step_matches_map() {
        for alpha in [0.25, 0.5, 0.75, 0.6] {
            let map = MapSpec::lsv(alpha).unwrap();
            with_step!(&map, step => {
                for i in 0..1000 {
                    let x = (i as f64 + 0.5) / 1000.0;
                    let a = step(x);
                    let b = map.apply(x);
                    assert!((a - b).abs() <= 4.0 * f64::EPSILON, "{alpha} {x}: {a} {b}");
                }
            });
        }
    }

    #[test]
    fn centred_mean_is_small() {
        let map = MapSpec::lsv(0.25).unwrap();
        let d = density(0.25);
        let f = Observable::identity_centred().centred(&d).unwrap();
        let s = sample_birkhoff(&map, &f, 1000, 4000, 9, Init::InvariantDensity, Some(&d)).unwrap();
        let (m, v) = mean_var(&s.samples);
        assert!(m.abs() <= 3.0 * (v / s.len() as f64).sqrt() + 1000.0 * 1e-4);
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let map = MapSpec::lsv(0.6).unwrap();
        let d = density(0.6);
        let f = Observable::unit_at_zero().centred(&d).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    sample_birkhoff_multi(
                        &map,
                        &f,
                        &[10, 500],
                        37,
                        5,
                        Init::InvariantDensity,
                        Some(&d),
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn multi_n_shares_prefixes() {
        let map = MapSpec::lsv(0.5).unwrap();
        let f = Observable::identity_centred();
        let init = Init::LebesgueBurnIn { burn_in: 10 };
        let both = sample_birkhoff_multi(&map, &f, &[50, 200], 12, 4, init, None).unwrap();
        let short = sample_birkhoff(&map, &f, 50, 12, 4, init, None).unwrap();
        assert_eq!(both[0].samples, short.samples);
        assert!(sample_birkhoff_multi(&map, &f, &[50, 50], 1, 1, init, None).is_err());
        assert!(sample_birkhoff(&map, &f, 5, 1, 1, Init::InvariantDensity, None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = SampleSet {
            n: 3,
            samples: vec![0.1, -2.5e-7, 3.0],
            normalization: Some(Normalization { a_n: 0.0, b_n: 2.0 }),
            seed: 11,
            init: Init::LebesgueBurnIn { burn_in: 1000 },
            config_hash: Some("abc".into()),
        };
        s.write_csv(&path).unwrap();
        assert_eq!(SampleSet::read_csv(&path).unwrap(), s);
        assert_eq!(s.raw(), vec![0.2, -5e-7, 6.0]);
    }
}
