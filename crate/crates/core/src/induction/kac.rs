//! Monte Carlo check of `∫_Y φ dm = 1`.
//!
//! `φ` under `m|_Y` has tail index `1/α`, so plain sampling converges slowly
//! for large `α`. Points are drawn at `m`-mass `u = v²` above `1/2` with
//! weight `2v` and `v` stratified, which concentrates effort near `1/2` where
//! the long returns live. Excursions longer than the cap are completed from
//! the ladder (or its continuum limit) instead of being dropped.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InducedSystem, RETURN_CAP};
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::{AlphaPow, MapSpec, MapVariant, MarkovLadder};
use crate::montecarlo::sampling::{lsv_step, with_step};
use crate::montecarlo::stats::{mean_var, KahanSum};
use crate::rng::{stratified_unit, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacEstimate {
    /// Estimate of `∫_Y φ dm`.
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
    /// Excursions that hit the cap and were completed from the ladder.
    pub completed: usize,
    pub cap: u64,
}

/// Steps for `x <= 1/2` to enter `Y`, read off the ladder; below its last
/// point the continuum limit `x^{-α}` grows by `α 2^α` per step.
fn ladder_steps(ladder: &MarkovLadder, x: f64) -> f64 {
    if let Some(j) = ladder.entry_time(x) {
        return j as f64;
    }
    let a = ladder.alpha;
    let depth = ladder.depth();
    let xd = ladder.points[depth];
    depth as f64 + (x.powf(-a) - xd.powf(-a)) / (a * 2f64.powf(a))
}

fn entry_steps(step: impl Fn(f64) -> f64, ladder: &MarkovLadder, x: f64, cap: u64) -> (f64, bool) {
    let mut y = x;
    let mut n = 0u64;
    while y <= 0.5 {
        if n == cap {
            return (n as f64 + ladder_steps(ladder, y), true);
        }
        y = step(y);
        n += 1;
    }
    (n as f64, false)
}

/// Weighted stratified estimate of `∫_Y φ dm` from `n_samples` excursions.
pub fn kac_estimate(
    sys: &InducedSystem,
    density: &InvariantDensity,
    n_samples: usize,
    seed: u64,
) -> Result<KacEstimate> {
    if n_samples < 2 {
        return Err(Error::InsufficientData(
            "Kac estimate needs at least 2 samples".into(),
        ));
    }
    if sys.map.variant != MapVariant::Lsv {
        return Err(Error::InvalidParameter(
            "Kac completion needs the LSV ladder".into(),
        ));
    }
    let map: &MapSpec = &sys.map;
    let cap = RETURN_CAP;
    let my = sys.mass_y;
    let n = n_samples as u64;
    let (h0, first_cell_end) = {
        let i = density.grid().locate(0.5);
        (density.values()[i], density.grid().cell(i).1)
    };
    let draws: Vec<(f64, bool)> = with_step!(map, step => {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i);
                let v = stratified_unit(&mut rng, i, n);
                let mass = v * v * my;
                // T(y) = 2(y - 1/2), kept in relative precision for tiny masses
                let x = if mass <= h0 * (first_cell_end - 0.5) {
                    2.0 * mass / h0
                } else {
                    2.0 * (density.inverse_mass_above(0.5, mass) - 0.5)
                };
                let (steps, done) = if x > 0.5 {
                    (0.0, false)
                } else {
                    entry_steps(step, &sys.ladder, x, cap - 1)
                };
                (2.0 * v * (1.0 + steps), done)
            })
            .collect()
    });
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mut acc = KahanSum::new();
    values.iter().for_each(|&w| acc.add(w));
    let (_, var) = mean_var(&values);
    Ok(KacEstimate {
        estimate: my * acc.value() / n_samples as f64,
        stderr: my * (var / n_samples as f64).sqrt(),
        samples: n_samples,
        completed: draws.iter().filter(|d| d.1).count(),
        cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induction::build_induced;
    use crate::induction::tests::density;

    #[test]
    fn ladder_completion_is_continuous() {
        let map = MapSpec::lsv(0.75).unwrap();
        let ladder = MarkovLadder::build(&map, 5000, 1e-12).unwrap();
        let xd = ladder.points[5000];
        let inside = ladder_steps(&ladder, xd * 1.000_001);
        let outside = ladder_steps(&ladder, xd * 0.999_999);
        assert_eq!(inside, 4999.0);
        assert!((outside - 5000.0).abs() < 1.0, "{outside}");
        // one step of the map moves one rung in the continuum limit
        let x = xd / 10.0;
        let d = ladder_steps(&ladder, x) - ladder_steps(&ladder, map.apply(x));
        assert!((d - 1.0).abs() < 1e-3, "{d}");
    }

    #[test]
    fn kac_holds() {
        for alpha in [0.25, 0.75] {
            let map = MapSpec::lsv(alpha).unwrap();
            let d = density(alpha, 2048);
            let sys = build_induced(&map, 20_000, &d).unwrap();
            let k = kac_estimate(&sys, &d, 20_000, 7).unwrap();
            assert!((k.estimate - 1.0).abs() < 0.03, "alpha {alpha}: {k:?}");
        }
    }
}
