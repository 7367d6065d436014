//! The first-return system on `Y = (1/2, 1]` and the truncated towers `Z_q`.
//!
//! A point `y ∈ Y` is sent by the right branch to `2y - 1`, which then climbs
//! the ladder back into `Y`. The branch `J_k = ((1+x_k)/2, (1+x_{k-1})/2]`
//! is therefore exactly the set where the return time equals `k`.

mod kac;
mod tail;
mod tower;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::{MapSpec, MarkovLadder};
use crate::montecarlo::observable::Observable;

pub use kac::{kac_estimate, KacEstimate};
pub use tail::{
    holder_growth, tail_profile, tail_profile_beyond, HolderGrowth, HolderRow, TailProfile,
};
pub use tower::{truncated_tower, TowerSlice};

/// Iteration cap for a single excursion.
pub const RETURN_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub k: usize,
    /// Open left end `(1 + x_k)/2`.
    pub lo: f64,
    /// Closed right end `(1 + x_{k-1})/2`.
    pub hi: f64,
    /// `m(J_k)`.
    pub mass: f64,
}

impl Branch {
    pub fn contains(&self, y: f64) -> bool {
        y > self.lo && y <= self.hi
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InducedSystem {
    pub map: MapSpec,
    pub ladder: MarkovLadder,
    pub k_max: usize,
    /// `branches[k-1] = J_k`.
    pub branches: Vec<Branch>,
    /// `return_pmf[k-1] = m[φ = k]`.
    pub return_pmf: Vec<f64>,
    /// `m[φ > k_max]`.
    pub lump_mass: f64,
    pub mass_y: f64,
    pub h_half: f64,
}

impl InducedSystem {
    /// Index `k` of the branch containing `y`, if `k <= k_max`.
    pub fn branch_of(&self, y: f64) -> Option<usize> {
        if !(y > 0.5 && y <= 1.0) {
            return None;
        }
        // exact for y in (1/2, 1]
        let x = 2.0 * y - 1.0;
        let k = self.ladder.entry_time(x)? + 1;
        (k <= self.k_max).then_some(k)
    }

    /// `m[φ > k]` for `k <= k_max`.
    pub fn tail(&self, k: usize) -> f64 {
        assert!(
            k <= self.k_max,
            "tail index {k} beyond k_max {}",
            self.k_max
        );
        self.lump_mass + self.return_pmf[k..].iter().sum::<f64>()
    }

    /// `h(1/2) x_k / 2`, the asymptotic form of `m[φ > k]`.
    pub fn predicted_tail(&self, k: usize) -> f64 {
        0.5 * self.h_half * self.ladder.points[k]
    }

    /// `Σ k m[φ = k]` with the lump extended by the tail model `m[φ > k] ∝ k^{-1/α}`.
    pub fn kac_sum(&self) -> f64 {
        let head: f64 = self
            .return_pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum();
        let k = self.k_max as f64;
        let s = 1.0 / self.map.alpha;
        // Σ_{j>K} j m[φ=j] = (K+1) m[φ>K] + Σ_{j>K} m[φ>j]
        let beyond = self.lump_mass * k * ((k + 0.5) / k).powf(1.0 - s) / (s - 1.0);
        head + (k + 1.0) * self.lump_mass + beyond
    }
}

/// Branch partition and return-time law of the first-return map to `Y`.
pub fn build_induced(
    map: &MapSpec,
    k_max: usize,
    density: &InvariantDensity,
) -> Result<InducedSystem> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let ladder = MarkovLadder::build(map, (k_max + 1).max(2), 1e-12)?;
    let pts = &ladder.points;
    let branches: Vec<Branch> = (1..=k_max)
        .map(|k| {
            let lo = map.right_preimage(pts[k]);
            let hi = map.right_preimage(pts[k - 1]);
            Branch {
                k,
                lo,
                hi,
                mass: density.integrate(lo, hi),
            }
        })
        .collect();
    let return_pmf = branches.iter().map(|b| b.mass).collect();
    let lump_mass = density.integrate(0.5, branches[k_max - 1].lo);
    Ok(InducedSystem {
        map: map.clone(),
        ladder,
        k_max,
        branches,
        return_pmf,
        lump_mass,
        mass_y: density.mass_y(),
        h_half: density.h_half(),
    })
}

fn check_in_y(x: f64) -> Result<()> {
    if x > 0.5 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{x} is not in Y = (1/2, 1]")))
    }
}

/// Steps of one excursion with the Birkhoff sum along it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excursion {
    pub steps: u64,
    pub sum: f64,
    /// The landing point.
    pub end: f64,
}

/// Iterates from `x` until `inside` holds again, summing `f` before each step.
pub(crate) fn excursion(
    map: &MapSpec,
    f: impl Fn(f64) -> f64,
    x: f64,
    inside: impl Fn(f64) -> bool,
    cap: u64,
) -> Result<Excursion> {
    let mut y = x;
    let mut sum = crate::montecarlo::stats::KahanSum::new();
    for steps in 1..=cap {
        sum.add(f(y));
        y = map.apply(y);
        if inside(y) {
            return Ok(Excursion {
                steps,
                sum: sum.value(),
                end: y,
            });
        }
    }
    Err(Error::ReturnCapExceeded { cap })
}

/// `φ_Y(x) = min{n >= 1 : T^n x ∈ Y}` by direct iteration.
pub fn return_time(map: &MapSpec, x: f64, cap: u64) -> Result<u64> {
    check_in_y(x)?;
    excursion(map, |_| 0.0, x, |y| y > 0.5, cap).map(|e| e.steps)
}

/// `f_Y(x) = Σ_{i<φ(x)} f(T^i x)` with its return time.
pub fn induced_value(f: &Observable, map: &MapSpec, x: f64, cap: u64) -> Result<Excursion> {
    check_in_y(x)?;
    excursion(map, |y| f.eval(y), x, |y| y > 0.5, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::{assemble_ulam, invariant_density, Assembly, Grid};
    use crate::rng::{open_unit, stream};

    pub(crate) fn density(alpha: f64, cells: usize) -> InvariantDensity {
        let map = MapSpec::lsv(alpha).unwrap();
        let op = assemble_ulam(&map, &Grid::lsv_default(cells).unwrap(), Assembly::Exact).unwrap();
        invariant_density(&op, 1e-12).unwrap()
    }

    #[test]
    fn return_time_examples() {
        let map = MapSpec::lsv(0.5).unwrap();
        assert_eq!(return_time(&map, 0.9, RETURN_CAP).unwrap(), 1);
        let above = f64::from_bits(0.75f64.to_bits() + 1);
        let below = f64::from_bits(0.75f64.to_bits() - 1);
        assert_eq!(return_time(&map, above, RETURN_CAP).unwrap(), 1);
        assert!(return_time(&map, below, RETURN_CAP).unwrap() >= 2);
        assert!(return_time(&map, 0.4, RETURN_CAP).is_err());
        let deep = 0.5 + 1e-12;
        assert!(matches!(
            return_time(&map, deep, 1000),
            Err(Error::ReturnCapExceeded { cap: 1000 })
        ));
    }

    #[test]
    fn induced_value_examples() {
        let map = MapSpec::lsv(0.75).unwrap();
        let one = Observable::constant(1.0);
        let id = Observable::poly(0.0, &[(1.0, 1.0)], crate::Centering::None).unwrap();
        assert_eq!(induced_value(&id, &map, 0.9, RETURN_CAP).unwrap().sum, 0.9);
        let mut rng = stream(1, 0);
        for _ in 0..200 {
            let y = 0.5 + 0.5 * open_unit(&mut rng);
            let e = induced_value(&one, &map, y, RETURN_CAP).unwrap();
            assert_eq!(e.sum, e.steps as f64);
            assert!(e.end > 0.5);
        }
        // f(0) = 1: f_Y ≈ k deep in the ladder
        let f = Observable::poly(1.0, &[(-1.0, 1.0)], crate::Centering::None).unwrap();
        let y = 0.5 + 0.5 * 1e-6;
        let e = induced_value(&f, &map, y, RETURN_CAP).unwrap();
        assert!(
            (e.sum / e.steps as f64 - 1.0).abs() < 0.05,
            "{} {}",
            e.sum,
            e.steps
        );
    }

    #[test]
    fn branches_partition_y() {
        let d = density(0.6, 1024);
        let sys = build_induced(&MapSpec::lsv(0.6).unwrap(), 2000, &d).unwrap();
        let j1 = sys.branches[0];
        assert_eq!((j1.lo, j1.hi), (0.75, 1.0));
        assert!(sys.branches.windows(2).all(|w| w[1].hi == w[0].lo));
        let total: f64 = sys.return_pmf.iter().sum::<f64>() + sys.lump_mass;
        assert!((total - sys.mass_y).abs() < 1e-12);
        assert!((sys.tail(0) - sys.mass_y).abs() < 1e-12);
        assert!(build_induced(&sys.map, 0, &d).is_err());
    }

    #[test]
    fn branch_and_return_time_agree() {
        let map = MapSpec::lsv(0.75).unwrap();
        let d = density(0.75, 1024);
        let sys = build_induced(&map, 100_000, &d).unwrap();
        let mut rng = stream(5, 0);
        let mut checked = 0;
        for _ in 0..10_000 {
            let y = 0.5 + 0.5 * open_unit(&mut rng);
            if let Some(k) = sys.branch_of(y) {
                assert_eq!(
                    return_time(&map, y, RETURN_CAP).unwrap(),
                    k as u64,
                    "y = {y}"
                );
                checked += 1;
            }
        }
        assert!(checked > 9_990);
        for b in &sys.branches[..50] {
            let mid = 0.5 * (b.lo + b.hi);
            assert_eq!(return_time(&map, mid, RETURN_CAP).unwrap(), b.k as u64);
        }
    }

    #[test]
    fn tail_follows_ladder() {
        for alpha in [0.6, 0.75] {
            let map = MapSpec::lsv(alpha).unwrap();
            let d = density(alpha, 4096);
            let sys = build_induced(&map, 2000, &d).unwrap();
            for k in [100, 300, 1000] {
                let r = sys.tail(k) / sys.predicted_tail(k);
                assert!((r - 1.0).abs() < 0.1, "alpha {alpha} k {k}: {r}");
            }
        }
    }

    #[test]
    fn kac_sum_of_pmf() {
        for alpha in [0.25, 0.75] {
            let map = MapSpec::lsv(alpha).unwrap();
            let d = density(alpha, 2048);
            let sys = build_induced(&map, 100_000, &d).unwrap();
            let s = sys.kac_sum();
            assert!((s - 1.0).abs() < 0.02, "alpha {alpha}: {s}");
        }
    }
}
