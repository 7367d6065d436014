//! `Z_q`: the first `q` floors of the tower over `Y`, realised in `[0, 1]`
//! as the points that enter `Y` in fewer than `q` steps, i.e. `(x_q, 1]`.

use serde::{Deserialize, Serialize};

use super::{excursion, Excursion, InducedSystem};
use crate::error::{Error, Result};
use crate::invariant::InvariantDensity;
use crate::maps::MapSpec;
use crate::montecarlo::observable::Observable;
use crate::montecarlo::stats::KahanSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerSlice {
    pub q: usize,
    /// `x_q`; `Z_q = (x_q, 1]`.
    pub lower: f64,
    /// `m(Z_q)`.
    pub mass: f64,
}

/// Both sides of `S_n f(x) = Σ_{j<k} f_Z(T_Z^j x)` along one orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub direct: f64,
    pub induced: f64,
    pub returns: usize,
}

impl TowerSlice {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x <= 1.0
    }

    /// Floor of `x` in the tower, `0` on `Y`.
    pub fn floor(&self, sys: &InducedSystem, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        sys.ladder.entry_time(x)
    }

    /// `φ_Z(x)` and `f_Z(x)`.
    pub fn first_return(
        &self,
        map: &MapSpec,
        f: &Observable,
        x: f64,
        cap: u64,
    ) -> Result<Excursion> {
        if !self.contains(x) {
            return Err(Error::Domain(format!("{x} is not in Z_{}", self.q)));
        }
        excursion(map, |y| f.eval(y), x, |y| self.contains(y), cap)
    }

    /// Sums `f` over the first `returns` excursions from `x`, once directly and
    /// once through `f_Z`.
    pub fn segment(
        &self,
        map: &MapSpec,
        f: &Observable,
        x: f64,
        returns: usize,
        cap: u64,
    ) -> Result<Segment> {
        let mut y = x;
        let mut induced = KahanSum::new();
        let mut n = 0u64;
        for _ in 0..returns {
            let e = self.first_return(map, f, y, cap)?;
            induced.add(e.sum);
            n += e.steps;
            y = e.end;
        }
        let mut direct = KahanSum::new();
        let mut z = x;
        for _ in 0..n {
            direct.add(f.eval(z));
            z = map.apply(z);
        }
        Ok(Segment {
            direct: direct.value(),
            induced: induced.value(),
            returns,
        })
    }
}

pub fn truncated_tower(
    sys: &InducedSystem,
    q: usize,
    density: &InvariantDensity,
) -> Result<TowerSlice> {
    if q < 1 || q > sys.ladder.depth() {
        return Err(Error::InvalidParameter(format!(
            "tower height must lie in 1..={}, got {q}",
            sys.ladder.depth()
        )));
    }
    let lower = sys.ladder.points[q];
    Ok(TowerSlice {
        q,
        lower,
        mass: density.integrate(lower, 1.0),
    })
}
