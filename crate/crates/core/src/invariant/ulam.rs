//! Ulam matrices `P_ij = Leb(cell_i ∩ T^{-1} cell_j) / Leb(cell_i)` on `[0,1]`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use super::sparse::Csr;
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use crate::montecarlo::observable::Observable;
use crate::rng::{open_unit, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assembly {
    /// Interval images through the monotone branch inverses.
    Exact,
    /// Stratified samples per cell; deterministic given the seed.
    MonteCarlo { per_cell: usize, seed: u64 },
}

#[derive(Debug, Clone)]
pub struct UlamOperator {
    map: MapSpec,
    grid: Grid,
    matrix: Csr<f64>,
    /// A representative source point for each stored entry.
    points: Vec<f64>,
    /// First cell to the right of 1/2.
    first_right: usize,
}

impl UlamOperator {
    pub fn map(&self) -> &MapSpec {
        &self.map
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &Csr<f64> {
        &self.matrix
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn first_right(&self) -> usize {
        self.first_right
    }

    /// `max_i |Σ_j P_ij - 1|`.
    pub fn row_sum_error(&self) -> f64 {
        self.matrix
            .row_sums()
            .iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Entries `P_ij e^{i t f(x_ij)}` with `x_ij` the entry's representative point.
    pub fn perturbed(&self, f: &Observable, t: f64) -> Csr<Complex64> {
        let vals = self
            .matrix
            .values()
            .iter()
            .zip(&self.points)
            .map(|(&p, &x)| {
                if t == 0.0 {
                    Complex64::new(p, 0.0)
                } else {
                    Complex64::from_polar(p, t * f.eval(x))
                }
            })
            .collect();
        self.matrix.with_values(vals)
    }

    /// Rayleigh-type estimate `Σ(vP) / Σv` of the leading eigenvalue after
    /// `steps` power iterations from the uniform vector.
    pub fn leading_eigenvalue(&self, steps: usize) -> f64 {
        let n = self.grid.len();
        let mut v = vec![1.0 / n as f64; n];
        let mut lambda = 1.0;
        for _ in 0..steps.max(1) {
            let w = self.matrix.left_mul(&v);
            let s: f64 = w.iter().sum();
            lambda = s / v.iter().sum::<f64>();
            v = w.into_iter().map(|x| x / s).collect();
        }
        lambda
    }
}

pub fn assemble_ulam(map: &MapSpec, grid: &Grid, assembly: Assembly) -> Result<UlamOperator> {
    let first_right = grid
        .breakpoint_index(0.5)
        .ok_or_else(|| Error::InvalidParameter("grid must have 1/2 as a breakpoint".into()))?;
    if grid.lo() != 0.0 || grid.hi() != 1.0 {
        return Err(Error::InvalidParameter("Ulam grid must cover [0,1]".into()));
    }
    let rows: Vec<Vec<(u32, f64, f64)>> = match assembly {
        Assembly::Exact => exact_rows(map, grid, first_right),
        Assembly::MonteCarlo { per_cell, seed } => {
            if per_cell < 100 {
                return Err(Error::InvalidParameter(format!(
                    "Monte Carlo assembly needs at least 100 points per cell, got {per_cell}"
                )));
            }
            sampled_rows(map, grid, per_cell, seed)
        }
    };
    let mut triplets = Vec::new();
    let mut point_of = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let total: f64 = row.iter().map(|e| e.1).sum();
        for (j, w, x) in row {
            triplets.push((i as u32, j, w / total));
            point_of.push(((i as u32, j), x));
        }
    }
    let n = grid.len();
    let matrix = Csr::from_triplets(n, n, triplets);
    point_of.sort_by_key(|&(k, _)| k);
    point_of.dedup_by_key(|&mut (k, _)| k);
    let points = point_of.into_iter().map(|(_, x)| x).collect::<Vec<_>>();
    debug_assert_eq!(points.len(), matrix.nnz());
    Ok(UlamOperator {
        map: map.clone(),
        grid: grid.clone(),
        matrix,
        points,
        first_right,
    })
}

/// For each source cell: `(dest, length, piece midpoint)` from preimages of
/// the breakpoints, so that the pieces of a cell tile it exactly.
fn exact_rows(map: &MapSpec, grid: &Grid, first_right: usize) -> Vec<Vec<(u32, f64, f64)>> {
    let b = grid.breakpoints();
    let pre_left: Vec<f64> = b.par_iter().map(|&z| map.left_preimage(z)).collect();
    let pre_right: Vec<f64> = b.iter().map(|&z| map.right_preimage(z)).collect();
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (a, c) = grid.cell(i);
            let pre = if i < first_right {
                &pre_left
            } else {
                &pre_right
            };
            let mut row = Vec::new();
            let start = pre.partition_point(|&p| p <= a).saturating_sub(1);
            let mut j = start;
            while j + 1 < pre.len() && pre[j] < c {
                let lo = a.max(pre[j]);
                let hi = c.min(pre[j + 1]);
                if hi > lo {
                    row.push((j as u32, hi - lo, 0.5 * (lo + hi)));
                }
                j += 1;
            }
            row
        })
        .collect()
}

fn sampled_rows(
    map: &MapSpec,
    grid: &Grid,
    per_cell: usize,
    seed: u64,
) -> Vec<Vec<(u32, f64, f64)>> {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (a, c) = grid.cell(i);
            let mut rng = stream(seed, i as u64);
            let mut hits: Vec<(u32, f64, f64)> = Vec::new();
            for k in 0..per_cell {
                let u = (k as f64 + open_unit(&mut rng)) / per_cell as f64;
                let x = a + (c - a) * u;
                let j = grid.locate(map.apply(x)) as u32;
                match hits.iter_mut().find(|h| h.0 == j) {
                    Some(h) => {
                        h.1 += 1.0;
                        h.2 += x;
                    }
                    None => hits.push((j, 1.0, x)),
                }
            }
            for h in hits.iter_mut() {
                h.2 /= h.1;
            }
            hits
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapVariant;

    #[test]
    fn doubling_map_two_cells() {
        let op = assemble_ulam(
            &MapSpec::doubling(),
            &Grid::uniform(2).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        let d = op.matrix().to_dense();
        assert_eq!(d, vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn rows_are_stochastic() {
        let map = MapSpec::lsv(0.5).unwrap();
        for grid in [Grid::uniform(64).unwrap(), Grid::lsv_default(512).unwrap()] {
            let op = assemble_ulam(&map, &grid, Assembly::Exact).unwrap();
            assert!(op.row_sum_error() <= 1e-10);
            assert!(op.matrix().values().iter().all(|&v| v >= 0.0));
        }
        let mc = assemble_ulam(
            &map,
            &Grid::uniform(32).unwrap(),
            Assembly::MonteCarlo {
                per_cell: 200,
                seed: 3,
            },
        )
        .unwrap();
        assert!(mc.row_sum_error() <= 1e-10);
    }

    #[test]
    fn sampled_assembly_approaches_exact() {
        let map = MapSpec::new(MapVariant::NeutralLog, 0.5).unwrap();
        let grid = Grid::uniform(16).unwrap();
        let exact = assemble_ulam(&map, &grid, Assembly::Exact).unwrap();
        let mc = assemble_ulam(
            &map,
            &grid,
            Assembly::MonteCarlo {
                per_cell: 20_000,
                seed: 1,
            },
        )
        .unwrap();
        let a = exact.matrix().to_dense();
        let b = mc.matrix().to_dense();
        for i in 0..16 {
            for j in 0..16 {
                assert!((a[i][j] - b[i][j]).abs() < 2e-3, "{i},{j}");
            }
        }
    }

    #[test]
    fn leading_eigenvalue_is_one() {
        let op = assemble_ulam(
            &MapSpec::lsv(0.5).unwrap(),
            &Grid::lsv_default(4096).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        assert!((op.leading_eigenvalue(50) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn perturbation_at_zero_is_exact() {
        let op = assemble_ulam(
            &MapSpec::lsv(0.3).unwrap(),
            &Grid::uniform(32).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        let f = Observable::identity_centred();
        let p0 = op.perturbed(&f, 0.0);
        for (a, b) in p0.values().iter().zip(op.matrix().values()) {
            assert_eq!(a.re, *b);
            assert_eq!(a.im, 0.0);
        }
        let pt = op.perturbed(&f, 0.7);
        let pm = op.perturbed(&f, -0.7);
        for (a, b) in pt.values().iter().zip(pm.values()) {
            assert!((a.conj() - b).norm() < 1e-15);
        }
    }
}
