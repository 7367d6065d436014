//! Ulam discretisation of first-return maps with edge observables.
//!
//! An [`EdgeOperator`] is a row-stochastic matrix whose entries are split
//! into pieces: a piece carries the Lebesgue share of its source cell that
//! the first-return map sends into its destination cell, the return time and
//! the value of the induced observable `f_Z` on that piece. Perturbing by
//! `e^{itf_Z}` then acts on pieces, so the same object yields the invariant
//! measure, the Green–Kubo variance and the eigenvalue `λ(t)`.
//!
//! For the tower slice `Z_q = (x_q, 1]` the first-return map has three kinds
//! of inverse branches onto a destination point `z ∈ Z_q`:
//! - the right preimage `(1+z)/2`, return time 1;
//! - the left preimage, when it lies in `Z_q`, return time 1;
//! - for `z` in the bottom floor `(x_q, x_{q-1}]`, the chains
//!   `y = (1 + L^m z)/2` through the left branch inverse `L`, return time `m+1`.
//!
//! Deep chains all land in the first cell of `Y`. Beyond an explicit depth
//! they reuse the destination profile of the deepest explicit chain and only
//! differ by their mass (a ladder gap) and a phase shift
//! `Δ_m = Σ f(ladder midpoints)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::InvariantDensity;
use super::grid::{Grid, Refinement};
use super::sparse::Csr;
use super::ulam::UlamOperator;
use crate::error::{Error, Result};
use crate::maps::{MapSpec, MarkovLadder};
use crate::montecarlo::observable::Observable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub src: u32,
    pub dst: u32,
    /// Share of the source cell.
    pub weight: f64,
    pub ret: u32,
    pub g: f64,
}

/// Chains deeper than the explicit depth, all inside one source cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeepBlock {
    pub src: u32,
    /// `(dst, fraction, g)` of the deepest explicit chain.
    pub profile: Vec<(u32, f64, f64)>,
    pub base_ret: u32,
    /// Share of the source cell per deeper chain (last entry: the lump).
    pub weights: Vec<f64>,
    pub shifts: Vec<f64>,
    /// Return time minus `base_ret`.
    pub extra: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InducedConfig {
    /// Uniform cells on `Y`; lower floors use the same width.
    pub cells_y: usize,
    /// Deepest return time resolved (beyond it: one lump).
    pub k_max: usize,
    /// Chains computed explicitly before switching to the deep profile.
    pub min_explicit: usize,
}

impl Default for InducedConfig {
    fn default() -> Self {
        Self {
            cells_y: 2048,
            k_max: 1_000_000,
            min_explicit: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EdgeOperator {
    grid: Grid,
    q: usize,
    pieces: Vec<Piece>,
    slots: Vec<u32>,
    deep: Option<DeepBlock>,
    deep_slots: Vec<u32>,
    pattern: Csr<f64>,
    mass: f64,
    stationary: Vec<f64>,
    kappa: f64,
    explicit_depth: usize,
}

/// Per-row moments of the (centred) edge observable.
#[derive(Debug, Clone)]
pub struct RowMoments {
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
    pub ret: Vec<f64>,
}

impl EdgeOperator {
    fn assemble(
        grid: Grid,
        q: usize,
        mut pieces: Vec<Piece>,
        mut deep: Option<DeepBlock>,
        mass: f64,
        explicit_depth: usize,
        stationary: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = grid.len();
        let mut sums = vec![0.0; n];
        for p in &pieces {
            sums[p.src as usize] += p.weight;
        }
        if let Some(d) = &deep {
            sums[d.src as usize] += d.weights.iter().sum::<f64>();
        }
        if let Some(i) = sums.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "source cell {i} has no outgoing mass"
            )));
        }
        for p in pieces.iter_mut() {
            p.weight /= sums[p.src as usize];
        }
        if let Some(d) = deep.as_mut() {
            let s = sums[d.src as usize];
            for w in d.weights.iter_mut() {
                *w /= s;
            }
        }
        let mut triplets: Vec<(u32, u32, f64)> =
            pieces.iter().map(|p| (p.src, p.dst, p.weight)).collect();
        if let Some(d) = &deep {
            let total: f64 = d.weights.iter().sum();
            triplets.extend(
                d.profile
                    .iter()
                    .map(|&(j, frac, _)| (d.src, j, frac * total)),
            );
        }
        let pattern = Csr::from_triplets(n, n, triplets);
        let slot_of = |i: u32, j: u32| -> u32 {
            let r = pattern.row_range(i as usize);
            let cols: Vec<usize> = r.clone().map(|k| pattern.col(k)).collect();
            (r.start + cols.binary_search(&(j as usize)).expect("entry present")) as u32
        };
        let slots = pieces.iter().map(|p| slot_of(p.src, p.dst)).collect();
        let deep_slots = deep
            .as_ref()
            .map(|d| {
                d.profile
                    .iter()
                    .map(|&(j, _, _)| slot_of(d.src, j))
                    .collect()
            })
            .unwrap_or_default();
        let mut op = Self {
            grid,
            q,
            pieces,
            slots,
            deep,
            deep_slots,
            pattern,
            mass,
            stationary: Vec::new(),
            kappa: 0.0,
            explicit_depth,
        };
        op.stationary = match stationary {
            Some(pi) => pi,
            None => op.power_stationary(1e-14, 200_000)?,
        };
        op.kappa = op.discrete_centring();
        Ok(op)
    }

    /// Edge operator of a plain Ulam matrix: every entry returns in one step
    /// and carries `f` at its representative point.
    pub fn from_ulam(
        op: &UlamOperator,
        f: &Observable,
        density: Option<&InvariantDensity>,
    ) -> Result<Self> {
        let m = op.matrix();
        let mut pieces = Vec::with_capacity(m.nnz());
        for i in 0..m.rows() {
            for k in m.row_range(i) {
                pieces.push(Piece {
                    src: i as u32,
                    dst: m.col(k) as u32,
                    weight: m.values()[k],
                    ret: 1,
                    g: f.eval(op.points()[k]),
                });
            }
        }
        let pi = density.map(|d| (0..d.grid().len()).map(|i| d.mass(i)).collect());
        Self::assemble(op.grid().clone(), 0, pieces, None, 1.0, 1, pi)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Tower height (1 for the induced system on `Y`, 0 for a plain Ulam matrix).
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn deep(&self) -> Option<&DeepBlock> {
        self.deep.as_ref()
    }

    pub fn transition(&self) -> &Csr<f64> {
        &self.pattern
    }

    /// `m(Z)` under the invariant density.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Constant `κ` such that `f_Z - κ φ_Z` has zero mean under the
    /// stationary vector.
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn explicit_depth(&self) -> usize {
        self.explicit_depth
    }

    /// Copy with a different centring constant.
    pub fn with_kappa(&self, kappa: f64) -> Self {
        Self {
            kappa,
            ..self.clone()
        }
    }

    /// Copy with edge values replaced by `edge(src, dst, g, ret)`; deep
    /// shifts are dropped.
    pub fn with_edges<F: Fn(usize, usize, f64, u32) -> f64>(&self, edge: F) -> Self {
        let mut out = self.clone();
        for p in out.pieces.iter_mut() {
            p.g = edge(p.src as usize, p.dst as usize, p.g, p.ret);
        }
        if let Some(d) = out.deep.as_mut() {
            let src = d.src as usize;
            let base = d.base_ret;
            for e in d.profile.iter_mut() {
                e.2 = edge(src, e.0 as usize, e.2, base);
            }
            d.shifts.iter_mut().for_each(|s| *s = 0.0);
        }
        out.kappa = 0.0;
        out
    }

    fn power_stationary(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let mut v = vec![1.0 / n as f64; n];
        let mut res = f64::INFINITY;
        for _ in 0..max_iter {
            let mut w = self.pattern.left_mul(&v);
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            res = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = w;
            if res < tol {
                return Ok(v);
            }
        }
        Err(Error::NoConvergence {
            what: "stationary vector",
            iterations: max_iter,
            residual: res,
        })
    }

    /// Mean return time under the stationary vector; `1 / m(Z)` by Kac.
    pub fn mean_return(&self) -> f64 {
        let m = self.row_moments_with(0.0);
        m.ret.iter().zip(&self.stationary).map(|(r, p)| r * p).sum()
    }

    fn discrete_centring(&self) -> f64 {
        let m = self.row_moments_with(0.0);
        let g: f64 = m
            .mean
            .iter()
            .zip(&self.stationary)
            .map(|(a, p)| a * p)
            .sum();
        let r: f64 = m.ret.iter().zip(&self.stationary).map(|(a, p)| a * p).sum();
        g / r
    }

    pub fn row_moments(&self) -> RowMoments {
        self.row_moments_with(self.kappa)
    }

    fn row_moments_with(&self, kappa: f64) -> RowMoments {
        let n = self.grid.len();
        let mut mean = vec![0.0; n];
        let mut second = vec![0.0; n];
        let mut ret = vec![0.0; n];
        for p in &self.pieces {
            let g = p.g - kappa * p.ret as f64;
            let i = p.src as usize;
            mean[i] += p.weight * g;
            second[i] += p.weight * g * g;
            ret[i] += p.weight * p.ret as f64;
        }
        if let Some(d) = &self.deep {
            let i = d.src as usize;
            let (w0, s1, s2, r1) = d.shift_moments(kappa);
            for &(_, frac, g) in &d.profile {
                let g = g - kappa * d.base_ret as f64;
                mean[i] += frac * (g * w0 + s1);
                second[i] += frac * (g * g * w0 + 2.0 * g * s1 + s2);
                ret[i] += frac * (d.base_ret as f64 * w0 + r1);
            }
        }
        RowMoments { mean, second, ret }
    }

    /// `Σ_j P_ij g_ij b_j` per row.
    pub fn cross(&self, b: &[f64]) -> Vec<f64> {
        let kappa = self.kappa;
        let mut out = vec![0.0; self.grid.len()];
        for p in &self.pieces {
            let g = p.g - kappa * p.ret as f64;
            out[p.src as usize] += p.weight * g * b[p.dst as usize];
        }
        if let Some(d) = &self.deep {
            let (w0, s1, _, _) = d.shift_moments(kappa);
            let i = d.src as usize;
            for &(j, frac, g) in &d.profile {
                let g = g - kappa * d.base_ret as f64;
                out[i] += frac * (g * w0 + s1) * b[j as usize];
            }
        }
        out
    }

    /// `P_t` with entries `P_ij e^{itg_ij}` and the row defects
    /// `Σ_j P_ij (1 - e^{itg_ij})`, both accurate for small `t`.
    pub fn perturbed(&self, t: f64) -> (Csr<Complex64>, Vec<Complex64>) {
        let kappa = self.kappa;
        let n = self.grid.len();
        let mut vals = vec![Complex64::new(0.0, 0.0); self.pattern.nnz()];
        let mut defect = vec![Complex64::new(0.0, 0.0); n];
        for (p, &slot) in self.pieces.iter().zip(&self.slots) {
            let theta = t * (p.g - kappa * p.ret as f64);
            vals[slot as usize] += Complex64::from_polar(p.weight, theta);
            defect[p.src as usize] += one_minus_cis(theta) * p.weight;
        }
        if let Some(d) = &self.deep {
            let (s, dm, w0) = d.phase_sums(kappa, t);
            let i = d.src as usize;
            for (&(_, frac, g), &slot) in d.profile.iter().zip(&self.deep_slots) {
                let theta = t * (g - kappa * d.base_ret as f64);
                let e = Complex64::from_polar(1.0, theta);
                vals[slot as usize] += e * s * frac;
                defect[i] += (one_minus_cis(theta) * w0 + e * dm) * frac;
            }
        }
        (self.pattern.with_values(vals), defect)
    }

    /// First-return pieces grouped by return time: `R_n(t)` for `n = 1..=n_max`.
    pub fn return_terms(&self, t: f64, n_max: usize) -> Vec<Csr<Complex64>> {
        let kappa = self.kappa;
        let n = self.grid.len();
        let mut buckets: Vec<Vec<(u32, u32, Complex64)>> = vec![Vec::new(); n_max];
        for p in &self.pieces {
            let r = p.ret as usize;
            if r >= 1 && r <= n_max {
                let theta = t * (p.g - kappa * p.ret as f64);
                buckets[r - 1].push((p.src, p.dst, Complex64::from_polar(p.weight, theta)));
            }
        }
        if let Some(d) = &self.deep {
            for (m, ((&w, &s), &e)) in d.weights.iter().zip(&d.shifts).zip(&d.extra).enumerate() {
                let r = (d.base_ret + e) as usize;
                if r > n_max || m + 1 == d.weights.len() {
                    continue;
                }
                let shift = s - kappa * e as f64;
                for &(j, frac, g) in &d.profile {
                    let theta = t * (g - kappa * d.base_ret as f64 + shift);
                    buckets[r - 1].push((d.src, j, Complex64::from_polar(w * frac, theta)));
                }
            }
        }
        buckets
            .into_iter()
            .map(|b| Csr::from_triplets(n, n, b))
            .collect()
    }
}

#[inline]
fn one_minus_cis(theta: f64) -> Complex64 {
    let s = (0.5 * theta).sin();
    Complex64::new(2.0 * s * s, -theta.sin())
}

impl DeepBlock {
    /// `(Σw, Σw Δ', Σw Δ'², Σw extra)` with `Δ' = Δ - κ·extra`.
    fn shift_moments(&self, kappa: f64) -> (f64, f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0, 0.0);
        for ((&w, &s), &e) in self.weights.iter().zip(&self.shifts).zip(&self.extra) {
            let d = s - kappa * e as f64;
            out.0 += w;
            out.1 += w * d;
            out.2 += w * d * d;
            out.3 += w * e as f64;
        }
        out
    }

    /// `(Σ w e^{itΔ'}, Σ w (1 - e^{itΔ'}), Σ w)`.
    fn phase_sums(&self, kappa: f64, t: f64) -> (Complex64, Complex64, f64) {
        let mut s = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        let mut w0 = 0.0;
        for ((&w, &sh), &e) in self.weights.iter().zip(&self.shifts).zip(&self.extra) {
            let theta = t * (sh - kappa * e as f64);
            s += Complex64::from_polar(w, theta);
            d += one_minus_cis(theta) * w;
            w0 += w;
        }
        (s, d, w0)
    }
}

/// Grid on `Z_q = (x_q, 1]`: each floor `(x_k, x_{k-1}]` split evenly into
/// cells no wider than `w = 1/(2 cells_y)`, then `cells_y` cells on `Y`.
pub fn tower_grid(ladder: &MarkovLadder, q: usize, cells_y: usize) -> Result<Grid> {
    if q == 0 || q > ladder.depth() {
        return Err(Error::InvalidParameter(format!(
            "tower height must lie in 1..={}, got {q}",
            ladder.depth()
        )));
    }
    let w = 0.5 / cells_y as f64;
    let mut b = vec![ladder.points[q]];
    for k in (2..=q).rev() {
        let (lo, hi) = (ladder.points[k], ladder.points[k - 1]);
        let cells = ((hi - lo) / w).ceil().max(1.0) as usize;
        for j in 1..cells {
            b.push(lo + (hi - lo) * j as f64 / cells as f64);
        }
        b.push(hi);
    }
    for j in 1..=cells_y {
        b.push(0.5 + 0.5 * j as f64 / cells_y as f64);
    }
    Grid::from_breakpoints(b, Refinement::Ladder)
}

/// Edge operator of the first-return map to `Z_q` with edges carrying `f_Z`.
pub fn induced_operator(
    map: &MapSpec,
    f: &Observable,
    q: usize,
    density: &InvariantDensity,
    config: InducedConfig,
) -> Result<EdgeOperator> {
    if config.cells_y < 2 || config.k_max < 2 {
        return Err(Error::InvalidParameter(
            "induced operator needs cells_y >= 2 and k_max >= 2".into(),
        ));
    }
    let ladder = MarkovLadder::build(map, q + config.k_max + 1, 1e-12)?;
    let grid = tower_grid(&ladder, q, config.cells_y)?;
    let n = grid.len();
    let b = grid.breakpoints().to_vec();
    let s0 = grid.breakpoint_index(0.5).expect("tower grid contains 1/2");
    let mut pieces: Vec<Piece> = Vec::new();

    // Return time 1 from the left part of Z_q through T.
    let pre_left: Vec<f64> = b.par_iter().map(|&z| map.left_preimage(z)).collect();
    let pre_right: Vec<f64> = b.iter().map(|&z| map.right_preimage(z)).collect();
    for i in 0..n {
        let (a, c) = grid.cell(i);
        let pre = if i < s0 { &pre_left } else { &pre_right };
        let start = pre.partition_point(|&p| p <= a).saturating_sub(1);
        let mut j = start;
        while j + 1 < pre.len() && pre[j] < c {
            let lo = a.max(pre[j]);
            let hi = c.min(pre[j + 1]);
            if hi > lo {
                pieces.push(Piece {
                    src: i as u32,
                    dst: j as u32,
                    weight: (hi - lo) / (c - a),
                    ret: 1,
                    g: f.eval(0.5 * (lo + hi)),
                });
            }
            j += 1;
        }
    }

    // Chains into the bottom floor through the gap below x_q.
    let nb = b.partition_point(|&z| z <= ladder.points[q - 1]) - 1;
    let mut ub: Vec<f64> = b[..=nb].to_vec();
    let mut um: Vec<f64> = (0..nb).map(|j| 0.5 * (b[j] + b[j + 1])).collect();
    let mut sums = vec![0.0; nb];
    let first_y_hi = grid.cell(s0).1;
    let mut explicit = 0;
    let mut profile: Vec<(u32, f64, f64)> = Vec::new();
    for m in 1..=config.k_max {
        ub.par_iter_mut().for_each(|u| *u = map.left_preimage(*u));
        um.par_iter_mut().for_each(|u| *u = map.left_preimage(*u));
        for (s, &u) in sums.iter_mut().zip(&um) {
            *s += f.eval(u);
        }
        let ys: Vec<f64> = ub.iter().map(|&u| 0.5 * (1.0 + u)).collect();
        let ret = (m + 1) as u32;
        let mut total = 0.0;
        profile.clear();
        for j in 0..nb {
            let (ya, yb) = (ys[j], ys[j + 1]);
            if !(yb > ya) {
                continue;
            }
            let g = f.eval(0.5 * (1.0 + um[j])) + sums[j];
            total += yb - ya;
            profile.push((j as u32, yb - ya, g));
            let mut i = grid.locate(ya);
            while i < n {
                let (lo, hi) = grid.cell(i);
                if lo >= yb {
                    break;
                }
                let l = lo.max(ya);
                let h = hi.min(yb);
                if h > l {
                    pieces.push(Piece {
                        src: i as u32,
                        dst: j as u32,
                        weight: (h - l) / (hi - lo),
                        ret,
                        g,
                    });
                }
                i += 1;
            }
        }
        explicit = m;
        if total > 0.0 {
            profile.iter_mut().for_each(|e| e.1 /= total);
        }
        if m >= config.min_explicit && ys[nb] <= first_y_hi {
            break;
        }
    }

    let deep = if explicit < config.k_max {
        let w_s0 = grid.width(s0);
        let mut weights = Vec::with_capacity(config.k_max - explicit + 1);
        let mut shifts = Vec::with_capacity(weights.capacity());
        let mut extra = Vec::with_capacity(weights.capacity());
        let mut shift = 0.0;
        for m in explicit + 1..=config.k_max {
            let k = q + m;
            shift += f.eval(0.5 * (ladder.points[k] + ladder.points[k - 1]));
            weights.push(0.5 * ladder.gaps[k - 1] / w_s0);
            shifts.push(shift);
            extra.push((m - explicit) as u32);
        }
        let floor = ladder.points[q + config.k_max];
        weights.push(0.5 * floor / w_s0);
        shifts.push(shift + f.eval(0.5 * floor));
        extra.push((config.k_max - explicit + 1) as u32);
        Some(DeepBlock {
            src: s0 as u32,
            profile: profile.clone(),
            base_ret: (explicit + 1) as u32,
            weights,
            shifts,
            extra,
        })
    } else {
        None
    };
    let mass = density.integrate(ladder.points[q], 1.0);
    EdgeOperator::assemble(grid, q, pieces, deep, mass, explicit, None)
}
