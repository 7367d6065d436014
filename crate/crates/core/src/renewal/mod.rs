//! Operator renewal sequences `T_n = Σ_{k=1}^n R_k T_{n-k}`, `T_0 = I`.
//!
//! Matrices follow the Markov (row) convention of the induced operators: row
//! `i` holds the mass leaving cell `i`. The norm used throughout is the max
//! absolute row sum, i.e. the 1-norm of the adjoint transfer operator.

mod dense;
mod envelope;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::induction::InducedSystem;
use crate::invariant::{Csr, EdgeOperator};

pub use crate::montecarlo::local::{local_characteristic, LocalCf};
pub use dense::Dense;
pub use envelope::{
    geometric_toy, geometric_toy_closed_form, perturbed_envelope, scaling_check, EnvelopeReport,
    Prediction, ScalingRow,
};

/// Spectral radius of `R(1)` allowed above 1 before the series is rejected.
pub const RADIUS_SLACK: f64 = 1e-9;
/// Largest `N d²` stored by [`renewal_solve`].
pub const MAX_STORED_ENTRIES: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic,
    InducedSystem,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Coefficients {
    Scalar(Vec<Complex64>),
    Matrix(Vec<Csr<Complex64>>),
}

/// `R_1..R_N` with bookkeeping for the dropped tail.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSeries {
    pub coeffs: Coefficients,
    pub provenance: Provenance,
    /// Mass of `Σ_{n>N} R_n`, when known.
    pub dropped_mass: f64,
    /// `s` in `P[φ > n] ∝ n^{-s}`, used to extrapolate `μ` past `N`.
    pub tail_exponent: Option<f64>,
}

impl RenewalSeries {
    pub fn scalar(r: Vec<f64>) -> Self {
        Self {
            coeffs: Coefficients::Scalar(r.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
            provenance: Provenance::Synthetic,
            dropped_mass: 0.0,
            tail_exponent: None,
        }
    }

    /// `R_n = m[φ = n] / m(Y)` from the induced system.
    pub fn from_induced(sys: &InducedSystem, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > sys.k_max {
            return Err(Error::InvalidParameter(format!(
                "series length must lie in 1..={}, got {n_max}",
                sys.k_max
            )));
        }
        let r: Vec<Complex64> = sys.return_pmf[..n_max]
            .iter()
            .map(|&p| Complex64::new(p / sys.mass_y, 0.0))
            .collect();
        Ok(Self {
            coeffs: Coefficients::Scalar(r),
            provenance: Provenance::InducedSystem,
            dropped_mass: sys.tail(n_max) / sys.mass_y,
            tail_exponent: Some(1.0 / sys.map.alpha),
        })
    }

    /// First-return matrices `R_n(t)` of an induced operator.
    pub fn from_edges(op: &EdgeOperator, t: f64, n_max: usize) -> Self {
        let coeffs = op.return_terms(t, n_max);
        let total: f64 = op.transition().values().iter().sum::<f64>() / op.grid().len() as f64;
        let kept: f64 = coeffs
            .iter()
            .map(|c| c.values().iter().map(|v| v.norm()).sum::<f64>())
            .sum::<f64>()
            / op.grid().len() as f64;
        Self {
            coeffs: Coefficients::Matrix(coeffs),
            provenance: Provenance::InducedSystem,
            dropped_mass: (total - kept).max(0.0),
            tail_exponent: None,
        }
    }

    pub fn len(&self) -> usize {
        match &self.coeffs {
            Coefficients::Scalar(r) => r.len(),
            Coefficients::Matrix(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match &self.coeffs {
            Coefficients::Scalar(_) => 1,
            Coefficients::Matrix(r) => r.first().map_or(0, |m| m.rows()),
        }
    }

    /// `R_n` as a dense matrix (`1 × 1` for scalars).
    pub fn term(&self, n: usize) -> Dense {
        match &self.coeffs {
            Coefficients::Scalar(r) => Dense::scalar(r[n - 1]),
            Coefficients::Matrix(r) => Dense::from_csr(&r[n - 1]),
        }
    }

    /// `R(z) = Σ_{n<=N} R_n z^n`.
    pub fn generating(&self, z: Complex64) -> Dense {
        self.generating_upto(z, self.len())
    }

    /// `Σ_{n<=degree} R_n z^n`.
    pub fn generating_upto(&self, z: Complex64, degree: usize) -> Dense {
        let d = self.dim();
        let mut acc = Dense::zeros(d);
        let mut zn = Complex64::new(1.0, 0.0);
        for n in 1..=self.len().min(degree) {
            zn *= z;
            acc.add_scaled(&self.term(n), zn);
        }
        acc
    }

    /// Sum of `Σ_n |R_n|` entries per row, maximised: `‖R(1)‖` for nonnegative series.
    pub fn total_norm(&self) -> f64 {
        let d = self.dim();
        let mut rows = vec![0.0; d];
        for n in 1..=self.len() {
            let t = self.term(n);
            for (i, r) in rows.iter_mut().enumerate() {
                *r += (0..d).map(|j| t.get(i, j).norm()).sum::<f64>();
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalSolution {
    /// `T_0..=T_N`.
    pub t_seq: Vec<Dense>,
    /// `Σ n π R_n v`, extrapolated past `N` when a tail exponent is known.
    pub mu: f64,
    pub mu_truncated: f64,
    /// Rank-one spectral projection `v π` of `R(1)`.
    pub projection: Dense,
    /// Leading eigenvalue of `R(1)`.
    pub radius: f64,
    /// `‖T_n - P/μ‖`.
    pub envelope: Vec<f64>,
    pub dropped_mass: f64,
}

impl RenewalSolution {
    /// Scalar `T_n` (real part); panics for matrix series.
    pub fn scalar(&self, n: usize) -> f64 {
        assert_eq!(self.t_seq[n].dim(), 1, "not a scalar series");
        self.t_seq[n].get(0, 0).re
    }

    /// Cesàro means `(1/n) Σ_{k=1}^n T_k` of a scalar solution.
    pub fn cesaro(&self) -> Vec<f64> {
        let mut acc = 0.0;
        (1..self.t_seq.len())
            .map(|n| {
                acc += self.scalar(n);
                acc / n as f64
            })
            .collect()
    }

    /// Partial sums of `‖T_n - T_{n-1}‖`.
    pub fn variation_sums(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.t_seq
            .windows(2)
            .map(|w| {
                acc += w[1].distance(&w[0]);
                acc
            })
            .collect()
    }

    /// Relative residual of `(I - R(z)) T(z) = I` at `z`, after removing the
    /// terms of degree above `N` that truncation leaves in the product.
    pub fn identity_residual(&self, series: &RenewalSeries, z: Complex64) -> f64 {
        let n = self.t_seq.len() - 1;
        let d = series.dim();
        let mut tz = Dense::zeros(d);
        let mut zn = Complex64::new(1.0, 0.0);
        let mut powers = Vec::with_capacity(2 * n + 1);
        for _ in 0..=2 * n {
            powers.push(zn);
            zn *= z;
        }
        for (k, t) in self.t_seq.iter().enumerate() {
            tz.add_scaled(t, powers[k]);
        }
        let rz = series.generating_upto(z, n);
        // (I - R(z)) T(z) - I
        let mut res = tz.clone();
        res.add_scaled(&rz.matmul(&tz), Complex64::new(-1.0, 0.0));
        res.add_scaled(&Dense::identity(d), Complex64::new(-1.0, 0.0));
        // + Σ_{m>N} z^m Σ_{k+j=m} R_k T_j, the part of R(z)T(z) above degree N
        let tail = truncation_terms(series, &self.t_seq, &powers);
        res.add_scaled(&tail, Complex64::new(1.0, 0.0));
        res.norm() / tz.norm().max(1.0)
    }
}

fn truncation_terms(series: &RenewalSeries, t_seq: &[Dense], powers: &[Complex64]) -> Dense {
    let n = t_seq.len() - 1;
    let d = series.dim();
    let mut out = Dense::zeros(d);
    // suffix = Σ_{j > N-k} T_j z^j, grown one term per k
    let mut suffix = Dense::zeros(d);
    for k in 1..=series.len().min(n) {
        let j = n + 1 - k;
        suffix.add_scaled(&t_seq[j], powers[j]);
        out.add_scaled(&series.term(k).matmul(&suffix), powers[k]);
    }
    out
}

/// Left and right leading eigenvectors of `R(1)` by power iteration.
fn leading_pair(r1: &Dense) -> Result<(f64, Vec<Complex64>, Vec<Complex64>)> {
    let d = r1.dim();
    let mut v = vec![Complex64::new(1.0, 0.0); d];
    let mut w = vec![Complex64::new(1.0 / d as f64, 0.0); d];
    let mut lambda = 0.0;
    for it in 0..100_000 {
        let nv = r1.mul_vec(&v);
        let nw = r1.vec_mul(&w);
        let sv: f64 = nv.iter().map(|x| x.norm()).sum();
        let sw: f64 = nw.iter().map(|x| x.norm()).sum();
        if !(sv > 0.0 && sw > 0.0) {
            return Err(Error::NotRenewal { radius: 0.0 });
        }
        let next = sv / v.iter().map(|x| x.norm()).sum::<f64>();
        let nv: Vec<Complex64> = nv.iter().map(|x| x / sv).collect();
        let nw: Vec<Complex64> = nw.iter().map(|x| x / sw).collect();
        let change: f64 = nv.iter().zip(&v).map(|(a, b)| (a - b).norm()).sum::<f64>()
            + nw.iter().zip(&w).map(|(a, b)| (a - b).norm()).sum::<f64>();
        v = nv;
        w = nw;
        if it > 2 && change < 1e-14 && (next - lambda).abs() < 1e-15 {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Ok((lambda, w, v))
}

/// `T_0..=T_N` by the renewal recursion, with `μ` and the limit `P/μ`.
pub fn renewal_solve(series: &RenewalSeries, n: usize) -> Result<RenewalSolution> {
    if n > series.len() {
        return Err(Error::InvalidParameter(format!(
            "N = {n} exceeds the stored series length {}",
            series.len()
        )));
    }
    let d = series.dim();
    if d == 0 {
        return Err(Error::InvalidParameter("empty series".into()));
    }
    if (n + 1) * d * d > MAX_STORED_ENTRIES {
        return Err(Error::InvalidParameter(format!(
            "N d² = {} exceeds {MAX_STORED_ENTRIES} stored entries",
            (n + 1) * d * d
        )));
    }
    let r1 = series.generating(Complex64::new(1.0, 0.0));
    let (radius, pi, v) = leading_pair(&r1)?;
    if radius > 1.0 + RADIUS_SLACK {
        return Err(Error::NotRenewal { radius });
    }
    let norm: Complex64 = pi.iter().zip(&v).map(|(a, b)| a * b).sum();
    let projection = Dense::outer(&v, &pi.iter().map(|x| x / norm).collect::<Vec<_>>());

    // μ = π R'(1) v / (π v)
    let mut deriv = Dense::zeros(d);
    for k in 1..=series.len() {
        deriv.add_scaled(&series.term(k), Complex64::new(k as f64, 0.0));
    }
    let mu_truncated = (pi
        .iter()
        .zip(deriv.mul_vec(&v))
        .map(|(a, b)| a * b)
        .sum::<Complex64>()
        / norm)
        .re;
    let mu = match series.tail_exponent {
        Some(s) if s > 1.0 && series.dropped_mass > 0.0 => {
            let k = series.len() as f64;
            let beyond = series.dropped_mass * k * ((k + 0.5) / k).powf(1.0 - s) / (s - 1.0);
            mu_truncated + (k + 1.0) * series.dropped_mass + beyond
        }
        _ => mu_truncated,
    };

    let t_seq = match &series.coeffs {
        Coefficients::Scalar(r) => scalar_recursion(r, n)
            .into_iter()
            .map(Dense::scalar)
            .collect::<Vec<_>>(),
        Coefficients::Matrix(r) => matrix_recursion(r, n, d),
    };
    let limit = projection.scaled(Complex64::new(1.0 / mu, 0.0));
    let envelope = t_seq.par_iter().map(|t| t.distance(&limit)).collect();
    Ok(RenewalSolution {
        t_seq,
        mu,
        mu_truncated,
        projection,
        radius,
        envelope,
        dropped_mass: series.dropped_mass,
    })
}

pub(crate) fn scalar_recursion(r: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut t = Vec::with_capacity(n + 1);
    t.push(Complex64::new(1.0, 0.0));
    for m in 1..=n {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 1..=m.min(r.len()) {
            acc += r[k - 1] * t[m - k];
        }
        t.push(acc);
    }
    t
}

fn matrix_recursion(r: &[Csr<Complex64>], n: usize, d: usize) -> Vec<Dense> {
    let mut t: Vec<Dense> = Vec::with_capacity(n + 1);
    t.push(Dense::identity(d));
    for m in 1..=n {
        // rows of T_m are independent
        let rows: Vec<Vec<Complex64>> = (0..d)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![Complex64::new(0.0, 0.0); d];
                for k in 1..=m.min(r.len()) {
                    let prev = &t[m - k];
                    for (l, a) in r[k - 1].row(i) {
                        for (x, y) in row.iter_mut().zip(prev.row(l)) {
                            *x += a * y;
                        }
                    }
                }
                row
            })
            .collect();
        t.push(Dense::from_rows(rows));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induction::build_induced;
    use crate::invariant::{
        assemble_ulam, induced_operator, invariant_density, Assembly, Grid, InducedConfig,
    };
    use crate::maps::MapSpec;
    use crate::montecarlo::observable::Observable;

    #[test]
    fn deterministic_renewal() {
        let s = RenewalSeries::scalar(vec![1.0, 0.0, 0.0]);
        let sol = renewal_solve(&s, 3).unwrap();
        assert!((0..=3).all(|n| sol.scalar(n) == 1.0));
        assert_eq!(sol.mu, 1.0);
    }

    #[test]
    fn two_step_renewal() {
        let s = RenewalSeries::scalar(vec![0.5, 0.5]);
        let sol = renewal_solve(&s, 2).unwrap();
        assert!((sol.mu - 1.5).abs() < 1e-12);
        // the series stops at N = 2; extend it with zeros for longer runs
        let long = RenewalSeries::scalar([vec![0.5, 0.5], vec![0.0; 40]].concat());
        let sol = renewal_solve(&long, 40).unwrap();
        let expect = [1.0, 0.5, 0.75, 0.625, 0.6875];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(sol.scalar(n), *e);
        }
        assert!((sol.scalar(40) - 2.0 / 3.0).abs() < 1e-10);
        assert!(sol.envelope[40] < 1e-10);
        assert!(renewal_solve(&s, 3).is_err());
    }

    #[test]
    fn rejects_supercritical_series() {
        let s = RenewalSeries::scalar(vec![0.7, 0.7]);
        assert!(matches!(
            renewal_solve(&s, 2),
            Err(Error::NotRenewal { .. })
        ));
    }

    #[test]
    fn identity_residual_is_tiny() {
        let r: Vec<f64> = (1..=30).map(|k| 0.5f64.powi(k)).collect();
        let s = RenewalSeries::scalar(r);
        let sol = renewal_solve(&s, 30).unwrap();
        for z in [
            Complex64::new(0.9, 0.0),
            Complex64::from_polar(0.9, 2.0),
            Complex64::new(-0.3, 0.5),
        ] {
            assert!(sol.identity_residual(&s, z) < 1e-12);
        }
    }

    #[test]
    fn induced_scalar_series() {
        let alpha = 0.6;
        let map = MapSpec::lsv(alpha).unwrap();
        let op = assemble_ulam(&map, &Grid::lsv_default(1024).unwrap(), Assembly::Exact).unwrap();
        let d = invariant_density(&op, 1e-12).unwrap();
        let sys = build_induced(&map, 4000, &d).unwrap();
        let s = RenewalSeries::from_induced(&sys, 4000).unwrap();
        let sol = renewal_solve(&s, 2000).unwrap();
        assert!(
            (sol.mu * sys.mass_y - 1.0).abs() < 0.02,
            "{}",
            sol.mu * sys.mass_y
        );
        assert!((0..=2000).all(|n| (0.0..=1.0 + 1e-8).contains(&sol.scalar(n))));
        let c = sol.cesaro();
        assert!((c[1999] * sol.mu - 1.0).abs() < 0.05);
        let v = sol.variation_sums();
        assert!(v[1999] - v[999] < 0.1 * v[999].max(1e-3));
    }

    #[test]
    fn matrix_series_from_edges() {
        let alpha = 0.4;
        let map = MapSpec::lsv(alpha).unwrap();
        let op = assemble_ulam(&map, &Grid::lsv_default(512).unwrap(), Assembly::Exact).unwrap();
        let d = invariant_density(&op, 1e-12).unwrap();
        let f = Observable::identity_centred().centred(&d).unwrap();
        let cfg = InducedConfig {
            cells_y: 16,
            k_max: 10_000,
            min_explicit: 16,
        };
        let edges = induced_operator(&map, &f, 1, &d, cfg).unwrap();
        let s = RenewalSeries::from_edges(&edges, 0.0, 300);
        assert_eq!(s.dim(), 16);
        let sol = renewal_solve(&s, 300).unwrap();
        assert!(sol.radius <= 1.0 + RADIUS_SLACK);
        // P is a projection
        let p2 = sol.projection.matmul(&sol.projection);
        assert!(p2.distance(&sol.projection) < 1e-8);
        assert!(sol.envelope[300] < sol.envelope[10]);
        assert!(
            (sol.mu * d.mass_y() - 1.0).abs() < 0.05,
            "{}",
            sol.mu * d.mass_y()
        );
        let z = Complex64::from_polar(0.8, 1.1);
        assert!(sol.identity_residual(&s, z) < 1e-8);
    }
}
