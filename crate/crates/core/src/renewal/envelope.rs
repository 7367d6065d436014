//! Perturbed renewal sequences `T_{n,t}` and their distance to
//! `(1/μ)(1 - (c/μ)M(|t|))^n P`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    matrix_recursion, renewal_solve, scalar_recursion, Coefficients, Dense, RenewalSeries,
};
use crate::error::{Error, Result};

/// Rounds of the alternating `ε(t) + δ(n)` fit.
pub const FIT_ROUNDS: usize = 5;
/// `‖T_{n,t}‖` above this marks the sequence as divergent.
pub const DIVERGENCE: f64 = 1e6;

/// Predicted constants with `M(t) = |t|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub c: f64,
    pub mu: f64,
    pub p: f64,
}

impl Prediction {
    pub fn m(&self, t: f64) -> f64 {
        t.abs().powf(self.p)
    }

    /// `(1/μ)(1 - (c/μ)M(|t|))^n`.
    pub fn factor(&self, n: usize, t: f64) -> f64 {
        (1.0 - self.c / self.mu * self.m(t)).powi(n as i32) / self.mu
    }

    /// `e^{-c|t|^p/μ}/μ`.
    pub fn scaling_limit(&self, t: f64) -> f64 {
        (-self.c * self.m(t) / self.mu).exp() / self.mu
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub ts: Vec<f64>,
    /// `d[n][i] = D(n, ts[i])` for `n = 0..=N`.
    pub d: Vec<Vec<f64>>,
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    /// `max ‖R_n(t)‖ / ‖R_n(0)‖` over the grid.
    pub domination: f64,
    /// `‖R(1,t) - R(1,0)‖` per `t`.
    pub continuity: Vec<f64>,
    /// Values of `t` where `T_{n,t}` blew up.
    pub divergent: Vec<f64>,
}

fn sequence(series: &RenewalSeries, n: usize) -> Vec<Dense> {
    match &series.coeffs {
        Coefficients::Scalar(r) => scalar_recursion(r, n)
            .into_iter()
            .map(Dense::scalar)
            .collect(),
        Coefficients::Matrix(r) => matrix_recursion(r, n, series.dim()),
    }
}

/// Fits `D(n,t) <= ε(t) + δ(n)` by alternating sup-residual updates, starting
/// from `δ(n) = D(n, t_min)`.
fn decompose(d: &[Vec<f64>], ts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let i0 = ts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map_or(0, |(i, _)| i);
    let mut delta: Vec<f64> = d.iter().map(|row| row[i0]).collect();
    let mut eps = vec![0.0; ts.len()];
    for _ in 0..FIT_ROUNDS {
        for (i, e) in eps.iter_mut().enumerate() {
            *e = d
                .iter()
                .zip(&delta)
                .map(|(row, dn)| (row[i] - dn).max(0.0))
                .fold(0.0, f64::max);
        }
        for (row, dn) in d.iter().zip(delta.iter_mut()) {
            *dn = row
                .iter()
                .zip(&eps)
                .map(|(x, e)| (x - e).max(0.0))
                .fold(0.0, f64::max);
        }
    }
    (eps, delta)
}

/// `D(n, t)` over `n <= N` and `t ∈ ts` for the family `t ↦ R_n(t)`.
pub fn perturbed_envelope<F>(
    family: F,
    ts: &[f64],
    n: usize,
    pred: &Prediction,
) -> Result<EnvelopeReport>
where
    F: Fn(f64) -> Result<RenewalSeries> + Sync,
{
    if ts.is_empty() {
        return Err(Error::InvalidParameter("empty t grid".into()));
    }
    let base = family(0.0)?;
    let sol = renewal_solve(&base, n)?;
    let p = &sol.projection;
    let base_norms: Vec<f64> = (1..=base.len()).map(|k| base.term(k).norm()).collect();
    let r1 = base.generating(Complex64::new(1.0, 0.0));
    let per_t: Vec<(Vec<f64>, f64, f64, bool)> = ts
        .par_iter()
        .map(|&t| {
            let s = family(t)?;
            if s.len() < n || s.dim() != base.dim() {
                return Err(Error::InvalidParameter(format!(
                    "series at t = {t} does not match the base series"
                )));
            }
            let dom = (1..=s.len().min(base_norms.len()))
                .filter(|&k| base_norms[k - 1] > 0.0)
                .map(|k| s.term(k).norm() / base_norms[k - 1])
                .fold(0.0, f64::max);
            let cont = s.generating(Complex64::new(1.0, 0.0)).distance(&r1);
            let seq = sequence(&s, n);
            let divergent = seq.iter().any(|m| !(m.norm() < DIVERGENCE));
            let col = seq
                .iter()
                .enumerate()
                .map(|(k, m)| m.distance(&p.scaled(Complex64::new(pred.factor(k, t), 0.0))))
                .collect();
            Ok((col, dom, cont, divergent))
        })
        .collect::<Result<Vec<_>>>()?;
    let d: Vec<Vec<f64>> = (0..=n)
        .map(|k| per_t.iter().map(|c| c.0[k]).collect())
        .collect();
    let (eps, delta) = decompose(&d, ts);
    Ok(EnvelopeReport {
        ts: ts.to_vec(),
        d,
        eps,
        delta,
        domination: per_t.iter().map(|c| c.1).fold(0.0, f64::max),
        continuity: per_t.iter().map(|c| c.2).collect(),
        divergent: ts
            .iter()
            .zip(&per_t)
            .filter(|(_, c)| c.3)
            .map(|(&t, _)| t)
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub t: f64,
    /// `t / n^{1/p}`.
    pub s: f64,
    /// `‖T_{n,s} - e^{-c|t|^p/μ}/μ P‖`.
    pub deviation: f64,
    /// `D(n, s)`.
    pub envelope: f64,
    /// `T_{n,s}` for scalar series, `NaN` otherwise.
    pub value: f64,
}

/// `T_{n, t/n^{1/p}}` against its scaling limit for each `n ∈ ns`, `t ∈ ts`.
pub fn scaling_check<F>(
    family: F,
    ts: &[f64],
    ns: &[usize],
    pred: &Prediction,
) -> Result<Vec<ScalingRow>>
where
    F: Fn(f64) -> Result<RenewalSeries> + Sync,
{
    let n_max = ns.iter().copied().max().unwrap_or(0);
    let p = renewal_solve(&family(0.0)?, n_max)?.projection;
    let grid: Vec<(usize, f64)> = ns
        .iter()
        .flat_map(|&n| ts.iter().map(move |&t| (n, t)))
        .collect();
    grid.par_iter()
        .map(|&(n, t)| {
            let s = t / (n as f64).powf(1.0 / pred.p);
            let series = family(s)?;
            let tn = sequence(&series, n).pop().expect("n + 1 terms");
            let limit = p.scaled(Complex64::new(pred.scaling_limit(t), 0.0));
            let factor = p.scaled(Complex64::new(pred.factor(n, s), 0.0));
            Ok(ScalingRow {
                n,
                t,
                s,
                deviation: tn.distance(&limit),
                envelope: tn.distance(&factor),
                value: if tn.dim() == 1 {
                    tn.get(0, 0).re
                } else {
                    f64::NAN
                },
            })
        })
        .collect()
}

/// Geometric returns `R_n = q(1-q)^{n-1}` with a Gaussian factor
/// `e^{-nσ²t²/2}` per step, so that `T_{n,t} = q e^{-nσ²t²/2}` exactly.
pub fn geometric_toy(q: f64, sigma2: f64, t: f64, n_max: usize) -> Result<RenewalSeries> {
    if !(q > 0.0 && q <= 1.0) || !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "geometric toy needs q in (0,1] and sigma2 >= 0, got {q}, {sigma2}"
        )));
    }
    let damp = (-0.5 * sigma2 * t * t).exp();
    let r: Vec<f64> = (1..=n_max)
        .map(|n| q * (1.0 - q).powi(n as i32 - 1) * damp.powi(n as i32))
        .collect();
    let mut s = RenewalSeries::scalar(r);
    s.dropped_mass = (1.0 - q).powi(n_max as i32);
    Ok(s)
}

/// `T_{n,t}` of [`geometric_toy`].
pub fn geometric_toy_closed_form(q: f64, sigma2: f64, t: f64, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        q * (-0.5 * n as f64 * sigma2 * t * t).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_pred(q: f64, sigma2: f64) -> Prediction {
        let mu = 1.0 / q;
        Prediction {
            c: mu * sigma2 / 2.0,
            mu,
            p: 2.0,
        }
    }

    #[test]
    fn toy_matches_closed_form() {
        let (q, s2) = (0.4, 1.3);
        for t in [0.0, 0.1, 0.7] {
            let s = geometric_toy(q, s2, t, 200).unwrap();
            let seq = scalar_recursion(
                match &s.coeffs {
                    Coefficients::Scalar(r) => r,
                    _ => unreachable!(),
                },
                200,
            );
            for n in [0, 1, 5, 50, 200] {
                let exact = geometric_toy_closed_form(q, s2, t, n);
                assert!(
                    (seq[n].re - exact).abs() < 1e-12 * exact.max(1e-300).max(1e-12),
                    "{t} {n}"
                );
            }
        }
    }

    #[test]
    fn zero_frequency_envelope_is_unperturbed() {
        let (q, s2) = (0.5, 1.0);
        let pred = toy_pred(q, s2);
        let r = perturbed_envelope(
            |t| geometric_toy(q, s2, t, 100),
            &[0.0, 0.05, 0.2],
            100,
            &pred,
        )
        .unwrap();
        // geometric renewals are stationary from n = 1
        assert!(r.d[1..].iter().all(|row| row[0] < 1e-12));
        assert!((r.domination - 1.0).abs() < 1e-12);
        assert!(r.continuity[0] == 0.0 && r.continuity[2] > r.continuity[1]);
        assert!(r.divergent.is_empty());
        for (n, row) in r.d.iter().enumerate() {
            for (i, &x) in row.iter().enumerate() {
                assert!(x <= r.eps[i] + r.delta[n] + 1e-15);
            }
        }
        assert!(r.eps[0] <= r.eps[2]);
    }

    #[test]
    fn scaling_limit_of_toy() {
        let (q, s2) = (0.5, 2.0);
        let pred = toy_pred(q, s2);
        let rows = scaling_check(
            |t| geometric_toy(q, s2, t, 1000),
            &[0.5, 1.0, 2.0],
            &[10, 100, 1000],
            &pred,
        )
        .unwrap();
        for t in [0.5, 1.0, 2.0] {
            let by_n: Vec<&ScalingRow> = rows.iter().filter(|r| r.t == t).collect();
            assert!(by_n.windows(2).all(|w| w[1].envelope < w[0].envelope));
            let last = by_n.last().unwrap();
            assert!((last.value / pred.scaling_limit(t) - 1.0).abs() < 0.01);
        }
    }
}
