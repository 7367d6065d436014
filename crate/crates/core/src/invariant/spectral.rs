//! Perturbed eigenvalues `λ(t)` and Green–Kubo variances of edge operators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::induced::EdgeOperator;
use crate::error::{Error, Result};
use crate::montecarlo::stats::ls_line;

/// Stopping rule for power iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub t: f64,
    pub lambda: Complex64,
    /// `1 - λ`, computed from row defects without cancellation.
    pub one_minus_lambda: Complex64,
    /// `‖v R_t - λ v‖₁ / ‖v‖₁` for the returned unit-sum eigenvector.
    pub eigvec_residual: f64,
    pub iterations: usize,
}

/// Dominant eigenvalue of `R_t` by power iteration started at the
/// stationary vector (unit-sum normalisation).
pub fn perturbed_eigenvalue(op: &EdgeOperator, t: f64, opts: PowerOptions) -> Result<EigenReport> {
    if t == 0.0 {
        return Ok(EigenReport {
            t,
            lambda: Complex64::new(1.0, 0.0),
            one_minus_lambda: Complex64::new(0.0, 0.0),
            eigvec_residual: 0.0,
            iterations: 0,
        });
    }
    let (pt, defect) = op.perturbed(t);
    let mut v: Vec<Complex64> = op
        .stationary()
        .iter()
        .map(|&p| Complex64::new(p, 0.0))
        .collect();
    let mut residual = f64::INFINITY;
    let mut prev = Complex64::new(f64::NAN, 0.0);
    for it in 1..=opts.max_iter {
        let mut w = pt.left_mul(&v);
        let sw: Complex64 = w.iter().sum();
        let sv: Complex64 = v.iter().sum();
        if sw.norm() < 1e-300 || sv.norm() < 1e-300 {
            return Err(Error::GapLoss {
                t,
                detail: "iterate lost its mass; try a smaller |t|".into(),
            });
        }
        let lambda = sw / sv;
        let nv: f64 = v.iter().map(|z| z.norm()).sum();
        residual = w
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b).norm())
            .sum::<f64>()
            / nv;
        for z in w.iter_mut() {
            *z /= sw;
        }
        v = w;
        if residual < opts.tol || (lambda - prev).norm() < 1e-3 * opts.tol * opts.tol {
            let sv: Complex64 = v.iter().sum();
            let oml: Complex64 = v.iter().zip(&defect).map(|(a, d)| a * d).sum::<Complex64>() / sv;
            return Ok(EigenReport {
                t,
                lambda: Complex64::new(1.0, 0.0) - oml,
                one_minus_lambda: oml,
                eigvec_residual: residual,
                iterations: it,
            });
        }
        prev = lambda;
    }
    Err(Error::GapLoss {
        t,
        detail: format!(
            "power iteration stalled at residual {residual:.3e} after {} steps; try a smaller |t|",
            opts.max_iter
        ),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Report {
    /// Asymptotic variance per return of `f_Z - κ φ_Z`.
    pub sigma2_induced: f64,
    /// `m(Z) · sigma2_induced`: the variance per step of the original system.
    pub sigma2: f64,
    /// `m(Z)` from the invariant density.
    pub mass: f64,
    /// `1 / E[φ_Z]` from the discretised return times (Kac).
    pub kac_mass: f64,
    pub iterations: usize,
}

/// Green–Kubo variance `E[g²] + 2 Σ_i π_i Σ_j P_ij g_ij b_j`, where
/// `b = Σ_{n≥0} P^n ḡ` is solved on the mean-zero subspace.
pub fn sigma2_operator(op: &EdgeOperator, opts: PowerOptions) -> Result<Sigma2Report> {
    let pi = op.stationary();
    let mom = op.row_moments();
    let gbar = &mom.mean;
    let project = |b: &mut Vec<f64>| {
        let m: f64 = b.iter().zip(pi).map(|(x, p)| x * p).sum();
        b.iter_mut().for_each(|x| *x -= m);
    };
    let mut b = gbar.clone();
    project(&mut b);
    let p = op.transition();
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    while iterations < opts.max_iter {
        iterations += 1;
        let pb = p.right_mul(&b);
        let mut next: Vec<f64> = gbar.iter().zip(&pb).map(|(g, x)| g + x).collect();
        project(&mut next);
        let scale = next.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        change = next
            .iter()
            .zip(&b)
            .fold(0.0f64, |m, (a, c)| m.max((a - c).abs()))
            / scale;
        b = next;
        if change < opts.tol * 1e-3 {
            break;
        }
    }
    if !(change < opts.tol) {
        return Err(Error::NoConvergence {
            what: "Green-Kubo solve",
            iterations,
            residual: change,
        });
    }
    let cross = op.cross(&b);
    let second: f64 = mom.second.iter().zip(pi).map(|(s, p)| s * p).sum();
    let corr: f64 = cross.iter().zip(pi).map(|(c, p)| c * p).sum();
    let mut s2 = second + 2.0 * corr;
    if s2 < 0.0 {
        if s2 >= -1e-8 {
            s2 = 0.0;
        } else {
            return Err(Error::NoConvergence {
                what: "Green-Kubo variance (negative)",
                iterations,
                residual: s2,
            });
        }
    }
    Ok(Sigma2Report {
        sigma2_induced: s2,
        sigma2: op.mass() * s2,
        mass: op.mass(),
        kac_mass: 1.0 / op.mean_return(),
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticFit {
    /// Intercept `a` of `(1 - Re λ)/t² ≈ a + b t²`.
    pub coefficient: f64,
    pub curvature: f64,
    /// `max - min` of the ratios over the grid.
    pub spread: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn quadratic_fit(op: &EdgeOperator, ts: &[f64], opts: PowerOptions) -> Result<QuadraticFit> {
    let mut pts = Vec::with_capacity(ts.len());
    for &t in ts {
        let r = perturbed_eigenvalue(op, t, opts)?;
        pts.push((t, r.one_minus_lambda.re / (t * t)));
    }
    let fit: Vec<(f64, f64)> = pts.iter().map(|&(t, r)| (t * t, r)).collect();
    let (a, b) = ls_line(&fit).ok_or(Error::InsufficientData(format!(
        "a line fit needs two points, got {}",
        fit.len()
    )))?;
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| {
            (l.min(p.1), h.max(p.1))
        });
    Ok(QuadraticFit {
        coefficient: a,
        curvature: b,
        spread: hi - lo,
        points: pts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    /// `ln(1 - Re λ(t))` against `ln t`.
    pub points: Vec<(f64, f64)>,
}

/// Log-log slope of `1 - Re λ(t)` over `ts`.
pub fn exponent_fit(op: &EdgeOperator, ts: &[f64], opts: PowerOptions) -> Result<ExponentFit> {
    let mut pts = Vec::with_capacity(ts.len());
    for &t in ts {
        let r = perturbed_eigenvalue(op, t, opts)?;
        let d = r.one_minus_lambda.re;
        if !(d > 0.0) {
            return Err(Error::GapLoss {
                t,
                detail: format!("1 - Re λ = {d:.3e} is not positive"),
            });
        }
        pts.push((t.ln(), d.ln()));
    }
    let (_, slope) = ls_line(&pts).ok_or(Error::InsufficientData(format!(
        "a line fit needs two points, got {}",
        pts.len()
    )))?;
    Ok(ExponentFit {
        exponent: slope,
        points: pts,
    })
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::{assemble_ulam, Assembly, Grid};
    use crate::maps::MapSpec;
    use crate::montecarlo::observable::Observable;

    fn doubling(m: usize, f: &Observable) -> EdgeOperator {
        let op = assemble_ulam(
            &MapSpec::doubling(),
            &Grid::uniform(m).unwrap(),
            Assembly::Exact,
        )
        .unwrap();
        EdgeOperator::from_ulam(&op, f, None).unwrap()
    }

    /// `±1` on the two halves, as edge values on a 64-cell doubling operator.
    fn rademacher() -> EdgeOperator {
        doubling(64, &Observable::constant(0.0))
            .with_edges(|i, _, _, _| if i < 32 { 1.0 } else { -1.0 })
    }

    /// `E[f²] + 2 Σ_k E[f · f∘T^k]` averaged over dyadic midpoints.
    fn brute_force_rademacher() -> f64 {
        let sign = |x: f64| if x < 0.5 { 1.0 } else { -1.0 };
        let n = 1 << 12;
        let mut total = 0.0;
        for j in 0..n {
            let x = (j as f64 + 0.5) / n as f64;
            let mut y = x;
            total += sign(x) * sign(x);
            for _ in 1..10 {
                y = (2.0 * y) % 1.0;
                total += 2.0 * sign(x) * sign(y);
            }
        }
        total / n as f64
    }

    #[test]
    fn zero_observable_has_zero_variance() {
        let op = doubling(16, &Observable::constant(0.0));
        let r = sigma2_operator(&op, PowerOptions::default()).unwrap();
        assert_eq!(r.sigma2, 0.0);
    }

    #[test]
    fn rademacher_variance_is_one() {
        let r = sigma2_operator(&rademacher(), PowerOptions::default()).unwrap();
        assert!(
            (r.sigma2 - brute_force_rademacher()).abs() < 1e-10,
            "{}",
            r.sigma2
        );
    }

    #[test]
    fn coboundary_has_no_variance() {
        let f = Observable::constant(0.0);
        let base = doubling(64, &f);
        let psi = |j: usize| ((j as f64) * 0.37).sin() + (j % 5) as f64;
        let cob = base.with_edges(|i, j, _, _| psi(j) - psi(i));
        let r = sigma2_operator(&cob, PowerOptions::default()).unwrap();
        assert!(r.sigma2 <= 1e-6, "{}", r.sigma2);
    }

    #[test]
    fn eigenvalue_symmetries() {
        let op = doubling(64, &Observable::identity_centred());
        let z = perturbed_eigenvalue(&op, 0.0, PowerOptions::default()).unwrap();
        assert_eq!(z.lambda, Complex64::new(1.0, 0.0));
        let a = perturbed_eigenvalue(&op, 0.4, PowerOptions::default()).unwrap();
        let b = perturbed_eigenvalue(&op, -0.4, PowerOptions::default()).unwrap();
        assert!((a.lambda.conj() - b.lambda).norm() < 1e-9);
    }

    #[test]
    fn rademacher_eigenvalue_is_cosine() {
        let op = rademacher();
        for t in [0.05, 0.3, 1.0] {
            let r = perturbed_eigenvalue(&op, t, PowerOptions::default()).unwrap();
            assert!(
                (r.lambda - Complex64::new(t.cos(), 0.0)).norm() < 1e-9,
                "{t}: {}",
                r.lambda
            );
        }
        let q = quadratic_fit(&op, &log_grid(1e-2, 1e-1, 6), PowerOptions::default()).unwrap();
        assert!((q.coefficient - 0.5).abs() < 1e-6);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 1e-1, 3);
        assert!((g[1] - 1e-2).abs() < 1e-15);
        assert_eq!(g.len(), 3);
    }
}
