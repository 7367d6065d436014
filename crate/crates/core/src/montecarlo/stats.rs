//! Small statistical helpers shared across modules.

/// Compensated (Kahan–Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Least-squares line `y ≈ a + b x`, returned as `(a, b)`.
pub fn ls_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

pub fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    ls_line(points).map(|(_, b)| b)
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut s = KahanSum::new();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut v = KahanSum::new();
    xs.iter().for_each(|&x| v.add((x - mean) * (x - mean)));
    (mean, v.value() / (n - 1) as f64)
}

/// Linear-interpolated quantile of sorted data.
pub fn sorted_quantile(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = u.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive() {
        let mut k = KahanSum::new();
        let mut naive = 0.0;
        k.add(1e16);
        naive += 1e16;
        for _ in 0..1000 {
            k.add(1.0);
            naive += 1.0;
        }
        k.add(-1e16);
        naive -= 1e16;
        assert_eq!(k.value(), 1000.0);
        assert_ne!(naive, 1000.0);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let (a, b) = ls_line(&pts).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b + 0.5).abs() < 1e-14);
        assert!(ls_line(&pts[..1]).is_none());
    }

    #[test]
    fn moments_and_quantiles() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(sorted_quantile(&[0.0, 1.0, 2.0], 0.75), 1.5);
    }
}
