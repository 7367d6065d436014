//! Small dense complex matrices, row-major.

use num_complex::Complex64;

use crate::invariant::Csr;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    d: usize,
    data: Vec<Complex64>,
}

impl Dense {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            data: vec![Complex64::new(0.0, 0.0); d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.data[i * d + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn scalar(x: Complex64) -> Self {
        Self {
            d: 1,
            data: vec![x],
        }
    }

    pub fn from_csr(a: &Csr<Complex64>) -> Self {
        let d = a.rows();
        let mut m = Self::zeros(d);
        for i in 0..d {
            for (j, v) in a.row(i) {
                m.data[i * d + j] += v;
            }
        }
        m
    }

    pub(crate) fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let d = rows.len();
        Self {
            d,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// `v wᵀ`.
    pub fn outer(v: &[Complex64], w: &[Complex64]) -> Self {
        let d = v.len();
        let mut m = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.data[i * d + j] = v[i] * w[j];
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &Dense, s: Complex64) {
        assert_eq!(self.d, other.d, "dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            d: self.d,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Dense) -> Self {
        let d = self.d;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for l in 0..d {
                let a = self.data[i * d + l];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[l * d + j];
                }
            }
        }
        out
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.d)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `x A`.
    pub fn vec_mul(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.d];
        for (i, &xi) in x.iter().enumerate() {
            for (yj, a) in y.iter_mut().zip(self.row(i)) {
                *yj += xi * a;
            }
        }
        y
    }

    /// Max absolute row sum.
    pub fn norm(&self) -> f64 {
        (0..self.d)
            .map(|i| self.row(i).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `‖self - other‖`.
    pub fn distance(&self, other: &Dense) -> f64 {
        (0..self.d)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(other.row(i))
                    .map(|(a, b)| (a - b).norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_and_norms() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let a = Dense::from_rows(vec![vec![c(1.0), c(2.0)], vec![c(0.0), c(-3.0)]]);
        let i = Dense::identity(2);
        assert_eq!(a.matmul(&i), a);
        assert_eq!(a.norm(), 3.0);
        assert_eq!(a.mul_vec(&[c(1.0), c(1.0)]), vec![c(3.0), c(-3.0)]);
        assert_eq!(a.vec_mul(&[c(1.0), c(1.0)]), vec![c(1.0), c(-1.0)]);
        let p = Dense::outer(&[c(1.0), c(1.0)], &[c(0.5), c(0.5)]);
        assert!(p.matmul(&p).distance(&p) < 1e-15);
    }
}
